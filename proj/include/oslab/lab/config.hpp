#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "oslab/core/errors.hpp"
#include "oslab/dynamics.hpp"

namespace oslab::lab {

inline constexpr const char* schema_version = "oseledets-lab/1";

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"lyapunov", "regularity", "entropy",         "lp-test",
                                          "perron-demo", "certify-b", "smooth-majorant", "report"};
  return k;
}

/// One experiment, read from a flat INI file:
///
///   [experiment] schema, kind, seed, workers, out
///   [flow]       matrix = "2 1 1 1", kappa, roof_r0, roof_terms
///   [observable] constant, terms           (terms: "k1 k2 amp phase [mode]; ...")
///   [run]        eps, delta, T_max, samples, ... (kind specific, see defaults below)
struct ExperimentConfig {
  std::string schema = schema_version;
  std::string kind;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = "lab-out";

  Mat2i matrix = BaseMap::cat();
  double kappa = 0.0;
  double roof_r0 = 1.0;
  std::vector<TrigTerm> roof_terms;

  double u_constant = 0.0;
  std::vector<TrigTerm> u_terms{TrigTerm{1, 0, 0.5, 0.0, 0}};

  std::vector<double> eps{0.25};
  double delta = 0.05;
  double T_max = 200.0;
  std::size_t samples = 1000;
  bool allow_degenerate_eps = false;

  // lyapunov
  double lyapunov_horizon = 1e4;
  std::size_t lyapunov_orbits = 4;
  // entropy / lp-test
  double t_min = -2.0, t_max = 2.0;
  std::size_t t_count = 41;
  int po_order = 12;
  double mc_horizon = 50.0;
  std::size_t mc_samples = 10000;
  std::string pressure_method = "auto";  ///< auto | periodic-orbit | cloning | naive
  std::size_t hill_k = 0;                ///< 0: 1% of the sample
  double zeta = 2.0;
  std::vector<double> tail_T{10, 15, 20, 25, 30, 35, 40};
  // perron-demo
  int perron_dim = 3;
  std::size_t perron_systems = 10;
  double perron_horizon = 10.0;
  // certify-b
  std::string bundle = "unstable";
  std::vector<double> T_grid{10, 20, 40, 80, 160};
  // smooth-majorant
  std::string grid_source = "step";  ///< step | observable | path to a CSV file
  int grid_n = 128;

  SuspensionFlow flow() const { return SuspensionFlow{BaseMap(matrix, kappa), RoofFunction(roof_r0, roof_terms)}; }
  Observable observable() const { return Observable(u_constant, u_terms); }
};

namespace detail {

inline double parse_double(const std::string& field, const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) throw ConfigError(field, "expected a number, got '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& field, const std::string& s) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError(field, "expected a non-negative integer");
  return v;
}

inline std::vector<double> parse_list(const std::string& field, const std::string& s) {
  std::vector<double> out;
  std::string tok;
  std::istringstream in(s);
  while (in >> tok) {
    if (tok.back() == ',') tok.pop_back();
    if (!tok.empty()) out.push_back(parse_double(field, tok));
  }
  return out;
}

inline std::vector<TrigTerm> parse_terms(const std::string& field, const std::string& s) {
  std::vector<TrigTerm> out;
  std::stringstream all(s);
  std::string item;
  while (std::getline(all, item, ';')) {
    const auto v = parse_list(field, item);
    if (v.empty()) continue;
    if (v.size() != 4 && v.size() != 5) throw ConfigError(field, "a term needs k1 k2 amplitude phase [fiber_mode]");
    TrigTerm t{static_cast<int>(v[0]), static_cast<int>(v[1]), v[2], v[3], v.size() == 5 ? static_cast<int>(v[4]) : 0};
    if (t.k1 != v[0] || t.k2 != v[1] || (v.size() == 5 && t.fiber_mode != v[4]))
      throw ConfigError(field, "frequencies must be integers");
    out.push_back(t);
  }
  return out;
}

}  // namespace detail

/// Parses and validates; every problem is reported with its section.key path.
/// A non-empty `kind` (from the command line) fills in or must match experiment.kind.
inline ExperimentConfig parse_config(const std::string& text, const std::string& kind = "") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("<file>", e.message() + " at line " + std::to_string(e.line()));
  }

  static const std::map<std::string, std::set<std::string>> known{
      {"experiment", {"schema", "kind", "seed", "workers", "out"}},
      {"flow", {"matrix", "kappa", "roof_r0", "roof_terms"}},
      {"observable", {"constant", "terms"}},
      {"run",
       {"eps", "delta", "T_max", "samples", "allow_degenerate_eps", "lyapunov_horizon", "lyapunov_orbits", "t_min",
        "t_max", "t_count", "po_order", "mc_horizon", "mc_samples", "pressure_method", "hill_k", "zeta", "tail_T",
        "perron_dim", "perron_systems", "perron_horizon", "bundle", "T_grid", "grid_source", "grid_n"}},
  };
  for (const auto& [sec, body] : tree) {
    const auto it = known.find(sec);
    if (it == known.end()) throw ConfigError(sec, "unknown section");
    if (!body.data().empty() && body.empty()) throw ConfigError(sec, "keys must live inside a section");
    for (const auto& [key, _] : body)
      if (!it->second.count(key)) throw ConfigError(sec + "." + key, "unknown key");
  }

  ExperimentConfig c;
  auto get = [&](const std::string& path) -> std::optional<std::string> {
    auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'));
    if (!v) return std::nullopt;
    std::string s = *v;
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
  };
  auto num = [&](const std::string& path, double& dst) {
    if (auto v = get(path)) dst = detail::parse_double(path, *v);
  };
  auto count = [&](const std::string& path, auto& dst) {
    if (auto v = get(path)) dst = static_cast<std::remove_reference_t<decltype(dst)>>(detail::parse_uint(path, *v));
  };
  auto str = [&](const std::string& path, std::string& dst) {
    if (auto v = get(path)) dst = *v;
  };
  auto list = [&](const std::string& path, std::vector<double>& dst) {
    if (auto v = get(path)) dst = detail::parse_list(path, *v);
  };

  str("experiment.schema", c.schema);
  if (c.schema != schema_version) throw ConfigError("experiment.schema", "expected " + std::string(schema_version));
  str("experiment.kind", c.kind);
  if (!kind.empty()) {
    if (!c.kind.empty() && c.kind != kind)
      throw ConfigError("experiment.kind", "file says '" + c.kind + "' but '" + kind + "' was requested");
    c.kind = kind;
  }
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end())
    throw ConfigError("experiment.kind", "unknown experiment kind '" + c.kind + "'");
  count("experiment.seed", c.seed);
  count("experiment.workers", c.workers);
  if (c.workers < 1) throw ConfigError("experiment.workers", "must be >= 1");
  str("experiment.out", c.out_dir);

  if (auto v = get("flow.matrix")) {
    const auto m = detail::parse_list("flow.matrix", *v);
    if (m.size() != 4) throw ConfigError("flow.matrix", "expected four integers a11 a12 a21 a22");
    for (int i = 0; i < 4; ++i) {
      c.matrix(i / 2, i % 2) = static_cast<int>(m[i]);
      if (c.matrix(i / 2, i % 2) != m[i]) throw ConfigError("flow.matrix", "entries must be integers");
    }
  }
  num("flow.kappa", c.kappa);
  num("flow.roof_r0", c.roof_r0);
  if (auto v = get("flow.roof_terms")) c.roof_terms = detail::parse_terms("flow.roof_terms", *v);
  num("observable.constant", c.u_constant);
  if (auto v = get("observable.terms")) c.u_terms = detail::parse_terms("observable.terms", *v);

  list("run.eps", c.eps);
  num("run.delta", c.delta);
  num("run.T_max", c.T_max);
  count("run.samples", c.samples);
  if (auto v = get("run.allow_degenerate_eps")) {
    if (*v != "true" && *v != "false") throw ConfigError("run.allow_degenerate_eps", "expected true or false");
    c.allow_degenerate_eps = *v == "true";
  }
  num("run.lyapunov_horizon", c.lyapunov_horizon);
  count("run.lyapunov_orbits", c.lyapunov_orbits);
  num("run.t_min", c.t_min);
  num("run.t_max", c.t_max);
  count("run.t_count", c.t_count);
  count("run.po_order", c.po_order);
  num("run.mc_horizon", c.mc_horizon);
  count("run.mc_samples", c.mc_samples);
  str("run.pressure_method", c.pressure_method);
  count("run.hill_k", c.hill_k);
  num("run.zeta", c.zeta);
  list("run.tail_T", c.tail_T);
  count("run.perron_dim", c.perron_dim);
  count("run.perron_systems", c.perron_systems);
  num("run.perron_horizon", c.perron_horizon);
  str("run.bundle", c.bundle);
  list("run.T_grid", c.T_grid);
  str("run.grid_source", c.grid_source);
  count("run.grid_n", c.grid_n);

  // semantic checks, mapped back to fields
  try {
    (void)c.flow();
  } catch (const BoundError& e) {
    throw ConfigError("flow.roof_terms", e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("flow.matrix", e.what());
  }
  if (c.eps.empty()) throw ConfigError("run.eps", "needs at least one value");
  if (!(c.delta > 0.0)) throw ConfigError("run.delta", "must be positive");
  if (!(c.T_max > 0.0)) throw ConfigError("run.T_max", "must be positive");
  if (c.samples < 1) throw ConfigError("run.samples", "must be >= 1");
  if (!(c.t_min < c.t_max) || c.t_count < 5) throw ConfigError("run.t_count", "need t_min < t_max and >= 5 nodes");
  if (c.po_order < 1 || c.po_order > 14) throw ConfigError("run.po_order", "must be in 1..14");
  if (c.pressure_method != "auto" && c.pressure_method != "periodic-orbit" && c.pressure_method != "cloning" &&
      c.pressure_method != "naive")
    throw ConfigError("run.pressure_method", "expected auto, periodic-orbit, cloning or naive");
  if (!(c.zeta > 1.0)) throw ConfigError("run.zeta", "must exceed 1");
  if (c.bundle != "unstable" && c.bundle != "stable") throw ConfigError("run.bundle", "expected unstable or stable");
  if (c.perron_dim < 1 || c.perron_dim > 8) throw ConfigError("run.perron_dim", "must be in 1..8");
  if (c.grid_n < 4) throw ConfigError("run.grid_n", "must be >= 4");
  if (c.tail_T.size() < 2) throw ConfigError("run.tail_T", "needs at least two horizons");
  if (c.T_grid.empty()) throw ConfigError("run.T_grid", "needs at least one horizon");

  const auto flow = c.flow();
  const auto u = c.observable();
  const double top = u.sup_norm() - u.mean(flow.roof);
  for (double e : c.eps) {
    if (!(e > 0.0)) throw ConfigError("run.eps", "values must be positive");
    if (!c.allow_degenerate_eps && !(e < top))
      throw ConfigError("run.eps", "value " + std::to_string(e) + " is not below sup|u| - chi");
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::string& kind = "") {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), kind);
}

}  // namespace oslab::lab
