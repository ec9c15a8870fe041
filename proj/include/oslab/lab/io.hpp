#pragma once

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "oslab/lab/config.hpp"

namespace oslab::lab {

inline constexpr const char* code_version = "0.1.0";

using json = nlohmann::ordered_json;

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// A number with the method that produced it. Non-finite values become strings.
inline json tagged(double x, const std::string& method) {
  json j;
  if (std::isfinite(x))
    j["value"] = x;
  else
    j["value"] = format_double(x);
  j["method"] = method;
  return j;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  template <class... Cells>
  void row(const Cells&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    if (r.size() != header_.size()) throw ShapeError("csv row width does not match header");
    rows_.push_back(std::move(r));
  }

  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += r[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  static std::string cell(double x) { return format_double(x); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I i) {
    return std::to_string(i);
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Every field that can change a numeric result, one per line. Worker count
/// and output location are left out on purpose.
inline std::string canonical_config(const ExperimentConfig& c) {
  std::string s;
  auto kv = [&](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
  auto list = [&](const std::vector<double>& v) {
    std::string o;
    for (std::size_t i = 0; i < v.size(); ++i) o += (i ? " " : "") + format_double(v[i]);
    return o;
  };
  auto terms = [&](const std::vector<TrigTerm>& v) {
    std::string o;
    for (const auto& t : v)
      o += std::to_string(t.k1) + " " + std::to_string(t.k2) + " " + format_double(t.amplitude) + " " +
           format_double(t.phase) + " " + std::to_string(t.fiber_mode) + ";";
    return o;
  };
  kv("schema", c.schema);
  kv("kind", c.kind);
  kv("seed", std::to_string(c.seed));
  kv("matrix", std::to_string(c.matrix(0, 0)) + " " + std::to_string(c.matrix(0, 1)) + " " +
                   std::to_string(c.matrix(1, 0)) + " " + std::to_string(c.matrix(1, 1)));
  kv("kappa", format_double(c.kappa));
  kv("roof_r0", format_double(c.roof_r0));
  kv("roof_terms", terms(c.roof_terms));
  kv("u_constant", format_double(c.u_constant));
  kv("u_terms", terms(c.u_terms));
  kv("eps", list(c.eps));
  kv("delta", format_double(c.delta));
  kv("T_max", format_double(c.T_max));
  kv("samples", std::to_string(c.samples));
  kv("allow_degenerate_eps", c.allow_degenerate_eps ? "true" : "false");
  kv("lyapunov_horizon", format_double(c.lyapunov_horizon));
  kv("lyapunov_orbits", std::to_string(c.lyapunov_orbits));
  kv("t_range", format_double(c.t_min) + " " + format_double(c.t_max) + " " + std::to_string(c.t_count));
  kv("po_order", std::to_string(c.po_order));
  kv("mc", format_double(c.mc_horizon) + " " + std::to_string(c.mc_samples) + " " + c.pressure_method);
  kv("hill_k", std::to_string(c.hill_k));
  kv("zeta", format_double(c.zeta));
  kv("tail_T", list(c.tail_T));
  kv("perron", std::to_string(c.perron_dim) + " " + std::to_string(c.perron_systems) + " " +
                   format_double(c.perron_horizon));
  kv("bundle", c.bundle);
  kv("T_grid", list(c.T_grid));
  kv("grid", c.grid_source + " " + std::to_string(c.grid_n));
  return s;
}

inline std::string config_hash(const ExperimentConfig& c) { return sha256_hex(canonical_config(c)); }

struct ResultBundle {
  std::string kind;
  json summary;  ///< kind-specific results
  std::map<std::string, CsvTable> tables;
  bool checks_passed = true;
};

/// Writes <out>/<kind>/summary.json and the CSV tables. Files are staged in a
/// sibling directory and moved into place only when all of them are written.
inline std::filesystem::path write_bundle(const ExperimentConfig& c, const ResultBundle& b) {
  namespace fs = std::filesystem;
  const fs::path root(c.out_dir);
  const fs::path final_dir = root / b.kind;
  const fs::path stage = root / (b.kind + ".partial");
  fs::create_directories(root);
  fs::remove_all(stage);
  fs::create_directories(stage);

  json doc;
  doc["schema"] = schema_version;
  doc["kind"] = b.kind;
  doc["provenance"] = {{"config_hash", config_hash(c)}, {"seed", c.seed}, {"code_version", code_version}};
  doc["checks_passed"] = b.checks_passed;
  json files = json::array();
  for (const auto& [name, _] : b.tables) files.push_back(name + ".csv");
  doc["tables"] = files;
  doc["results"] = b.summary;

  auto put = [&](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
  };
  put(stage / "summary.json", doc.dump(2) + "\n");
  for (const auto& [name, t] : b.tables) put(stage / (name + ".csv"), t.str());
  fs::remove_all(final_dir);
  fs::rename(stage, final_dir);
  return final_dir;
}

}  // namespace oslab::lab
