#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oslab/cocycle.hpp"
#include "oslab/deltanorm.hpp"
#include "oslab/lab/config.hpp"
#include "oslab/lab/io.hpp"
#include "oslab/lab/tail.hpp"
#include "oslab/perron.hpp"
#include "oslab/regularity.hpp"
#include "oslab/smoothing.hpp"
#include "oslab/thermo.hpp"

namespace oslab::lab {

namespace detail {

inline std::vector<double> t_nodes(const ExperimentConfig& c) {
  std::vector<double> t(c.t_count);
  for (std::size_t i = 0; i < c.t_count; ++i)
    t[i] = c.t_min + (c.t_max - c.t_min) * static_cast<double>(i) / static_cast<double>(c.t_count - 1);
  // keep an exact zero node when the range straddles it
  for (auto& x : t)
    if (std::abs(x) < 1e-12) x = 0.0;
  return t;
}

inline PressureCurve pressure_curve(const ExperimentConfig& c) {
  const auto flow = c.flow();
  const auto u = c.observable();
  const auto t = t_nodes(c);
  std::string m = c.pressure_method;
  if (m == "auto") m = c.kappa == 0.0 ? "periodic-orbit" : "cloning";
  if (m == "periodic-orbit") {
    if (c.kappa != 0.0) throw ConfigError("run.pressure_method", "periodic-orbit sums need kappa = 0");
    return beta_curve(u, flow, t, c.po_order, c.workers);
  }
  return beta_mc(u, flow, t, c.mc_horizon, c.mc_samples, c.seed, m == "naive" ? CgfMethod::Naive : CgfMethod::Cloning,
                 c.workers);
}

inline std::vector<RegularityRecord> records(const ExperimentConfig& c, double eps,
                                             const std::vector<FlowPoint>& pts) {
  const auto flow = c.flow();
  const auto u = c.observable();
  return parallel_map(pts.size(), c.workers,
                      [&](std::size_t i) { return regularity_D(flow, u, pts[i], eps, c.T_max); });
}

inline json audit_json(std::size_t pass, std::size_t fail, std::size_t skipped) {
  return {{"pass", pass}, {"fail", fail}, {"skipped_truncated", skipped}};
}

}  // namespace detail

inline ResultBundle run_lyapunov(const ExperimentConfig& c) {
  const auto flow = c.flow();
  const auto pts = sample_volume(flow, c.seed, c.lyapunov_orbits);
  const auto ex = parallel_map(pts.size(), c.workers,
                               [&](std::size_t i) { return lyapunov_qr(flow, pts[i], c.lyapunov_horizon); });
  ResultBundle b;
  b.kind = "lyapunov";
  CsvTable t({"orbit", "x1", "x2", "s", "exponent_1", "exponent_2", "method"});
  std::vector<double> e1, e2;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    t.row(i, pts[i].x(0), pts[i].x(1), pts[i].s, ex[i][0], ex[i][1], "tangent-QR");
    e1.push_back(ex[i][0]);
    e2.push_back(ex[i][1]);
  }
  const auto m1 = mean_stderr(e1), m2 = mean_stderr(e2);
  b.summary["horizon"] = c.lyapunov_horizon;
  b.summary["orbits"] = pts.size();
  b.summary["exponent_1"] = tagged(m1.mean, "tangent-QR/orbit-mean");
  b.summary["exponent_2"] = tagged(m2.mean, "tangent-QR/orbit-mean");
  b.summary["exponent_1_stderr"] = tagged(m1.std_error, "tangent-QR/orbit-mean");
  b.summary["exponent_2_stderr"] = tagged(m2.std_error, "tangent-QR/orbit-mean");
  b.tables.emplace("exponents", std::move(t));
  return b;
}

inline ResultBundle run_regularity(const ExperimentConfig& c) {
  const auto flow = c.flow();
  const auto u = c.observable();
  const double chi = u.mean(flow.roof);
  const auto pts = sample_volume(flow, c.seed, c.samples);
  ResultBundle b;
  b.kind = "regularity";
  CsvTable rec({"sample", "eps", "log_D", "T_eps", "truncated", "method"});
  CsvTable aud({"sample", "check", "eps", "lhs", "rhs", "status"});
  json per_eps = json::array();
  std::vector<double> eps = c.eps;
  std::sort(eps.begin(), eps.end());

  struct Audit {
    std::vector<InequalityCheck> down;
    InequalityCheck product;
    EnvelopeCheck envelope;
  };
  const auto audits = parallel_map(pts.size(), c.workers, [&](std::size_t i) {
    const auto path = observable_path(flow, u, pts[i], c.T_max);
    Audit a;
    for (std::size_t j = 0; j + 1 < eps.size(); ++j) a.down.push_back(check_down(path, chi, eps[j], eps[j + 1]));
    a.product = product_bound(path, chi, u.sup_norm(), eps.front(), 8);
    a.envelope = envelope_identity(path, chi, u.sup_norm(), eps.front(), 100);
    return a;
  });

  for (double e : eps) {
    const auto rs = detail::records(c, e, pts);
    for (std::size_t i = 0; i < rs.size(); ++i) rec.row(i, e, rs[i].log_D, rs[i].T_eps, rs[i].truncated ? 1 : 0, "exact-running-sup");
    const auto s = summarize(rs);
    per_eps.push_back({{"eps", e},
                       {"mean_log_D", tagged(s.mean_log_D, "exact-running-sup/mean")},
                       {"max_log_D", tagged(s.max_log_D, "exact-running-sup/max")},
                       {"mean_T_eps", tagged(s.mean_T_eps, "exact-running-sup/mean")},
                       {"truncated_fraction", tagged(s.truncated_fraction, "count")},
                       {"horizon_too_small", s.horizon_too_small}});
  }
  std::size_t pass[3] = {0, 0, 0}, fail[3] = {0, 0, 0}, skip[3] = {0, 0, 0};
  auto tally = [&](int k, AuditStatus st) {
    (st == AuditStatus::Pass ? pass : st == AuditStatus::Fail ? fail : skip)[k] += 1;
  };
  for (std::size_t i = 0; i < audits.size(); ++i) {
    const auto& a = audits[i];
    for (std::size_t j = 0; j < a.down.size(); ++j) {
      tally(0, a.down[j].status);
      aud.row(i, "down", eps[j], a.down[j].lhs, a.down[j].rhs, status_name(a.down[j].status));
    }
    tally(1, a.product.status);
    aud.row(i, "product-bound", eps.front(), a.product.lhs, a.product.rhs, status_name(a.product.status));
    tally(2, a.envelope.status);
    aud.row(i, "envelope-identity", eps.front(), a.envelope.log_D, a.envelope.quadrature, status_name(a.envelope.status));
  }
  b.summary["chi"] = tagged(chi, "closed-form-mean");
  b.summary["samples"] = pts.size();
  b.summary["T_max"] = c.T_max;
  b.summary["per_eps"] = per_eps;
  b.summary["audits"] = {{"down", detail::audit_json(pass[0], fail[0], skip[0])},
                         {"product_bound", detail::audit_json(pass[1], fail[1], skip[1])},
                         {"envelope_identity", detail::audit_json(pass[2], fail[2], skip[2])}};
  b.checks_passed = fail[0] + fail[1] + fail[2] == 0;
  b.tables.emplace("records", std::move(rec));
  b.tables.emplace("audits", std::move(aud));
  return b;
}

inline ResultBundle run_entropy(const ExperimentConfig& c) {
  const auto flow = c.flow();
  const auto u = c.observable();
  const auto curve = detail::pressure_curve(c);
  const auto prof = legendre(curve);
  ResultBundle b;
  b.kind = "entropy";
  CsvTable bt({"t", "beta", "beta_prime", "method"});
  for (std::size_t i = 0; i < prof.t().size(); ++i) bt.row(prof.t()[i], prof.beta()[i], prof.beta_prime()[i], curve.method);
  CsvTable ht({"a", "H", "rho", "method"});
  for (std::size_t i = 0; i < prof.a_grid().size(); ++i)
    ht.row(prof.a_grid()[i], prof.H_grid()[i], prof.rho(prof.a_grid()[i]), "legendre/" + curve.method);
  const std::string tag = "legendre/" + curve.method;
  b.summary["pressure_method"] = curve.method;
  b.summary["order_or_horizon"] = curve.order;
  b.summary["chi"] = tagged(prof.chi(), tag);
  b.summary["chi_closed_form"] = tagged(u.mean(flow.roof), "closed-form-mean");
  b.summary["sigma2"] = tagged(prof.sigma2(), tag);
  b.summary["gamma_lo"] = tagged(prof.gamma_lo(), tag);
  b.summary["gamma_hi"] = tagged(prof.gamma_hi(), tag);
  b.summary["H_at_chi"] = tagged(prof.H(prof.chi()), tag);
  b.summary["degenerate"] = prof.degenerate();
  if (!u.is_constant()) {
    const auto v = variance_sigma2(flow, u, std::max(100.0, c.T_max), c.samples, c.seed, c.workers);
    b.summary["sigma2_direct"] = tagged(v.sigma2, "increment-variance");
    b.summary["sigma2_direct_stderr"] = tagged(v.std_error, "increment-variance");
  }
  CsvTable pt({"eps", "H_chi_plus_eps", "p_star", "method"});
  for (double e : c.eps) {
    // H is infinite on the whole range when it lies beyond the sampled t window
    try {
      pt.row(e, prof.H(prof.chi() + e), integrability_threshold(prof, prof.chi(), u.sup_norm(), e), tag);
    } catch (const DegenerateProfile&) {
      pt.row(e, prof.H(prof.chi() + e), std::numeric_limits<double>::infinity(), "degenerate-profile");
    }
  }
  b.tables.emplace("beta", std::move(bt));
  b.tables.emplace("profile", std::move(ht));
  b.tables.emplace("thresholds", std::move(pt));
  return b;
}

inline ResultBundle run_lp_test(const ExperimentConfig& c) {
  const auto flow = c.flow();
  const auto u = c.observable();
  const double chi = u.mean(flow.roof);
  const double eps = c.eps.front();
  const auto curve = detail::pressure_curve(c);
  const auto prof = legendre(curve);
  const auto pts = sample_volume(flow, c.seed, c.samples);
  const auto rs = detail::records(c, eps, pts);
  const auto rep = lp_report(rs, prof, chi, u.sup_norm(), eps, c.hill_k, c.seed);
  ResultBundle b;
  b.kind = "lp-test";
  const std::string htag = "hill/bootstrap-200";
  b.summary["eps"] = eps;
  b.summary["chi"] = tagged(chi, "closed-form-mean");
  b.summary["samples"] = rep.samples;
  b.summary["untruncated_fraction"] = tagged(rep.untruncated_fraction, "count");
  b.summary["p_hat_D"] = tagged(rep.hill_D.p_hat, htag);
  b.summary["p_hat_D_ci"] = {format_double(rep.hill_D.ci_lo), format_double(rep.hill_D.ci_hi)};
  b.summary["p_hat_T"] = tagged(rep.hill_T.p_hat, htag);
  b.summary["p_hat_T_ci"] = {format_double(rep.hill_T.ci_lo), format_double(rep.hill_T.ci_hi)};
  b.summary["hill_k"] = rep.hill_T.k;
  b.summary["p_star"] = tagged(rep.p_star, rep.beyond_profile ? "degenerate-profile" : "threshold-integral/" + curve.method);
  b.summary["H_chi_plus_eps"] = tagged(rep.H, "legendre/" + curve.method);
  b.summary["pass_T"] = rep.pass_T;
  b.summary["pass_D"] = rep.pass_D;
  b.summary["margin"] = lp_margin;

  try {
    const auto tr = tail_rate_empirical(flow, u, chi + eps, c.tail_T, c.samples, c.seed + 7, c.workers);
    CsvTable tt({"T", "hits", "frequency", "ci_lo", "ci_hi", "method"});
    for (std::size_t i = 0; i < tr.T.size(); ++i)
      tt.row(tr.T[i], tr.hits[i], tr.frequency[i], tr.ci[i].lo, tr.ci[i].hi, "birkhoff-exceedance");
    b.summary["tail_slope"] = tagged(tr.slope, "least-squares/-log-frequency");
    b.summary["tail_slope_corrected"] = tagged(tr.slope_corrected, "least-squares/-log-frequency-sqrtT");
    b.summary["tail_dropped_zero_cells"] = tr.dropped_zero_cells;
    b.tables.emplace("tail_rate", std::move(tt));
  } catch (const AllZeroCounts& e) {
    b.summary["tail_slope"] = tagged(std::numeric_limits<double>::infinity(), "no-exceedances");
  }

  try {
    const auto tt = time_tail_rate(rs, eps, c.tail_T);
    CsvTable ts({"T", "count", "frequency", "ci_lo", "ci_hi", "method"});
    for (std::size_t i = 0; i < tt.T.size(); ++i)
      ts.row(tt.T[i], tt.hits[i], tt.frequency[i], tt.ci[i].lo, tt.ci[i].hi, "T_eps-survival");
    b.summary["T_eps_tail_slope"] = tagged(tt.slope, "least-squares/-log-survival");
    b.tables.emplace("T_eps_survival", std::move(ts));
  } catch (const AllZeroCounts&) {
    b.summary["T_eps_tail_slope"] = tagged(std::numeric_limits<double>::infinity(), "no-exceedances");
  }

  const auto lt = tail_decay(rs, eps, c.zeta, prof, chi);
  CsvTable lb({"n", "lo", "hi", "count", "mass", "bound", "insufficient"});
  for (const auto& bn : lt.bins) lb.row(bn.n, bn.lo, bn.hi, bn.count, bn.mass, bn.bound, bn.insufficient ? 1 : 0);
  b.summary["tail_decay"] = {{"zeta", c.zeta},
                         {"rate", tagged(lt.rate, "legendre/" + curve.method)},
                         {"monotone_decay", lt.monotone_decay},
                         {"decay_after_mode", lt.decay_after_mode},
                         {"fitted_exponent", tagged(lt.fitted_exponent, "least-squares/-log-bin-mass")}};

  std::vector<double> T;
  for (const auto& r : rs) T.push_back(r.T_eps);
  CsvTable hp({"k", "p_hat", "method"});
  for (const auto& h : hill_plot(T)) hp.row(h.k, h.p_hat, "hill/e^T");
  b.tables.emplace("tail_decay_bins", std::move(lb));
  b.tables.emplace("hill_plot", std::move(hp));
  b.checks_passed = rep.pass_T;
  return b;
}

inline ResultBundle run_perron_demo(const ExperimentConfig& c) {
  const int k = c.perron_dim;
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(c.perron_horizon * i / 100.0);
  struct Row {
    double orth, lower, offdiag_ratio, gron_lhs, gron_rhs;
    bool gron_pass;
  };
  const auto rows = parallel_map(c.perron_systems, c.workers, [&](std::size_t i) {
    const auto sys = random_smooth_system(k, c.seed, i);
    auto g = stream(c.seed, i, 0x6261736973ULL);
    Mat basis(k, k);
    for (int a = 0; a < k; ++a)
      for (int bb = 0; bb < k; ++bb) basis(a, bb) = uniform01(g) - 0.5 + (a == bb ? 1.0 : 0.0);
    const auto tr = triangularize(sys, basis, grid);
    double off = 0.0, beta = 0.0;
    for (const auto& B : tr.B)
      for (int a = 0; a < k; ++a)
        for (int bb = a + 1; bb < k; ++bb) {
          off = std::max(off, std::abs(B(a, bb)) / (2.0 * tr.alpha));
          beta = std::max(beta, std::abs(B(a, bb)));
        }
    const DeltaNorm dn(k, beta, c.delta);
    const auto gc = gronwall_certificate(tr, dn, c.perron_horizon);
    return Row{tr.max_orthogonality_error, tr.max_lower_entry, off, gc.log_lhs, gc.log_rhs, gc.pass};
  });
  ResultBundle b;
  b.kind = "perron-demo";
  CsvTable t({"system", "orthogonality_error", "max_lower_entry", "offdiag_over_2alpha", "log_Z_delta",
              "log_gronwall_bound", "gronwall_pass"});
  std::size_t fails = 0;
  double orth = 0.0, lower = 0.0, ratio = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    t.row(i, r.orth, r.lower, r.offdiag_ratio, r.gron_lhs, r.gron_rhs, r.gron_pass ? 1 : 0);
    orth = std::max(orth, r.orth);
    lower = std::max(lower, r.lower);
    ratio = std::max(ratio, r.offdiag_ratio);
    const bool ok = r.orth <= 1e-8 && r.lower <= 1e-8 && r.offdiag_ratio <= 1.0 + 1e-6 && r.gron_pass;
    fails += ok ? 0 : 1;
  }
  b.summary["dim"] = k;
  b.summary["systems"] = rows.size();
  b.summary["horizon"] = c.perron_horizon;
  b.summary["max_orthogonality_error"] = tagged(orth, "rk4-frame-flow");
  b.summary["max_lower_entry"] = tagged(lower, "rk4-frame-flow");
  b.summary["max_offdiag_over_2alpha"] = tagged(ratio, "rk4-frame-flow");
  b.summary["violations"] = fails;
  b.checks_passed = fails == 0;
  b.tables.emplace("systems", std::move(t));
  return b;
}

inline ResultBundle run_certify_b(const ExperimentConfig& c) {
  const auto flow = c.flow();
  const Bundle bundle = c.bundle == "stable" ? Bundle::Stable : Bundle::Unstable;
  const auto pts = sample_volume(flow, c.seed, c.samples);
  const auto rep = growth_certificate(flow, bundle, c.delta, pts, c.T_grid, c.workers);
  const double horizon = *std::max_element(c.T_grid.begin(), c.T_grid.end());
  const std::size_t audited = std::min<std::size_t>(pts.size(), 100);
  const auto gron = parallel_map(audited, c.workers, [&](std::size_t i) {
    const auto sys = bundle_system(flow, pts[i], horizon, bundle);
    const double grid[] = {0.0, horizon};
    const auto tr = triangularize(sys, Mat::Identity(1, 1), grid);
    return gronwall_certificate(tr, DeltaNorm(1, 0.0, c.delta), tr.t.back());
  });
  ResultBundle b;
  b.kind = "certify-b";
  CsvTable t({"T", "C_hat", "C_hat_euclidean", "method"});
  for (std::size_t i = 0; i < rep.T_grid.size(); ++i)
    t.row(rep.T_grid[i], rep.C_hat[i], rep.C_hat_euclid[i], "running-max/adapted-metric");
  std::size_t gfail = 0;
  for (const auto& g : gron) gfail += g.pass ? 0 : 1;
  b.summary["bundle"] = c.bundle;
  b.summary["delta"] = c.delta;
  b.summary["samples"] = rep.samples;
  b.summary["C_hat_final"] = tagged(rep.C_hat_final(), "running-max/adapted-metric");
  b.summary["C_hat_euclidean_final"] = tagged(rep.C_hat_euclid.back(), "running-max/euclidean");
  b.summary["mean_u"] = tagged(rep.mean_u, "sample-mean/|bundle-rate|");
  b.summary["mean_u_stderr"] = tagged(rep.mean_u_stderr, "sample-mean/|bundle-rate|");
  b.summary["mean_growth"] = tagged(rep.mean_growth, "sample-mean/log-growth");
  b.summary["qr_exponent"] = tagged(rep.qr_exponent, "tangent-QR");
  b.summary["gronwall_audited"] = audited;
  b.summary["gronwall_failures"] = gfail;
  b.checks_passed = gfail == 0;
  b.tables.emplace("constants", std::move(t));
  return b;
}

inline GridFunction grid_from(const ExperimentConfig& c) {
  if (c.grid_source == "step") {
    const int n = c.grid_n;
    std::vector<double> v(static_cast<std::size_t>(n) * n);
    for (int r = 0; r < n; ++r)
      for (int col = 0; col < n; ++col) v[r * n + col] = 2 * col < n ? 0.5 : -0.5;
    return GridFunction(n, std::move(v));
  }
  if (c.grid_source == "observable") return GridFunction::sample(c.observable(), c.grid_n);
  try {
    return GridFunction::load_csv(c.grid_source);
  } catch (const std::exception& e) {
    throw ConfigError("run.grid_source", e.what());
  }
}

inline ResultBundle run_smooth_majorant(const ExperimentConfig& c) {
  const auto flow = c.flow();
  const auto g = grid_from(c);
  const auto m = smooth_majorant(g, c.delta);
  const double eps = c.eps.front();
  if (!(eps > c.delta)) throw ConfigError("run.eps", "the reduction check needs eps > delta");
  const auto pts = sample_volume(flow, c.seed, c.samples);
  const auto rep = smoothing_reduction_check(flow, g, m.u_tilde, c.delta, eps, pts, c.T_max, c.workers);
  ResultBundle b;
  b.kind = "smooth-majorant";
  CsvTable coef({"k1", "k2", "amplitude", "phase"});
  coef.row(0, 0, m.u_tilde.constant_term(), 0.0);
  for (const auto& t : m.u_tilde.terms()) coef.row(t.k1, t.k2, t.amplitude, t.phase);
  b.summary["grid_n"] = g.n();
  b.summary["delta"] = c.delta;
  b.summary["dilation_cells"] = m.dilation_cells;
  b.summary["kernel_order"] = m.kernel_order;
  b.summary["margin"] = tagged(m.margin, "jackson-tail-bound");
  b.summary["tail_mass"] = tagged(m.tail_mass, "jackson-exact-coefficients");
  b.summary["gap"] = tagged(m.gap, "grid-quadrature/2x");
  b.summary["min_excess"] = tagged(m.min_excess, "grid-min/2x");
  b.summary["reduction"] = {{"eps", eps},
                        {"chi", tagged(rep.chi, "cell-mean")},
                        {"chi_tilde", tagged(rep.chi_tilde, "closed-form-mean")},
                        {"audit", detail::audit_json(rep.pass, rep.fail, rep.skipped)},
                        {"worst_margin", tagged(rep.worst_margin, "exact-running-sup")}};
  b.checks_passed = rep.fail == 0 && m.min_excess >= 0.0 && m.gap < c.delta;
  b.tables.emplace("majorant_coefficients", std::move(coef));
  return b;
}

/// Index of the result bundles already present under the output directory.
inline ResultBundle run_report(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  std::vector<fs::path> found;
  if (fs::is_directory(c.out_dir))
    for (const auto& e : fs::directory_iterator(c.out_dir))
      if (e.is_directory() && e.path().filename() != "report" && fs::exists(e.path() / "summary.json"))
        found.push_back(e.path());
  if (found.empty()) throw NoData("no result bundles under " + c.out_dir);
  std::sort(found.begin(), found.end());
  ResultBundle b;
  b.kind = "report";
  CsvTable t({"kind", "config_hash", "seed", "checks_passed"});
  json kinds = json::array();
  for (const auto& p : found) {
    std::ifstream in(p / "summary.json");
    const auto doc = json::parse(in);
    t.row(doc.at("kind").get<std::string>(), doc.at("provenance").at("config_hash").get<std::string>(),
          doc.at("provenance").at("seed").get<std::uint64_t>(), doc.at("checks_passed").get<bool>() ? 1 : 0);
    kinds.push_back(doc.at("kind"));
    b.checks_passed = b.checks_passed && doc.at("checks_passed").get<bool>();
  }
  b.summary["bundles"] = kinds;
  b.tables.emplace("index", std::move(t));
  return b;
}

inline ResultBundle run(const ExperimentConfig& c) {
  if (c.kind == "lyapunov") return run_lyapunov(c);
  if (c.kind == "regularity") return run_regularity(c);
  if (c.kind == "entropy") return run_entropy(c);
  if (c.kind == "lp-test") return run_lp_test(c);
  if (c.kind == "perron-demo") return run_perron_demo(c);
  if (c.kind == "certify-b") return run_certify_b(c);
  if (c.kind == "smooth-majorant") return run_smooth_majorant(c);
  if (c.kind == "report") return run_report(c);
  throw ConfigError("experiment.kind", "unknown experiment kind '" + c.kind + "'");
}

}  // namespace oslab::lab
