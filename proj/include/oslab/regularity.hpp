#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "oslab/core/parallel.hpp"
#include "oslab/dynamics.hpp"
#include "oslab/path.hpp"

namespace oslab {

struct RegularityRecord {
  FlowPoint point;
  double epsilon = 0.0;
  double horizon = 0.0;
  double log_D = 0.0;
  double T_eps = 0.0;
  bool truncated = false;
};

struct RunningSup {
  double log_D = 0.0;
  double T_eps = 0.0;
  bool truncated = false;
};

inline constexpr double argmax_tie_tolerance = 1e-12;
inline constexpr double truncation_tolerance = 1e-6;

namespace detail {

// +/- sign changes of h(tau) = value - drift on one harmonic piece; appends
// (time, g) of each local maximum found.
inline void interior_maxima(const IntegrandPath& path, std::size_t i, double drift, double t0, double g0,
                            std::vector<std::pair<double, double>>& cand) {
  const double d = path.duration(i);
  double wmax = 0.0;
  for (const auto& h : path.harmonics(i)) wmax = std::max(wmax, std::abs(h.omega));
  const int n = std::max(8, static_cast<int>(std::ceil(d * wmax / (3.141592653589793 / 8))));
  auto h = [&](double tau) { return path.value(i, tau) - drift; };
  double a = 0.0, ha = h(0.0);
  for (int m = 1; m <= n; ++m) {
    const double b = d * m / n;
    const double hb = h(b);
    if (ha > 0.0 && hb <= 0.0) {
      double lo = a, hi = b;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (h(mid) > 0.0 ? lo : hi) = mid;
      }
      const double tau = 0.5 * (lo + hi);
      if (tau < d) cand.emplace_back(t0 + tau, g0 + path.integral(i, tau) - drift * tau);
    }
    a = b;
    ha = hb;
  }
}

}  // namespace detail

/// sup over t in [0, horizon] of g(t) = int_0^t (integrand - drift), the
/// smallest maximizer, and whether g is still near its max at the horizon.
inline RunningSup running_sup(const IntegrandPath& path, double drift) {
  std::vector<std::pair<double, double>> cand;
  cand.reserve(path.size() + 1);
  cand.emplace_back(0.0, 0.0);
  double t = 0.0, g = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double d = path.duration(i);
    if (d <= 0.0) continue;
    if (!path.constant_piece(i) && path.upper(i) > drift && path.lower(i) < drift)
      detail::interior_maxima(path, i, drift, t, g, cand);
    g += path.constant_piece(i) ? (path.level(i) - drift) * d : path.integral(i, d) - drift * d;
    t += d;
    cand.emplace_back(t, g);
  }
  double best = 0.0;
  for (const auto& c : cand) best = std::max(best, c.second);
  RunningSup out;
  out.log_D = best;
  for (const auto& c : cand)
    if (c.second >= best - argmax_tie_tolerance) {
      out.T_eps = c.first;
      break;
    }
  out.truncated = g >= best - truncation_tolerance;
  return out;
}

/// D_eps along an explicit integrand path with mean chi.
inline RegularityRecord regularity_D(const IntegrandPath& path, double chi, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("regularity_D: eps must be positive");
  const auto r = running_sup(path, chi + eps);
  RegularityRecord rec;
  rec.epsilon = eps;
  rec.horizon = path.horizon();
  rec.log_D = r.log_D;
  rec.T_eps = r.T_eps;
  rec.truncated = r.truncated;
  return rec;
}

inline RegularityRecord regularity_D(const SuspensionFlow& flow, const Observable& u, const FlowPoint& p,
                                     double eps, double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("regularity_D: horizon must be positive");
  auto rec = regularity_D(observable_path(flow, u, p, horizon), u.mean(flow.roof), eps);
  rec.point = p;
  return rec;
}

/// R_eps for a one-dimensional bundle with exponent chi.
inline RegularityRecord regularity_R(const SuspensionFlow& flow, Bundle bundle, const FlowPoint& p, double eps,
                                     double horizon, double chi, int n_iter = 60) {
  const auto steps = bundle_steps(flow, p, horizon, bundle, n_iter);
  auto rec = regularity_D(bundle_rate_path(steps, false), chi, eps);
  rec.point = p;
  rec.horizon = horizon;
  return rec;
}

enum class AuditStatus { Pass, Fail, SkippedTruncated };

inline const char* status_name(AuditStatus s) {
  switch (s) {
    case AuditStatus::Pass: return "pass";
    case AuditStatus::Fail: return "fail";
    default: return "skipped-truncated";
  }
}

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  AuditStatus status = AuditStatus::Pass;
  bool pass() const { return status == AuditStatus::Pass; }
  bool fail() const { return status == AuditStatus::Fail; }
};

inline constexpr double audit_slack = 1e-9;

inline InequalityCheck make_check(double lhs, double rhs, bool truncated) {
  InequalityCheck c{lhs, rhs, AuditStatus::Pass};
  if (truncated)
    c.status = AuditStatus::SkippedTruncated;
  else if (!(lhs <= rhs + audit_slack))
    c.status = AuditStatus::Fail;
  return c;
}

/// log D_eta <= log D_eps + (eps - eta) T_eta for eta < eps.
inline InequalityCheck check_down(const IntegrandPath& path, double chi, double eta, double eps) {
  if (!(0.0 < eta && eta <= eps)) throw std::invalid_argument("check_down needs 0 < eta <= eps");
  const auto lo = regularity_D(path, chi, eta);
  const auto hi = regularity_D(path, chi, eps);
  return make_check(lo.log_D, hi.log_D + (eps - eta) * lo.T_eps, lo.truncated || hi.truncated);
}

inline InequalityCheck check_down(const SuspensionFlow& flow, const Observable& u, const FlowPoint& p, double eta,
                                  double eps, double horizon) {
  return check_down(observable_path(flow, u, p, horizon), u.mean(flow.roof), eta, eps);
}

/// log D_eps <= gap * sum_{i<N} T_{eps_i} on the uniform partition of
/// [eps, sup - chi] into N gaps.
inline InequalityCheck product_bound(const IntegrandPath& path, double chi, double u_sup, double eps, int n) {
  if (n < 1) throw std::invalid_argument("product_bound needs N >= 1");
  const double top = u_sup - chi;
  const auto base = regularity_D(path, chi, eps);
  if (eps >= top) return make_check(base.log_D, 0.0, base.truncated);
  const double gap = (top - eps) / n;
  double sum = 0.0;
  bool trunc = base.truncated;
  for (int i = 0; i < n; ++i) {
    const auto r = i == 0 ? base : regularity_D(path, chi, eps + i * gap);
    sum += r.T_eps;
    trunc = trunc || r.truncated;
  }
  return make_check(base.log_D, gap * sum, trunc);
}

inline InequalityCheck product_bound(const SuspensionFlow& flow, const Observable& u, const FlowPoint& p, double eps,
                                     int n, double horizon) {
  return product_bound(observable_path(flow, u, p, horizon), u.mean(flow.roof), u.sup_norm(), eps, n);
}

struct EnvelopeCheck {
  double log_D = 0.0;
  double quadrature = 0.0;  ///< trapezoid rule for int T_eta d eta
  double left_sum = 0.0;    ///< upper envelope (T_eta is non-increasing)
  double right_sum = 0.0;   ///< lower envelope
  double deviation = 0.0;
  bool inside_envelope = false;
  AuditStatus status = AuditStatus::Pass;
};

/// Compares log D_eps with int_eps^{sup - chi} T_eta d eta on n_nodes nodes.
inline EnvelopeCheck envelope_identity(const IntegrandPath& path, double chi, double u_sup, double eps,
                                   int n_nodes) {
  if (n_nodes < 2) throw std::invalid_argument("envelope_identity needs at least 2 nodes");
  EnvelopeCheck c;
  const auto base = regularity_D(path, chi, eps);
  c.log_D = base.log_D;
  const double top = u_sup - chi;
  if (eps >= top) {
    c.inside_envelope = c.log_D == 0.0;
    c.status = base.truncated ? AuditStatus::SkippedTruncated
                              : (c.inside_envelope ? AuditStatus::Pass : AuditStatus::Fail);
    return c;
  }
  const double h = (top - eps) / (n_nodes - 1);
  std::vector<double> T(n_nodes);
  bool trunc = base.truncated;
  for (int i = 0; i < n_nodes; ++i) {
    const double eta = i == n_nodes - 1 ? top : eps + i * h;
    const auto r = i == 0 ? base : regularity_D(path, chi, eta);
    T[i] = r.T_eps;
    trunc = trunc || r.truncated;
  }
  for (int i = 0; i + 1 < n_nodes; ++i) {
    c.left_sum += h * T[i];
    c.right_sum += h * T[i + 1];
  }
  c.quadrature = 0.5 * (c.left_sum + c.right_sum);
  c.deviation = std::abs(c.log_D - c.quadrature);
  c.inside_envelope = c.right_sum - audit_slack <= c.log_D && c.log_D <= c.left_sum + audit_slack;
  c.status = trunc ? AuditStatus::SkippedTruncated
                   : (c.inside_envelope ? AuditStatus::Pass : AuditStatus::Fail);
  return c;
}

inline EnvelopeCheck envelope_identity(const SuspensionFlow& flow, const Observable& u, const FlowPoint& p, double eps,
                                   int n_nodes, double horizon) {
  return envelope_identity(observable_path(flow, u, p, horizon), u.mean(flow.roof), u.sup_norm(), eps, n_nodes);
}

/// R_eps <= C_delta D_{eps - delta}, with D built from u = |bundle rate|.
/// Both sides in log form: lhs = log R_eps, rhs = log C_delta + log D.
inline InequalityCheck regularity_chain(const SuspensionFlow& flow, Bundle bundle, const FlowPoint& p, double eps,
                                      double delta, double log_C_delta, double chi, double horizon,
                                      int n_iter = 60) {
  if (!(0.0 < delta && delta < eps)) throw std::invalid_argument("regularity_chain needs 0 < delta < eps");
  const auto steps = bundle_steps(flow, p, horizon, bundle, n_iter);
  const auto R = regularity_D(bundle_rate_path(steps, false), chi, eps);
  const auto D = regularity_D(bundle_rate_path(steps, true), chi, eps - delta);
  return make_check(R.log_D, log_C_delta + D.log_D, R.truncated || D.truncated);
}

struct RecordSummary {
  std::size_t count = 0;
  std::size_t truncated = 0;
  double truncated_fraction = 0.0;
  bool horizon_too_small = false;  ///< more than 1% truncated
  double mean_log_D = 0.0;
  double max_log_D = 0.0;
  double mean_T_eps = 0.0;
};

inline RecordSummary summarize(std::span<const RegularityRecord> recs) {
  RecordSummary s;
  s.count = recs.size();
  std::vector<double> ld, te;
  for (const auto& r : recs) {
    s.truncated += r.truncated ? 1 : 0;
    ld.push_back(r.log_D);
    te.push_back(r.T_eps);
    s.max_log_D = std::max(s.max_log_D, r.log_D);
  }
  if (s.count) {
    s.truncated_fraction = static_cast<double>(s.truncated) / static_cast<double>(s.count);
    s.mean_log_D = pairwise_sum(ld) / static_cast<double>(s.count);
    s.mean_T_eps = pairwise_sum(te) / static_cast<double>(s.count);
  }
  s.horizon_too_small = s.truncated_fraction > 0.01;
  return s;
}

}  // namespace oslab
