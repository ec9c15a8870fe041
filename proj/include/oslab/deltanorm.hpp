#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "oslab/cocycle.hpp"
#include "oslab/core/errors.hpp"
#include "oslab/core/linalg.hpp"
#include "oslab/core/parallel.hpp"
#include "oslab/core/stats.hpp"
#include "oslab/dynamics.hpp"
#include "oslab/perron.hpp"

namespace oslab {

/// |v|_delta = |D^{-1} v|_inf with D = diag(1, e, ..., e^{k-1}),
/// e = min(1, delta / ((k-1) beta)).
class DeltaNorm {
 public:
  DeltaNorm(int k, double beta, double delta) : k_(k), beta_(beta), delta_(delta) {
    if (k < 1) throw std::invalid_argument("DeltaNorm: k must be >= 1");
    if (!(delta > 0.0)) throw std::invalid_argument("DeltaNorm: delta must be positive");
    if (!(beta >= 0.0)) throw std::invalid_argument("DeltaNorm: beta must be non-negative");
    eps_ = (k == 1 || beta == 0.0) ? 1.0 : std::min(1.0, delta / ((k - 1) * beta));
    d_.resize(k);
    double e = 1.0;
    for (int i = 0; i < k; ++i, e *= eps_) d_(i) = e;
  }

  int k() const { return k_; }
  double beta() const { return beta_; }
  double delta() const { return delta_; }
  double eps_scale() const { return eps_; }
  const Vec& scaling() const { return d_; }

  double vector_norm(const Vec& v) const {
    if (v.size() != k_) throw ShapeError("vector has wrong dimension");
    return v.cwiseQuotient(d_).cwiseAbs().maxCoeff();
  }

  /// |D^{-1} M D|_inf for any square M of the right size.
  double induced_norm(const Mat& m) const {
    if (m.rows() != k_ || m.cols() != k_) throw ShapeError("matrix has wrong shape");
    double best = 0.0;
    for (int i = 0; i < k_; ++i) {
      double row = 0.0;
      for (int j = 0; j < k_; ++j) row += std::abs(m(i, j)) * d_(j) / d_(i);
      best = std::max(best, row);
    }
    return best;
  }

  /// Operator norm of an upper-triangular B whose off-diagonal part lies in the beta box.
  double op_norm(const Mat& b) const {
    if (b.rows() != k_ || b.cols() != k_) throw ShapeError("matrix has wrong shape");
    for (int i = 0; i < k_; ++i)
      for (int j = 0; j < k_; ++j) {
        if (i > j && b(i, j) != 0.0) throw ShapeError("matrix is not upper triangular");
        if (i < j && std::abs(b(i, j)) > beta_) throw BoundError("off-diagonal entry exceeds beta");
      }
    // row i of D^{-1} B D is |b_ii| + sum_{j>i} |b_ij| e^{j-i}
    double best = 0.0;
    for (int i = 0; i < k_; ++i) {
      double row = std::abs(b(i, i));
      double e = 1.0;
      for (int j = i + 1; j < k_; ++j) {
        e *= eps_;
        row += std::abs(b(i, j)) * e;
      }
      best = std::max(best, row);
    }
    return best;
  }

  /// |v|_inf <= K |v|_delta with K = 1.
  double lower_constant() const { return 1.0; }
  /// |v|_delta <= e^{1-k} |v|_inf.
  double upper_constant() const { return std::pow(eps_, 1 - k_); }

 private:
  int k_;
  double beta_, delta_, eps_;
  Vec d_;
};

inline double vector_norm_delta(const DeltaNorm& dn, const Vec& v) { return dn.vector_norm(v); }
inline double op_norm_delta(const DeltaNorm& dn, const Mat& b) { return dn.op_norm(b); }

struct GronwallCheck {
  double lhs = 0.0;  ///< |Z(T)|_delta
  double rhs = 0.0;  ///< exp(delta T) exp(int_0^T r(B))
  double log_lhs = 0.0;
  double log_rhs = 0.0;
  bool pass = false;
};

/// Growth certificate |Z(T)|_delta <= e^{delta T} exp(int_0^T r(B)), compared
/// in log form.
inline GronwallCheck gronwall_certificate(const TriangularTrajectory& tr, const DeltaNorm& dn, double horizon) {
  const std::size_t j = node_index(tr, horizon);
  GronwallCheck g;
  if (tr.k == 1) {
    g.log_lhs = tr.diag_integral[j](0);
  } else {
    if (tr.Z.empty()) throw std::invalid_argument("trajectory has no fundamental solution (impulsive, k > 1)");
    g.log_lhs = std::log(dn.induced_norm(tr.Z[j]));
  }
  g.log_rhs = dn.delta() * horizon + tr.r_integral[j];
  g.lhs = std::exp(g.log_lhs);
  g.rhs = std::exp(g.log_rhs);
  g.pass = g.log_lhs <= g.log_rhs + std::log1p(1e-6);
  return g;
}

struct GrowthCertificate {
  double delta = 0.0;
  std::vector<double> T_grid;
  std::vector<double> C_hat;         ///< per T: max_{t <= T} |T^E f_t| / (e^{delta t} exp int u), adapted metric
  std::vector<double> C_hat_euclid;  ///< same ratio with the Euclidean norm of the base vector
  std::vector<double> u_values;      ///< u(p) = r(B_p(0)) per sample
  double mean_u = 0.0;
  double mean_u_stderr = 0.0;
  double mean_growth = 0.0;  ///< average of (1/T_max) log |T^E f_T| over samples
  double qr_exponent = 0.0;  ///< bundle exponent from tangent QR at a reference orbit
  std::size_t samples = 0;

  double C_hat_final() const { return C_hat.empty() ? 1.0 : C_hat.back(); }
};

/// Empirical constant in |T^E f_t| <= C e^{delta t} exp(int_0^t u(f_s p) ds).
inline GrowthCertificate growth_certificate(const SuspensionFlow& flow, Bundle bundle, double delta,
                                           std::span<const FlowPoint> points, std::vector<double> T_grid,
                                           unsigned workers = 1, int n_iter = 60, double qr_horizon = 1e4) {
  if (!(delta > 0.0)) throw std::invalid_argument("growth_certificate: delta must be positive");
  if (T_grid.empty()) throw std::invalid_argument("growth_certificate: empty T grid");
  std::sort(T_grid.begin(), T_grid.end());
  const double t_max = T_grid.back();
  const std::size_t nT = T_grid.size();

  struct PerSample {
    std::vector<double> adapted, euclid;
    double u0 = 0.0, growth = 0.0;
  };
  const auto per = parallel_map(points.size(), workers, [&](std::size_t i) {
    PerSample out;
    out.adapted.assign(nT, 0.0);
    out.euclid.assign(nT, 0.0);
    const auto steps = bundle_steps(flow, points[i], t_max, bundle, n_iter);
    out.u0 = std::abs(steps.front().density());
    double t = 0.0, L = 0.0, U = 0.0, E = 0.0;
    double best_a = 0.0, best_e = 0.0;  // t = 0 contributes log 1
    std::size_t g = 0;
    auto flush_until = [&](double t_end, double a_rate, double u_rate) {
      // record grid points inside the current piece, values interpolated
      while (g < nT && T_grid[g] <= t_end) {
        const double dt = T_grid[g] - t;
        const double at = L + a_rate * dt - delta * T_grid[g] - (U + u_rate * dt);
        out.adapted[g] = std::max(best_a, at);
        out.euclid[g] = best_e;
        ++g;
      }
    };
    for (const auto& st : steps) {
      if (st.duration <= 0.0) continue;
      const double a = st.density();
      flush_until(t + st.duration, a, std::abs(a));
      t += st.duration;
      L += a * st.duration;
      U += std::abs(a) * st.duration;
      best_a = std::max(best_a, L - delta * t - U);
      if (st.crosses) {
        E += st.log_growth;
        best_e = std::max(best_e, E - delta * t - U);
        // grid points sitting exactly at this crossing see the jump
        for (std::size_t h = 0; h < g; ++h)
          if (T_grid[h] == t) out.euclid[h] = best_e;
      }
    }
    flush_until(std::numeric_limits<double>::infinity(), 0.0, 0.0);
    out.growth = L / t_max;
    return out;
  });

  GrowthCertificate rep;
  rep.delta = delta;
  rep.T_grid = T_grid;
  rep.samples = points.size();
  rep.C_hat.assign(nT, 1.0);
  rep.C_hat_euclid.assign(nT, 1.0);
  std::vector<double> growth(points.size());
  for (std::size_t i = 0; i < per.size(); ++i) {
    for (std::size_t g = 0; g < nT; ++g) {
      rep.C_hat[g] = std::max(rep.C_hat[g], std::exp(per[i].adapted[g]));
      rep.C_hat_euclid[g] = std::max(rep.C_hat_euclid[g], std::exp(per[i].euclid[g]));
    }
    rep.u_values.push_back(per[i].u0);
    growth[i] = per[i].growth;
  }
  const auto mu = mean_stderr(rep.u_values);
  rep.mean_u = mu.mean;
  rep.mean_u_stderr = mu.std_error;
  rep.mean_growth = mean_stderr(growth).mean;
  if (qr_horizon > 0.0) {
    const FlowPoint ref{Vec2(0.1234567, 0.7654321), 0.0};
    const auto ex = lyapunov_qr(flow, ref, qr_horizon);
    rep.qr_exponent = bundle == Bundle::Unstable ? ex.front() : ex.back();
  }
  return rep;
}

}  // namespace oslab
