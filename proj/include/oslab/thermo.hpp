#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oslab/core/errors.hpp"
#include "oslab/core/parallel.hpp"
#include "oslab/core/rng.hpp"
#include "oslab/core/stats.hpp"
#include "oslab/dynamics.hpp"
#include "oslab/regularity.hpp"

namespace oslab {

using Mat2l = Eigen::Matrix<std::int64_t, 2, 2>;

/// Points of period n of the toral automorphism, as exact fractions num / den.
struct PeriodicPoints {
  std::int64_t denominator = 1;
  std::vector<std::array<std::int64_t, 2>> numerators;

  std::size_t size() const { return numerators.size(); }
  Vec2 point(std::size_t i) const {
    return {static_cast<double>(numerators[i][0]) / static_cast<double>(denominator),
            static_cast<double>(numerators[i][1]) / static_cast<double>(denominator)};
  }
};

namespace detail {

inline std::int64_t mod_pos(std::int64_t a, std::int64_t m) {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

inline Mat2l matrix_power(const Mat2i& a, int n) {
  Mat2l r = Mat2l::Identity();
  const Mat2l b = a.cast<std::int64_t>();
  for (int i = 0; i < n; ++i) r = r * b;
  return r;
}

}  // namespace detail

/// All x in the torus with A^n x = x. The lattice M Z^2, M = A^n - I, is put in
/// triangular form by column reduction; its coset representatives pulled back
/// by M^{-1} are the periodic points.
inline PeriodicPoints fixed_points_exact(const Mat2i& a, int n) {
  if (n < 1) throw std::invalid_argument("period must be >= 1");
  const Mat2l m = detail::matrix_power(a, n) - Mat2l::Identity();
  const std::int64_t det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (det == 0) throw DegeneratePeriod("A^n - I is singular for n = " + std::to_string(n));
  const std::int64_t D = det < 0 ? -det : det;

  std::array<std::int64_t, 2> c1{m(0, 0), m(1, 0)}, c2{m(0, 1), m(1, 1)};
  while (c2[1] != 0) {
    const std::int64_t q = c1[1] / c2[1];
    c1[0] -= q * c2[0];
    c1[1] -= q * c2[1];
    std::swap(c1, c2);
  }
  // lattice basis (c2x, 0), (c1x, c1y)
  const std::int64_t w = c2[0] < 0 ? -c2[0] : c2[0];
  const std::int64_t h = c1[1] < 0 ? -c1[1] : c1[1];
  if (w * h != D) throw DegeneratePeriod("lattice reduction failed");

  PeriodicPoints out;
  out.denominator = D;
  out.numerators.reserve(static_cast<std::size_t>(D));
  const std::int64_t sgn = det < 0 ? -1 : 1;
  for (std::int64_t z1 = 0; z1 < w; ++z1)
    for (std::int64_t z2 = 0; z2 < h; ++z2) {
      // x = adj(M) z / det
      const std::int64_t n1 = sgn * (m(1, 1) * z1 - m(0, 1) * z2);
      const std::int64_t n2 = sgn * (-m(1, 0) * z1 + m(0, 0) * z2);
      out.numerators.push_back({detail::mod_pos(n1, D), detail::mod_pos(n2, D)});
    }
  std::sort(out.numerators.begin(), out.numerators.end());
  return out;
}

inline std::vector<Vec2> fixed_points(const Mat2i& a, int n) {
  const auto pp = fixed_points_exact(a, n);
  std::vector<Vec2> v(pp.size());
  for (std::size_t i = 0; i < pp.size(); ++i) v[i] = pp.point(i);
  return v;
}

using BaseFunction = std::function<double(const Vec2&)>;

/// Birkhoff sums S_n g over every period-n point, in exact arithmetic for the orbit.
inline std::vector<double> periodic_sums(const Mat2i& a, int n, const BaseFunction& g,
                                         const PeriodicPoints* pts = nullptr) {
  std::optional<PeriodicPoints> own;
  if (!pts) pts = &own.emplace(fixed_points_exact(a, n));
  const std::int64_t D = pts->denominator;
  std::vector<double> out(pts->size());
  for (std::size_t i = 0; i < pts->size(); ++i) {
    std::int64_t x = pts->numerators[i][0], y = pts->numerators[i][1];
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      s += g(Vec2(static_cast<double>(x) / static_cast<double>(D), static_cast<double>(y) / static_cast<double>(D)));
      const std::int64_t nx = detail::mod_pos(a(0, 0) * x + a(0, 1) * y, D);
      const std::int64_t ny = detail::mod_pos(a(1, 0) * x + a(1, 1) * y, D);
      x = nx;
      y = ny;
    }
    out[i] = s;
  }
  return out;
}

struct PressureSeries {
  std::vector<double> by_order;  ///< P_n for n = 1..n_max
  double value = 0.0;            ///< P_{n_max}
  double error = 0.0;            ///< |P_{n_max} - P_{n_max - 1}|
};

/// (1/n) log sum_{Fix A^n} exp(S_n g), reported for n = 1..n_max.
inline PressureSeries pressure_po(const BaseFunction& g, const Mat2i& a, int n_max) {
  if (n_max < 1 || n_max > 14) throw std::invalid_argument("pressure_po: n_max must be in 1..14");
  PressureSeries ps;
  for (int n = 1; n <= n_max; ++n) {
    const auto s = periodic_sums(a, n, g);
    ps.by_order.push_back(log_sum_exp(s) / n);
  }
  ps.value = ps.by_order.back();
  ps.error = n_max > 1 ? std::abs(ps.by_order[n_max - 1] - ps.by_order[n_max - 2]) : 0.0;
  return ps;
}

/// Fiber integral of an observable over one roof segment, as a base function.
inline BaseFunction fiber_integral(const Observable& phi, const RoofFunction& roof) {
  return [phi, roof](const Vec2& x) { return phi.base_value(x) * roof(x); };
}

/// Orbit data for pressures of the form P_map(t phi_hat - s r_hat).
class PeriodicOrbitSums {
 public:
  PeriodicOrbitSums(const SuspensionFlow& flow, const Observable& phi, int n) : n_(n) {
    if (flow.base.kappa() != 0.0)
      throw std::invalid_argument("periodic orbits are only enumerable for the unperturbed base (kappa = 0)");
    const auto pts = fixed_points_exact(flow.base.matrix(), n);
    count_ = pts.size();
    phi_ = periodic_sums(flow.base.matrix(), n, fiber_integral(phi, flow.roof), &pts);
    const RoofFunction roof = flow.roof;
    if (roof.constant())
      roof_const_ = roof.r0();
    else
      roof_ = periodic_sums(flow.base.matrix(), n, [roof](const Vec2& x) { return roof(x); }, &pts);
    r_min_ = roof.r_min();
  }

  int order() const { return n_; }
  std::size_t count() const { return count_; }

  /// P_map(t phi_hat - s r_hat)
  double map_pressure(double t, double s) const {
    std::vector<double> e(count_);
    for (std::size_t i = 0; i < count_; ++i)
      e[i] = t * phi_[i] - s * (roof_const_ ? roof_const_ * n_ : roof_[i]);
    return log_sum_exp(e) / n_;
  }

  /// Flow pressure of t phi: the root s of P_map(t phi_hat - s r_hat) = 0.
  double flow_pressure(double t, double phi_sup) const {
    const double p0 = std::log(static_cast<double>(count_)) / n_;
    const double bound = (std::abs(t) * phi_sup + p0) / r_min_;
    const double f_lo = map_pressure(t, -bound), f_hi = map_pressure(t, bound);
    if (!(f_lo >= 0.0 && f_hi <= 0.0)) throw BracketFailure("flow pressure root not bracketed");
    if (roof_const_) return map_pressure(t, 0.0) / roof_const_;
    double lo = -bound, hi = bound;
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
      const double mid = 0.5 * (lo + hi);
      (map_pressure(t, mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  int n_;
  std::size_t count_ = 0;
  std::vector<double> phi_, roof_;
  double roof_const_ = 0.0;
  double r_min_ = 1.0;
};

inline constexpr int default_po_order = 12;

inline double pressure_flow(const Observable& phi, const SuspensionFlow& flow, int n = default_po_order) {
  return PeriodicOrbitSums(flow, phi, n).flow_pressure(1.0, phi.sup_norm());
}

struct PressureCurve {
  std::vector<double> t;
  std::vector<double> beta;
  std::string method;  ///< "periodic-orbit" | "Monte-Carlo-CGF/naive" | "Monte-Carlo-CGF/cloning"
  double order = 0.0;  ///< period n, or horizon T for Monte Carlo
};

/// beta(t) = P(t phi) - P(0) from periodic orbits of order n.
inline PressureCurve beta_curve(const Observable& phi, const SuspensionFlow& flow, std::span<const double> t_grid,
                                int n = default_po_order, unsigned workers = 1) {
  const PeriodicOrbitSums sums(flow, phi, n);
  const double sup = phi.sup_norm();
  const double p0 = sums.flow_pressure(0.0, sup);
  PressureCurve c;
  c.t.assign(t_grid.begin(), t_grid.end());
  c.method = "periodic-orbit";
  c.order = n;
  c.beta = parallel_map(t_grid.size(), workers, [&](std::size_t i) {
    return t_grid[i] == 0.0 ? 0.0 : sums.flow_pressure(t_grid[i], sup) - p0;
  });
  return c;
}

enum class CgfMethod { Naive, Cloning };

struct CloningOptions {
  double step = 1.0;           ///< resampling interval in flow time
  double burn_in = 0.2;        ///< fraction of steps discarded
  double jitter = 1e-3;        ///< base-point noise added to duplicated clones
};

namespace detail {

// population estimate of (1/T) log E exp(t int_0^T phi) for one t
inline double cloning_cgf(const SuspensionFlow& flow, const Observable& phi, double t, double horizon,
                          std::vector<FlowPoint> pop, std::uint64_t seed, const CloningOptions& opt,
                          unsigned workers) {
  const std::size_t n = pop.size();
  const int steps = std::max(1, static_cast<int>(std::lround(horizon / opt.step)));
  const int burn = static_cast<int>(std::floor(opt.burn_in * steps));
  std::vector<double> acc;
  std::vector<FlowPoint> next(n);
  std::vector<double> w(n);
  std::vector<std::size_t> parent(n);
  for (int k = 0; k < steps; ++k) {
    struct Move {
      FlowPoint end;
      double integral;
    };
    const auto moved = parallel_map(n, workers, [&](std::size_t i) {
      double s = 0.0;
      const FlowPoint e = walk(flow, pop[i], opt.step, [&](const FiberSegment& seg) {
        s += segment_integral(phi, seg);
      });
      return Move{e, s};
    });
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& mv : moved) m = std::max(m, t * mv.integral);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(t * moved[i].integral - m);
    const double total = pairwise_sum(w);
    if (k >= burn) acc.push_back(m + std::log(total / static_cast<double>(n)));
    // systematic resampling
    auto g = stream(seed, static_cast<std::uint64_t>(k), 0x636c6f6e65ULL);
    const double u = uniform01(g);
    double cum = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
      cum += w[i] / total;
      while (j < n && (static_cast<double>(j) + u) / static_cast<double>(n) < cum) parent[j++] = i;
    }
    while (j < n) parent[j++] = n - 1;
    // duplicates are jittered in index order from one stream per step
    std::normal_distribution<double> nd(0.0, opt.jitter);
    for (std::size_t i = 0; i < n; ++i) {
      const bool dup = i > 0 && parent[i] == parent[i - 1];
      FlowPoint p = moved[parent[i]].end;
      if (dup && opt.jitter > 0.0) {
        const double r_old = flow.roof(p.x);
        const double d1 = nd(g), d2 = nd(g);
        p.x = wrap01(Vec2(p.x(0) + d1, p.x(1) + d2));
        if (!flow.roof.constant()) p.s = p.s / r_old * flow.roof(p.x);
      }
      next[i] = p;
    }
    pop.swap(next);
  }
  return pairwise_sum(acc) / (static_cast<double>(acc.size()) * opt.step);
}

}  // namespace detail

/// Monte Carlo cumulant curve (1/T) log E_m exp(t int_0^T phi). The naive
/// average is dominated by rare orbits for |t| beyond about 1; the cloning
/// (population) estimator resamples by weight every unit of time instead.
inline PressureCurve beta_mc(const Observable& phi, const SuspensionFlow& flow, std::span<const double> t_grid,
                             double horizon, std::size_t n, std::uint64_t seed, CgfMethod method = CgfMethod::Cloning,
                             unsigned workers = 1, const CloningOptions& opt = {}) {
  PressureCurve c;
  c.t.assign(t_grid.begin(), t_grid.end());
  c.order = horizon;
  if (phi.is_constant()) {
    c.method = method == CgfMethod::Naive ? "Monte-Carlo-CGF/naive" : "Monte-Carlo-CGF/cloning";
    for (double t : t_grid) c.beta.push_back(t * phi.constant_term());
    return c;
  }
  const auto pts = sample_volume(flow, seed, n);
  if (method == CgfMethod::Naive) {
    c.method = "Monte-Carlo-CGF/naive";
    const auto s = parallel_map(n, workers, [&](std::size_t i) {
      return integrate_observable(flow, phi, pts[i], horizon);
    });
    std::vector<double> e(n);
    for (double t : t_grid) {
      if (t == 0.0) {
        c.beta.push_back(0.0);
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) e[i] = t * s[i];
      c.beta.push_back((log_sum_exp(e) - std::log(static_cast<double>(n))) / horizon);
    }
    return c;
  }
  c.method = "Monte-Carlo-CGF/cloning";
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const double t = t_grid[j];
    c.beta.push_back(t == 0.0 ? 0.0
                              : detail::cloning_cgf(flow, phi, t, horizon, pts, seed + 0x9e37 * (j + 1), opt, workers));
  }
  return c;
}

/// Largest violation of convexity, as the most negative scaled second difference.
inline double min_second_difference(std::span<const double> t, std::span<const double> b) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const double s1 = (b[i] - b[i - 1]) / (t[i] - t[i - 1]);
    const double s2 = (b[i + 1] - b[i]) / (t[i + 1] - t[i]);
    worst = std::min(worst, s2 - s1);
  }
  return worst;
}

/// Rate function H(a) = sup_t (a t - beta(t)) on the domain of beta'.
class EntropyProfile {
 public:
  static constexpr double infinity = std::numeric_limits<double>::infinity();

  EntropyProfile() = default;

  EntropyProfile(const PressureCurve& curve, int n_a = 401) : t_(curve.t), beta_(curve.beta) {
    const std::size_t n = t_.size();
    if (n < 3) throw std::invalid_argument("legendre: need at least 3 nodes");
    for (std::size_t i = 1; i < n; ++i)
      if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("legendre: t grid must increase");
    if (min_second_difference(t_, beta_) < -1e-6) throw NonConvexInput("pressure curve is not convex");
    method_ = curve.method;
    db_.resize(n);
    db_[0] = (beta_[1] - beta_[0]) / (t_[1] - t_[0]);
    db_[n - 1] = (beta_[n - 1] - beta_[n - 2]) / (t_[n - 1] - t_[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) db_[i] = (beta_[i + 1] - beta_[i - 1]) / (t_[i + 1] - t_[i - 1]);
    for (std::size_t i = 1; i < n; ++i) db_[i] = std::max(db_[i], db_[i - 1]);  // rounding guard
    lo_ = db_.front();
    hi_ = db_.back();
    degenerate_ = hi_ - lo_ <= 1e-9 * std::max(1.0, std::abs(hi_));

    // chi = beta'(0) and sigma^2 = beta''(0) from the nodes around t = 0
    std::size_t z = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(t_[i]) < std::abs(t_[z])) z = i;
    z = std::clamp<std::size_t>(z, 1, n - 2);
    chi_ = t_[z] == 0.0 ? db_[z] : slope_at(0.0);
    const double hl = t_[z] - t_[z - 1], hr = t_[z + 1] - t_[z];
    sigma2_ = 2.0 * ((beta_[z + 1] - beta_[z]) / hr - (beta_[z] - beta_[z - 1]) / hl) / (hl + hr);
    if (degenerate_) {
      chi_ = 0.5 * (lo_ + hi_);
      sigma2_ = 0.0;
    }

    if (degenerate_) {
      a_grid_ = {chi_};
      H_grid_ = {0.0};
    } else {
      for (int i = 0; i < n_a; ++i) {
        const double a = lo_ + (hi_ - lo_) * i / (n_a - 1);
        a_grid_.push_back(a);
        H_grid_.push_back(H(a));
      }
    }
  }

  const std::vector<double>& t() const { return t_; }
  const std::vector<double>& beta() const { return beta_; }
  const std::vector<double>& beta_prime() const { return db_; }
  const std::vector<double>& a_grid() const { return a_grid_; }
  const std::vector<double>& H_grid() const { return H_grid_; }
  double chi() const { return chi_; }
  double sigma2() const { return sigma2_; }
  double gamma_lo() const { return lo_; }
  double gamma_hi() const { return hi_; }
  bool degenerate() const { return degenerate_; }
  const std::string& method() const { return method_; }

  bool in_domain(double a) const {
    if (degenerate_) return std::abs(a - chi_) <= 1e-9 * std::max(1.0, std::abs(chi_));
    return a >= lo_ && a <= hi_;
  }

  /// rho(a) = (beta')^{-1}(a) by monotone linear inversion.
  double rho(double a) const {
    if (!in_domain(a)) return std::numeric_limits<double>::quiet_NaN();
    if (degenerate_) return 0.0;
    return rho_inverse_slope(a);
  }

  double H(double a) const {
    if (!in_domain(a)) return infinity;
    if (degenerate_) return 0.0;
    const double ts = rho_inverse_slope(a);
    double best = a * ts - hermite(ts);
    for (std::size_t j = 0; j < t_.size(); ++j) best = std::max(best, a * t_[j] - beta_[j]);
    return std::max(0.0, best);
  }

 private:
  double slope_at(double x) const {
    if (x <= t_.front()) return db_.front();
    if (x >= t_.back()) return db_.back();
    const std::size_t j = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), x) - t_.begin());
    const double w = (x - t_[j - 1]) / (t_[j] - t_[j - 1]);
    return (1 - w) * db_[j - 1] + w * db_[j];
  }

  double rho_inverse_slope(double a) const {
    auto it = std::lower_bound(db_.begin(), db_.end(), a);
    if (it == db_.begin()) return t_.front();
    if (it == db_.end()) return t_.back();
    const std::size_t j = static_cast<std::size_t>(it - db_.begin());
    if (db_[j] == db_[j - 1]) return t_[j];
    const double w = (a - db_[j - 1]) / (db_[j] - db_[j - 1]);
    return t_[j - 1] + w * (t_[j] - t_[j - 1]);
  }

  // cubic Hermite interpolant of beta with slopes beta'
  double hermite(double x) const {
    auto it = std::upper_bound(t_.begin(), t_.end(), x);
    std::size_t j = it == t_.begin() ? 1 : static_cast<std::size_t>(it - t_.begin());
    j = std::min(j, t_.size() - 1);
    const double h = t_[j] - t_[j - 1];
    const double s = (x - t_[j - 1]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * beta_[j - 1] + h10 * h * db_[j - 1] + h01 * beta_[j] + h11 * h * db_[j];
  }

  std::vector<double> t_, beta_, db_, a_grid_, H_grid_;
  double chi_ = 0.0, sigma2_ = 0.0, lo_ = 0.0, hi_ = 0.0;
  bool degenerate_ = false;
  std::string method_;
};

inline EntropyProfile legendre(const PressureCurve& curve, int n_a = 401) { return EntropyProfile(curve, n_a); }

inline constexpr double threshold_cap = 1e300;

/// p*(eps) = 1 / int_eps^{u_sup - chi} ds / H(chi + s), with the integrand
/// taken as 0 where chi + s lies outside the profile's domain.
inline double integrability_threshold(const EntropyProfile& prof, double chi, double u_sup, double eps,
                                      int n_nodes = 2001) {
  const double top = u_sup - chi;
  if (!(eps > 0.0)) throw std::invalid_argument("integrability_threshold: eps must be positive");
  if (eps >= top) return threshold_cap;
  const double h = (top - eps) / (n_nodes - 1);
  double integral = 0.0;
  bool any_finite = false;
  for (int i = 0; i < n_nodes; ++i) {
    const double s = i == n_nodes - 1 ? top : eps + i * h;
    const double H = prof.H(chi + s);
    double f = 0.0;
    if (std::isfinite(H)) {
      any_finite = true;
      f = H > 0.0 ? 1.0 / H : std::numeric_limits<double>::infinity();
    }
    integral += (i == 0 || i == n_nodes - 1 ? 0.5 : 1.0) * h * f;
  }
  if (!any_finite) throw DegenerateProfile("rate function is infinite on the whole threshold range");
  if (!(integral > 0.0)) return threshold_cap;
  return std::min(threshold_cap, 1.0 / integral);
}

struct TailRate {
  double a = 0.0;
  std::vector<double> T;
  std::vector<std::size_t> hits;
  std::vector<double> frequency;
  std::vector<Interval> ci;
  bool dropped_zero_cells = false;
  double slope = std::numeric_limits<double>::quiet_NaN();            ///< fit of -log p vs T
  double slope_corrected = std::numeric_limits<double>::quiet_NaN();  ///< fit of -log p - log(T)/2 vs T
  std::size_t n = 0;
};

/// Empirical decay rate of m{ int_0^T u >= T a } over the T list.
inline TailRate tail_rate_empirical(const SuspensionFlow& flow, const Observable& u, double a,
                                    std::vector<double> T_list, std::size_t n, std::uint64_t seed,
                                    unsigned workers = 1) {
  if (T_list.empty()) throw std::invalid_argument("tail_rate_empirical: empty T list");
  std::sort(T_list.begin(), T_list.end());
  const auto pts = sample_volume(flow, seed, n);
  const auto sums = parallel_map(n, workers, [&](std::size_t i) {
    std::vector<double> s(T_list.size());
    FlowPoint p = pts[i];
    double acc = 0.0, t = 0.0;
    for (std::size_t k = 0; k < T_list.size(); ++k) {
      p = walk(flow, p, T_list[k] - t, [&](const FiberSegment& seg) { acc += segment_integral(u, seg); });
      t = T_list[k];
      s[k] = acc;
    }
    return s;
  });
  TailRate tr;
  tr.a = a;
  tr.n = n;
  tr.T = T_list;
  std::vector<double> x, y, yc;
  for (std::size_t k = 0; k < T_list.size(); ++k) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += sums[i][k] >= T_list[k] * a ? 1 : 0;
    tr.hits.push_back(c);
    tr.frequency.push_back(static_cast<double>(c) / static_cast<double>(n));
    tr.ci.push_back(wilson_interval(c, n));
    if (c == 0) {
      tr.dropped_zero_cells = true;
      continue;
    }
    x.push_back(T_list[k]);
    y.push_back(-std::log(tr.frequency.back()));
    yc.push_back(y.back() - 0.5 * std::log(T_list[k]));
  }
  if (x.empty()) throw AllZeroCounts("no sample reached the level a = " + std::to_string(a));
  tr.slope = fit_line(x, y).slope;
  tr.slope_corrected = fit_line(x, yc).slope;
  return tr;
}

/// Decay rate of m{T_eps > T} over the T list, read off regularity records.
inline TailRate time_tail_rate(std::span<const RegularityRecord> recs, double eps, std::vector<double> T_list) {
  if (T_list.empty()) throw std::invalid_argument("time_tail_rate: empty T list");
  std::sort(T_list.begin(), T_list.end());
  TailRate tr;
  tr.a = eps;
  tr.n = recs.size();
  tr.T = T_list;
  std::vector<double> x, y, yc;
  for (double T : T_list) {
    std::size_t c = 0;
    for (const auto& r : recs) c += r.T_eps > T ? 1 : 0;
    tr.hits.push_back(c);
    tr.frequency.push_back(static_cast<double>(c) / static_cast<double>(recs.size()));
    tr.ci.push_back(wilson_interval(c, recs.size()));
    if (c == 0) {
      tr.dropped_zero_cells = true;
      continue;
    }
    x.push_back(T);
    y.push_back(-std::log(tr.frequency.back()));
    yc.push_back(y.back() - 0.5 * std::log(T));
  }
  if (x.size() < 2) throw AllZeroCounts("fewer than two populated T cells");
  tr.slope = fit_line(x, y).slope;
  tr.slope_corrected = fit_line(x, yc).slope;
  return tr;
}

struct TailBin {
  int n = 0;
  double lo = 0.0, hi = 0.0;  ///< bin is (zeta^n, zeta^{n+1}]
  std::size_t count = 0;
  double mass = 0.0;
  double bound = 0.0;         ///< L exp(-H zeta^{n+1}), L fitted at n = 0
  bool insufficient = false;  ///< fewer than 10 points
};

struct TailDecayReport {
  double eps = 0.0, zeta = 0.0;
  double rate = 0.0;  ///< H((chi + eps) / zeta)
  std::vector<TailBin> bins;
  bool monotone_decay = false;       ///< masses decrease over all populated bins
  bool decay_after_mode = false;     ///< masses decrease from the heaviest bin on
  double fitted_exponent = std::numeric_limits<double>::quiet_NaN();  ///< slope of -log m(B_n) vs zeta^{n+1}
};

inline TailDecayReport tail_decay(std::span<const RegularityRecord> recs, double eps, double zeta,
                                const EntropyProfile& prof, double chi) {
  if (!(zeta > 1.0)) throw std::invalid_argument("tail_decay: zeta must exceed 1");
  TailDecayReport rep;
  rep.eps = eps;
  rep.zeta = zeta;
  rep.rate = prof.H((chi + eps) / zeta);
  double tmax = 0.0;
  for (const auto& r : recs) tmax = std::max(tmax, r.T_eps);
  const double N = static_cast<double>(recs.size());
  for (int n = 0; std::pow(zeta, n) < tmax; ++n) {
    TailBin b;
    b.n = n;
    b.lo = std::pow(zeta, n);
    b.hi = std::pow(zeta, n + 1);
    for (const auto& r : recs) b.count += (r.T_eps > b.lo && r.T_eps <= b.hi) ? 1 : 0;
    b.mass = N > 0 ? static_cast<double>(b.count) / N : 0.0;
    b.insufficient = b.count < 10;
    rep.bins.push_back(b);
  }
  if (rep.bins.empty()) return rep;
  const double L = std::isfinite(rep.rate) ? rep.bins.front().mass * std::exp(rep.rate * rep.bins.front().hi) : 0.0;
  std::vector<double> x, y;
  std::size_t mode = 0;
  for (std::size_t i = 0; i < rep.bins.size(); ++i) {
    auto& b = rep.bins[i];
    b.bound = std::isfinite(rep.rate) ? L * std::exp(-rep.rate * b.hi) : 0.0;
    if (!b.insufficient) {
      x.push_back(b.hi);
      y.push_back(-std::log(b.mass));
      if (b.mass > rep.bins[mode].mass) mode = i;
    }
  }
  auto decreasing_from = [&](std::size_t start) {
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = start; i < rep.bins.size(); ++i) {
      if (rep.bins[i].insufficient) continue;
      if (!(rep.bins[i].mass < prev)) return false;
      prev = rep.bins[i].mass;
    }
    return true;
  };
  rep.monotone_decay = decreasing_from(0);
  rep.decay_after_mode = decreasing_from(mode);
  if (x.size() >= 2) rep.fitted_exponent = fit_line(x, y).slope;
  return rep;
}

}  // namespace oslab
