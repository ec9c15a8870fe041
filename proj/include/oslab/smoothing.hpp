#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "oslab/core/errors.hpp"
#include "oslab/core/parallel.hpp"
#include "oslab/dynamics.hpp"
#include "oslab/regularity.hpp"

namespace oslab {

/// Piecewise-constant function on the n x n cells of the torus. Row r holds
/// the cells with x2 in [r/n, (r+1)/n); column c those with x1 in [c/n, (c+1)/n).
class GridFunction {
 public:
  GridFunction(int n, std::vector<double> values) : n_(n), v_(std::move(values)) {
    if (n < 1 || v_.size() != static_cast<std::size_t>(n) * n) throw ShapeError("grid must hold n*n values");
    for (double x : v_) {
      if (!std::isfinite(x)) throw ShapeError("grid values must be finite");
      sup_ = std::max(sup_, std::abs(x));
    }
  }

  /// Cell-center samples of an observable's base part.
  static GridFunction sample(const Observable& u, int n) {
    std::vector<double> v(static_cast<std::size_t>(n) * n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) v[r * n + c] = u.base_value(Vec2((c + 0.5) / n, (r + 0.5) / n));
    return GridFunction(n, std::move(v));
  }

  /// Row-major n x n values separated by commas and/or whitespace.
  static GridFunction load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid file " + path);
    std::vector<double> v;
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      double x;
      bool any = false;
      while (ls >> x) {
        v.push_back(x);
        any = true;
      }
      rows += any ? 1 : 0;
    }
    const int n = static_cast<int>(rows);
    return GridFunction(n, std::move(v));
  }

  int n() const { return n_; }
  double sup_bound() const { return sup_; }
  double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * n_ + c]; }
  const std::vector<double>& values() const { return v_; }

  double operator()(const Vec2& x) const {
    const int c = std::min(n_ - 1, static_cast<int>(x(0) * n_));
    const int r = std::min(n_ - 1, static_cast<int>(x(1) * n_));
    return at(r, c);
  }

  double min() const { return *std::min_element(v_.begin(), v_.end()); }
  double max() const { return *std::max_element(v_.begin(), v_.end()); }

  /// Whether the function varies along x1 (axis 0) or x2 (axis 1).
  bool varies(int axis) const {
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) {
        const double ref = axis == 0 ? at(r, 0) : at(0, c);
        if (at(r, c) != ref) return true;
      }
    return false;
  }

  /// Integral against the normalized suspension volume (midpoint rule inside cells for the roof).
  double mean(const RoofFunction& roof) const {
    if (roof.constant()) {
      std::vector<double> v(v_);
      return pairwise_sum(v) / static_cast<double>(v.size());
    }
    const int sub = 4;
    std::vector<double> num, den;
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) {
        double w = 0.0;
        for (int i = 0; i < sub; ++i)
          for (int j = 0; j < sub; ++j) w += roof(Vec2((c + (j + 0.5) / sub) / n_, (r + (i + 0.5) / sub) / n_));
        num.push_back(at(r, c) * w);
        den.push_back(w);
      }
    return pairwise_sum(num) / pairwise_sum(den);
  }

 private:
  int n_;
  std::vector<double> v_;
  double sup_ = 0.0;
};

/// Nonnegative trigonometric kernel of degree 2m - 2 with unit mass: the
/// normalized square of the Fejer kernel of order m.
struct PositiveKernel {
  std::vector<double> coef;  ///< coef[k] for k = 0..degree; symmetric in k

  static PositiveKernel jackson(int m) {
    PositiveKernel kk;
    if (m <= 1) {
      kk.coef = {1.0};
      return kk;
    }
    std::vector<double> tri(2 * m - 1);
    for (int j = -(m - 1); j <= m - 1; ++j) tri[j + m - 1] = 1.0 - std::abs(j) / static_cast<double>(m);
    const int deg = 2 * m - 2;
    kk.coef.assign(deg + 1, 0.0);
    for (int k = 0; k <= deg; ++k) {
      double s = 0.0;
      for (int j = -(m - 1); j <= m - 1; ++j) {
        const int l = k - j;
        if (l >= -(m - 1) && l <= m - 1) s += tri[j + m - 1] * tri[l + m - 1];
      }
      kk.coef[k] = s;
    }
    const double c0 = kk.coef[0];
    for (auto& c : kk.coef) c /= c0;
    return kk;
  }

  static PositiveKernel fejer(int m) {
    PositiveKernel kk;
    for (int k = 0; k < std::max(1, m); ++k) kk.coef.push_back(1.0 - k / static_cast<double>(std::max(1, m)));
    return kk;
  }

  int degree() const { return static_cast<int>(coef.size()) - 1; }

  /// Kernel mass outside [-rho, rho] (one dimension), exact from the coefficients.
  double tail_mass(double rho) const {
    double inside = 2.0 * rho;
    for (int k = 1; k <= degree(); ++k) inside += 2.0 * coef[k] * std::sin(two_pi * k * rho) / (3.141592653589793 * k);
    return std::clamp(1.0 - inside, 0.0, 1.0);
  }
};

enum class KernelKind { Jackson, Fejer };

struct Majorant {
  Observable u_tilde;
  double margin = 0.0;      ///< additive margin a
  int dilation_cells = 0;   ///< q; the sup is taken over +-q cells
  int kernel_order = 0;     ///< m; degree 2m - 2 for Jackson
  double tail_mass = 0.0;   ///< kernel mass outside the dilation box
  double predicted_gap = 0.0;
  double gap = 0.0;         ///< quadrature of (u_tilde - g) on the verification grid
  double min_excess = 0.0;  ///< min of (u_tilde - g) on the verification grid
  int verification_n = 0;
};

namespace detail {

inline std::vector<double> dilate(const GridFunction& g, int q, bool along_x1, bool along_x2) {
  const int n = g.n();
  std::vector<double> tmp(static_cast<std::size_t>(n) * n), out(tmp.size());
  const int q1 = along_x1 ? q : 0, q2 = along_x2 ? q : 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double m = -std::numeric_limits<double>::infinity();
      for (int d = -q1; d <= q1; ++d) m = std::max(m, g.at(r, ((c + d) % n + n) % n));
      tmp[r * n + c] = m;
    }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double m = -std::numeric_limits<double>::infinity();
      for (int d = -q2; d <= q2; ++d) m = std::max(m, tmp[((r + d) % n + n) % n * n + c]);
      out[r * n + c] = m;
    }
  return out;
}

// exact Fourier coefficients of a cell function, |m1| <= d1, |m2| <= d2
inline std::vector<std::complex<double>> cell_fourier(const std::vector<double>& w, int n, int d1, int d2) {
  using C = std::complex<double>;
  auto cell_factor = [n](int m) {
    if (m == 0) return C(1.0 / n, 0.0);
    const double a = two_pi * m / n;
    return (C(1.0, 0.0) - std::polar(1.0, -a)) / C(0.0, two_pi * m);
  };
  const int w1 = 2 * d1 + 1, w2 = 2 * d2 + 1;
  std::vector<C> rows(static_cast<std::size_t>(n) * w1);
  for (int r = 0; r < n; ++r)
    for (int m1 = -d1; m1 <= d1; ++m1) {
      C s(0.0, 0.0);
      for (int c = 0; c < n; ++c) s += w[r * n + c] * std::polar(1.0, -two_pi * m1 * c / n);
      rows[r * w1 + (m1 + d1)] = s * cell_factor(m1);
    }
  std::vector<C> out(static_cast<std::size_t>(w1) * w2);
  for (int m2 = -d2; m2 <= d2; ++m2)
    for (int m1 = -d1; m1 <= d1; ++m1) {
      C s(0.0, 0.0);
      for (int r = 0; r < n; ++r) s += rows[r * w1 + (m1 + d1)] * std::polar(1.0, -two_pi * m2 * r / n);
      out[(m2 + d2) * w1 + (m1 + d1)] = s * cell_factor(m2);
    }
  return out;
}

// values of sum_m coef(m) e^{2 pi i m.x} at x = ((j + 1/2)/N, (i + 1/2)/N)
inline std::vector<double> evaluate_on_grid(const std::vector<std::complex<double>>& coef, int d1, int d2, int N) {
  using C = std::complex<double>;
  const int w1 = 2 * d1 + 1;
  std::vector<C> half(static_cast<std::size_t>(2 * d2 + 1) * N);
  for (int m2 = -d2; m2 <= d2; ++m2)
    for (int j = 0; j < N; ++j) {
      C s(0.0, 0.0);
      const double x1 = (j + 0.5) / N;
      for (int m1 = -d1; m1 <= d1; ++m1) s += coef[(m2 + d2) * w1 + (m1 + d1)] * std::polar(1.0, two_pi * m1 * x1);
      half[(m2 + d2) * N + j] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(N) * N);
  for (int i = 0; i < N; ++i) {
    const double x2 = (i + 0.5) / N;
    for (int j = 0; j < N; ++j) {
      C s(0.0, 0.0);
      for (int m2 = -d2; m2 <= d2; ++m2) s += half[(m2 + d2) * N + j] * std::polar(1.0, two_pi * m2 * x2);
      out[i * N + j] = s.real();
    }
  }
  return out;
}

}  // namespace detail

inline constexpr double majorant_margin_floor = 1e-9;

/// Smooth (trigonometric) majorant of a cell function with mean gap below delta:
/// sup-dilation over +-q cells, a margin, then convolution with a positive kernel.
/// Verified on the grid of twice the resolution.
inline Majorant smooth_majorant(const GridFunction& g, double delta, KernelKind kind = KernelKind::Jackson,
                                int max_order = 128) {
  if (!(delta > 0.0)) throw std::invalid_argument("smooth_majorant: delta must be positive");
  const int n = g.n();
  const bool v1 = g.varies(0), v2 = g.varies(1);
  const double osc = g.max() - g.min();
  const double gmean = [&] {
    std::vector<double> v(g.values());
    return pairwise_sum(v) / static_cast<double>(v.size());
  }();
  const int N = 2 * n;
  std::vector<double> gv(static_cast<std::size_t>(N) * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) gv[i * N + j] = g.at(i / 2, j / 2);

  double best_gap = std::numeric_limits<double>::infinity();
  for (int order = 2; order <= max_order; order *= 2) {
    const PositiveKernel ker = kind == KernelKind::Jackson ? PositiveKernel::jackson(order) : PositiveKernel::fejer(order);
    for (int q = 0; q <= n / 4; ++q) {
      const double rho = static_cast<double>(q) / n;
      const double t1 = ker.tail_mass(rho);
      const int axes = (v1 ? 1 : 0) + (v2 ? 1 : 0);
      const double tau = axes == 0 ? 0.0 : 1.0 - std::pow(1.0 - t1, axes);
      const auto w = detail::dilate(g, q, v1, v2);
      const double wmean = pairwise_sum(std::vector<double>(w)) / static_cast<double>(w.size());
      const double a = tau * osc + majorant_margin_floor;
      const double predicted = wmean - gmean + a;
      best_gap = std::min(best_gap, predicted);
      if (!(predicted < delta)) continue;

      const int d1 = v1 ? ker.degree() : 0, d2 = v2 ? ker.degree() : 0;
      auto coef = detail::cell_fourier(w, n, d1, d2);
      const int w1 = 2 * d1 + 1;
      for (int m2 = -d2; m2 <= d2; ++m2)
        for (int m1 = -d1; m1 <= d1; ++m1)
          coef[(m2 + d2) * w1 + (m1 + d1)] *= ker.coef[std::abs(m1)] * ker.coef[std::abs(m2)];
      coef[d2 * w1 + d1] += a;

      // real cosine form over a half plane of frequencies
      double c0 = coef[d2 * w1 + d1].real();
      std::vector<TrigTerm> terms;
      for (int m2 = 0; m2 <= d2; ++m2)
        for (int m1 = -d1; m1 <= d1; ++m1) {
          if (m2 == 0 && m1 <= 0) continue;
          const auto c = coef[(m2 + d2) * w1 + (m1 + d1)];
          const double amp = 2.0 * std::abs(c);
          if (amp < 1e-15) continue;
          terms.push_back(TrigTerm{m1, m2, amp, std::arg(c), 0});
        }
      Majorant out{Observable(c0, std::move(terms))};
      out.margin = a;
      out.dilation_cells = q;
      out.kernel_order = order;
      out.tail_mass = tau;
      out.predicted_gap = predicted;
      out.verification_n = N;

      const auto uv = detail::evaluate_on_grid(coef, d1, d2, N);
      double excess = std::numeric_limits<double>::infinity();
      std::vector<double> diff(uv.size());
      for (std::size_t i = 0; i < uv.size(); ++i) {
        diff[i] = uv[i] - gv[i];
        excess = std::min(excess, diff[i]);
      }
      out.min_excess = excess;
      out.gap = pairwise_sum(diff) / static_cast<double>(diff.size());
      if (excess >= 0.0 && out.gap < delta) return out;
    }
  }
  throw BudgetInfeasible("no dilation/kernel configuration meets the mean-gap budget", best_gap);
}

/// Majorant of an already smooth observable: a constant shift.
inline Majorant smooth_majorant(const Observable& g, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("smooth_majorant: delta must be positive");
  Majorant out{g.plus_constant(std::min(majorant_margin_floor, 0.5 * delta))};
  out.margin = std::min(majorant_margin_floor, 0.5 * delta);
  out.predicted_gap = out.gap = out.margin;
  out.min_excess = out.margin;
  return out;
}

/// Integrand path of a cell function (constant on each fiber).
inline IntegrandPath grid_path(const SuspensionFlow& flow, const GridFunction& g, const FlowPoint& p, double horizon) {
  IntegrandPath path;
  walk(flow, p, horizon, [&](const FiberSegment& seg) { path.add_piece(seg.duration(), g(seg.x)); });
  return path;
}

struct ReductionReport {
  std::size_t samples = 0, pass = 0, fail = 0, skipped = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();  ///< max of lhs - rhs
  double chi = 0.0, chi_tilde = 0.0;
  std::vector<InequalityCheck> checks;
  bool ok() const { return fail == 0; }
};

/// log D_eps^g <= log D_{eps - delta}^{u_tilde} on each sample.
inline ReductionReport smoothing_reduction_check(const SuspensionFlow& flow, const GridFunction& g, const Observable& u_tilde,
                                         double delta, double eps, std::span<const FlowPoint> points, double horizon,
                                         unsigned workers = 1) {
  if (!(0.0 < delta && delta < eps)) throw std::invalid_argument("smoothing_reduction_check needs 0 < delta < eps");
  ReductionReport rep;
  rep.chi = g.mean(flow.roof);
  rep.chi_tilde = u_tilde.mean(flow.roof);
  if (!(rep.chi_tilde - rep.chi < delta)) throw BoundError("majorant mean gap is not below delta");
  rep.checks = parallel_map(points.size(), workers, [&](std::size_t i) {
    const auto lo = regularity_D(grid_path(flow, g, points[i], horizon), rep.chi, eps);
    const auto hi = regularity_D(observable_path(flow, u_tilde, points[i], horizon), rep.chi_tilde, eps - delta);
    return make_check(lo.log_D, hi.log_D, lo.truncated || hi.truncated);
  });
  rep.samples = points.size();
  for (const auto& c : rep.checks) {
    rep.pass += c.pass() ? 1 : 0;
    rep.fail += c.fail() ? 1 : 0;
    rep.skipped += c.status == AuditStatus::SkippedTruncated ? 1 : 0;
    rep.worst_margin = std::max(rep.worst_margin, c.lhs - c.rhs);
  }
  return rep;
}

/// Overload for a smooth u: compares D_eps^u with D_{eps-delta}^{u_tilde}.
inline ReductionReport smoothing_reduction_check(const SuspensionFlow& flow, const Observable& u, const Observable& u_tilde,
                                         double delta, double eps, std::span<const FlowPoint> points, double horizon,
                                         unsigned workers = 1) {
  if (!(0.0 < delta && delta < eps)) throw std::invalid_argument("smoothing_reduction_check needs 0 < delta < eps");
  ReductionReport rep;
  rep.chi = u.mean(flow.roof);
  rep.chi_tilde = u_tilde.mean(flow.roof);
  rep.checks = parallel_map(points.size(), workers, [&](std::size_t i) {
    const auto lo = regularity_D(flow, u, points[i], eps, horizon);
    const auto hi = regularity_D(flow, u_tilde, points[i], eps - delta, horizon);
    return make_check(lo.log_D, hi.log_D, lo.truncated || hi.truncated);
  });
  rep.samples = points.size();
  for (const auto& c : rep.checks) {
    rep.pass += c.pass() ? 1 : 0;
    rep.fail += c.fail() ? 1 : 0;
    rep.skipped += c.status == AuditStatus::SkippedTruncated ? 1 : 0;
    rep.worst_margin = std::max(rep.worst_margin, c.lhs - c.rhs);
  }
  return rep;
}

}  // namespace oslab
