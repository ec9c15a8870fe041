#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "oslab/core/errors.hpp"
#include "oslab/core/linalg.hpp"
#include "oslab/core/rng.hpp"
#include "oslab/dynamics.hpp"

namespace oslab {

/// One fiber of an impulsive generator: flat drift for `length` time units,
/// then the jump `factor`. The window may clip the fiber, in which case
/// [t_begin, t_end] is shorter than `length` and `completes` may be false.
struct ImpulseSegment {
  double t_begin = 0.0;
  double t_end = 0.0;
  double length = 1.0;
  Mat factor;
  bool completes = true;
};

/// v' = A(t) v, either with a smooth generator or as a chain of impulses.
class LinearSystem {
 public:
  using Generator = std::function<Mat(double)>;

  static LinearSystem smooth(int k, Generator a) {
    LinearSystem s;
    s.k_ = k;
    s.gen_ = std::move(a);
    return s;
  }

  static LinearSystem impulsive(int k, std::vector<ImpulseSegment> segments) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& sg = segments[i];
      if (sg.factor.rows() != k || sg.factor.cols() != k) throw ShapeError("impulse factor has wrong shape");
      if (!(sg.t_end >= sg.t_begin) || !(sg.length > 0.0)) throw ShapeError("bad impulse segment");
      if (i > 0 && !(sg.t_begin > segments[i - 1].t_begin)) throw ShapeError("impulse times must increase");
    }
    LinearSystem s;
    s.k_ = k;
    s.segments_ = std::move(segments);
    s.impulsive_ = true;
    return s;
  }

  int dim() const { return k_; }
  bool is_impulsive() const { return impulsive_; }
  Mat generator(double t) const { return gen_(t); }
  const std::vector<ImpulseSegment>& segments() const { return segments_; }

 private:
  int k_ = 0;
  bool impulsive_ = false;
  Generator gen_;
  std::vector<ImpulseSegment> segments_;
};

struct TriangularTrajectory {
  int k = 0;
  bool impulsive = false;
  std::vector<double> t;
  std::vector<Mat> U;
  /// Smooth: B(t) at each node, computed as U^T A U - U^T U'. Impulsive:
  /// diagonal of per-fiber growth densities of the fiber ending at the node.
  std::vector<Mat> B;
  /// Fundamental solution of z' = B z with Z(0) = I. Smooth systems only; for
  /// impulsive systems diag_integral carries the same information in log form.
  std::vector<Mat> Z;
  std::vector<Vec> diag_integral;   ///< int_0^t b_ii
  std::vector<double> r_integral;   ///< int_0^t r(B)
  std::vector<Vec> gamma_logs;      ///< log Gamma_m(t), m = 1..k
  double alpha = 0.0;               ///< sup of |A(t)| seen by the integrator
  double max_orthogonality_error = 0.0;
  double max_lower_entry = 0.0;
  std::size_t steps = 0;

  std::size_t size() const { return t.size(); }
};

struct TriangularizeOptions {
  double max_step = 0.01;
  double refine_drift = 1e-11;  ///< halve the step while drift exceeds this
  double fail_drift = 1e-6;
  int max_refinements = 6;
};

namespace detail {

inline Mat skew_from(const Mat& c) {
  const Eigen::Index k = c.rows();
  Mat s = Mat::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < i; ++j) {
      s(i, j) = c(i, j);
      s(j, i) = -c(i, j);
    }
  return s;
}

inline Mat upper_from(const Mat& c) {
  const Eigen::Index k = c.rows();
  Mat b = Mat::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    b(i, i) = c(i, i);
    for (Eigen::Index j = i + 1; j < k; ++j) b(i, j) = c(i, j) + c(j, i);
  }
  return b;
}

inline double orthogonality_error(const Mat& u) {
  return (u.transpose() * u - Mat::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

inline double radius(const Mat& b) { return b.diagonal().cwiseAbs().maxCoeff(); }

struct FrameState {
  Mat u, z, x;
  Vec lam;
  double rint = 0.0;

  FrameState plus(const FrameState& d, double h) const {
    return {u + h * d.u, z + h * d.z, x + h * d.x, lam + h * d.lam, rint + h * d.rint};
  }
};

inline Vec cumulative(const Vec& v) {
  Vec c(v.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) c(i) = (acc += v(i));
  return c;
}

}  // namespace detail

/// Continuous or impulsive triangularization of the system along the basis.
/// Smooth systems are integrated on t_grid; impulsive systems produce one node
/// per fiber end up to t_grid.back().
inline TriangularTrajectory triangularize(const LinearSystem& sys, const Mat& basis,
                                          std::span<const double> t_grid,
                                          const TriangularizeOptions& opt = {}) {
  const int k = sys.dim();
  if (basis.rows() != k || basis.cols() != k) throw ShapeError("basis has wrong shape");
  if (t_grid.empty() || t_grid.front() != 0.0) throw std::invalid_argument("t_grid must start at 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("t_grid must increase");

  const QR g0 = gram_schmidt(basis);
  Vec gamma_acc(k);
  for (int i = 0; i < k; ++i) gamma_acc(i) = std::log(g0.r(i, i));

  TriangularTrajectory tr;
  tr.k = k;
  tr.impulsive = sys.is_impulsive();
  const Mat I = Mat::Identity(k, k);

  auto push_node = [&](double t, const Mat& u, const Mat& b, const Mat* z, const Vec& lam, double rint) {
    tr.t.push_back(t);
    tr.U.push_back(u);
    tr.B.push_back(b);
    if (z) tr.Z.push_back(*z);
    tr.diag_integral.push_back(lam);
    tr.r_integral.push_back(rint);
    tr.gamma_logs.push_back(detail::cumulative(gamma_acc));
    tr.max_orthogonality_error = std::max(tr.max_orthogonality_error, detail::orthogonality_error(u));
  };

  if (sys.is_impulsive()) {
    Mat q = g0.q;
    Vec lam = Vec::Zero(k);
    double rint = 0.0;
    const double horizon = t_grid.back();
    Mat b0 = Mat::Zero(k, k);
    if (!sys.segments().empty()) {
      const QR f = qr_positive(sys.segments().front().factor * q);
      for (int i = 0; i < k; ++i) b0(i, i) = std::log(f.r(i, i)) / sys.segments().front().length;
    }
    push_node(0.0, q, b0, nullptr, lam, rint);
    for (const auto& sg : sys.segments()) {
      if (sg.t_begin >= horizon) break;
      const double t_end = std::min(sg.t_end, horizon);
      const QR f = qr_positive(sg.factor * q);
      const double w = (t_end - sg.t_begin) / sg.length;
      Mat b = Mat::Zero(k, k);
      for (int i = 0; i < k; ++i) {
        const double lr = std::log(f.r(i, i));
        b(i, i) = lr / sg.length;
        lam(i) += w * lr;
        gamma_acc(i) += w * lr;
      }
      rint += (t_end - sg.t_begin) * detail::radius(b);
      const bool done = sg.completes && t_end == sg.t_end;
      if (done) q = f.q;
      push_node(t_end, q, b, nullptr, lam, rint);
      ++tr.steps;
    }
    return tr;
  }

  // smooth: frame flow U' = U S, with Z' = B Z and X' = A X carried alongside
  auto deriv = [&](double t, const detail::FrameState& s) {
    const Mat a = sys.generator(t);
    tr.alpha = std::max(tr.alpha, spectral_norm(a));
    const Mat c = s.u.transpose() * a * s.u;
    const Mat sk = detail::skew_from(c);
    const Mat b = detail::upper_from(c);
    detail::FrameState d;
    d.u = s.u * sk;
    d.z = b * s.z;
    d.x = a * s.x;
    d.lam = b.diagonal();
    d.rint = detail::radius(b);
    return d;
  };
  auto measured_b = [&](double t, const Mat& u) {
    const Mat a = sys.generator(t);
    tr.alpha = std::max(tr.alpha, spectral_norm(a));
    const Mat c = u.transpose() * a * u;
    const Mat b = c - (u.transpose() * u) * detail::skew_from(c);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < i; ++j) tr.max_lower_entry = std::max(tr.max_lower_entry, std::abs(b(i, j)));
    return b;
  };

  detail::FrameState st{g0.q, I, g0.q, Vec::Zero(k), 0.0};
  push_node(0.0, st.u, measured_b(0.0, st.u), &st.z, st.lam, st.rint);
  for (std::size_t j = 1; j < t_grid.size(); ++j) {
    const double t0 = t_grid[j - 1], t1 = t_grid[j];
    int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / opt.max_step - 1e-12)));
    detail::FrameState out;
    double drift = 0.0;
    for (int attempt = 0;; ++attempt) {
      out = st;
      const double h = (t1 - t0) / n;
      for (int m = 0; m < n; ++m) {
        const double t = t0 + m * h;
        const auto k1 = deriv(t, out);
        const auto k2 = deriv(t + 0.5 * h, out.plus(k1, 0.5 * h));
        const auto k3 = deriv(t + 0.5 * h, out.plus(k2, 0.5 * h));
        const auto k4 = deriv(t + h, out.plus(k3, h));
        out.u += h / 6 * (k1.u + 2 * k2.u + 2 * k3.u + k4.u);
        out.z += h / 6 * (k1.z + 2 * k2.z + 2 * k3.z + k4.z);
        out.x += h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
        out.lam += h / 6 * (k1.lam + 2 * k2.lam + 2 * k3.lam + k4.lam);
        out.rint += h / 6 * (k1.rint + 2 * k2.rint + 2 * k3.rint + k4.rint);
      }
      tr.steps += n;
      drift = detail::orthogonality_error(out.u);
      if (drift <= opt.refine_drift || attempt >= opt.max_refinements) break;
      n *= 2;
    }
    if (drift > opt.fail_drift)
      throw StepSizeFailure("frame orthogonality drift " + std::to_string(drift) + " at t=" +
                            std::to_string(t1));
    // back onto the orthogonal group; U Z is unchanged
    const QR fu = qr_positive(out.u);
    out.u = fu.q;
    out.z = fu.r * out.z;
    const QR fx = qr_positive(out.x);
    for (int i = 0; i < k; ++i) gamma_acc(i) += std::log(fx.r(i, i));
    out.x = fx.q;
    st = out;
    push_node(t1, st.u, measured_b(t1, st.u), &st.z, st.lam, st.rint);
  }
  return tr;
}

/// Index of the node at time t (within 1e-9).
inline std::size_t node_index(const TriangularTrajectory& tr, double t) {
  auto it = std::lower_bound(tr.t.begin(), tr.t.end(), t - 1e-9);
  if (it == tr.t.end() || std::abs(*it - t) > 1e-9) throw std::invalid_argument("time is not a grid node");
  return static_cast<std::size_t>(it - tr.t.begin());
}

/// (1/t) log Gamma_m(t).
inline double gamma_volume_rate(const TriangularTrajectory& tr, int m, double t) {
  if (m < 1 || m > tr.k) throw std::invalid_argument("m out of range");
  if (!(t > 0.0)) throw std::invalid_argument("t must be positive");
  return tr.gamma_logs[node_index(tr, t)](m - 1) / t;
}

struct RadiusPath {
  std::vector<double> t;
  std::vector<double> r;         ///< r(B) at nodes (impulsive: density of the fiber ending there)
  std::vector<double> integral;  ///< int_0^t r(B)
};

inline RadiusPath spectral_radius_path(const TriangularTrajectory& tr) {
  RadiusPath p{tr.t, {}, tr.r_integral};
  p.r.reserve(tr.size());
  for (const auto& b : tr.B) p.r.push_back(detail::radius(b));
  return p;
}

inline double time_avg_spectral_radius(const TriangularTrajectory& tr, double horizon) {
  return tr.r_integral[node_index(tr, horizon)] / horizon;
}

/// Integrated diagonal at an arbitrary time (linear within a fiber or node gap).
inline Vec integrated_diagonal_at(const TriangularTrajectory& tr, double t) {
  if (t <= tr.t.front()) return tr.diag_integral.front();
  auto it = std::lower_bound(tr.t.begin(), tr.t.end(), t);
  if (it == tr.t.end()) return tr.diag_integral.back();
  const std::size_t j = static_cast<std::size_t>(it - tr.t.begin());
  if (*it == t) return tr.diag_integral[j];
  if (tr.impulsive) return tr.diag_integral[j - 1] + (t - tr.t[j - 1]) * tr.B[j].diagonal();
  const double w = (t - tr.t[j - 1]) / (tr.t[j] - tr.t[j - 1]);
  return (1 - w) * tr.diag_integral[j - 1] + w * tr.diag_integral[j];
}

struct IndependenceCheck {
  double max_pointwise = 0.0;   ///< max over nodes of |r_v(t) - r_w(t)|
  double max_integrated = 0.0;  ///< max over nodes of |int r_v - int r_w|
  /// the compared quantity: pointwise for smooth systems, integrated otherwise
  double deviation() const { return std::max(max_pointwise, max_integrated); }
};

inline IndependenceCheck check_basis_independence(const LinearSystem& sys, const Mat& basis1, const Mat& basis2,
                                                  std::span<const double> t_grid,
                                                  const TriangularizeOptions& opt = {}) {
  const auto a = triangularize(sys, basis1, t_grid, opt);
  const auto b = triangularize(sys, basis2, t_grid, opt);
  IndependenceCheck c;
  const auto ra = spectral_radius_path(a), rb = spectral_radius_path(b);
  for (std::size_t i = 0; i < std::min(ra.t.size(), rb.t.size()); ++i) {
    c.max_integrated = std::max(c.max_integrated, std::abs(ra.integral[i] - rb.integral[i]));
    if (!sys.is_impulsive()) c.max_pointwise = std::max(c.max_pointwise, std::abs(ra.r[i] - rb.r[i]));
  }
  if (!sys.is_impulsive()) c.max_integrated = 0.0;
  return c;
}

struct RhoCheck {
  double lhs = 0.0;  ///< |r(B(0))|
  double rhs = 0.0;  ///< K |A(0)|
  double K = 1.0;
  bool pass = false;
};

/// Operator norm (Frobenius inner product on matrix space) of the derivative
/// of the Gram-Schmidt frame map at the identity, by central differences.
inline double gram_schmidt_derivative_norm(int k, double h = 1e-6) {
  const Mat I = Mat::Identity(k, k);
  Mat jac(k * k, k * k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      Mat e = Mat::Zero(k, k);
      e(a, b) = 1.0;
      const Mat d = (gram_schmidt_frame(I + h * e) - gram_schmidt_frame(I - h * e)) / (2 * h);
      jac.col(a * k + b) = Eigen::Map<const Vec>(d.data(), k * k);
    }
  return spectral_norm(jac);
}

inline RhoCheck check_rho_bound(const LinearSystem& sys) {
  if (sys.is_impulsive()) throw std::invalid_argument("check_rho_bound needs a smooth generator");
  const int k = sys.dim();
  const Mat a0 = sys.generator(0.0);
  RhoCheck c;
  // standard basis: U(0) = I, so B(0) = upper part of A(0) and its diagonal is A(0)'s
  c.lhs = detail::radius(detail::upper_from(a0));
  c.K = 1.0 + gram_schmidt_derivative_norm(k);
  c.rhs = c.K * spectral_norm(a0);
  c.pass = c.lhs <= c.rhs;
  return c;
}

/// Seeded random generator A(t) = M0 + M1 sin(w1 t) + M2 cos(w2 t) with
/// N(0, 1/k) entries and w in [0.5, 2]; used by the demos and audits.
inline LinearSystem random_smooth_system(int k, std::uint64_t seed, std::uint64_t index) {
  auto g = stream(seed, index, 0x706572726f6eULL);
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(k)));
  Mat m0(k, k), m1(k, k), m2(k, k);
  for (Mat* m : {&m0, &m1, &m2})
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) (*m)(i, j) = nd(g);
  const double w1 = 0.5 + 1.5 * uniform01(g), w2 = 0.5 + 1.5 * uniform01(g);
  return LinearSystem::smooth(k, [=](double t) -> Mat { return m0 + m1 * std::sin(w1 * t) + m2 * std::cos(w2 * t); });
}

/// One-dimensional bundle cocycle along the orbit of p as an impulsive system.
inline LinearSystem bundle_system(const SuspensionFlow& flow, const FlowPoint& p, double horizon, Bundle bundle,
                                  int n_iter = 60, const Vec2* start_dir = nullptr) {
  const auto steps = bundle_steps(flow, p, horizon, bundle, n_iter, start_dir);
  std::vector<ImpulseSegment> segs;
  double t = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& st = steps[i];
    if (st.duration <= 0.0) continue;
    Mat f(1, 1);
    f(0, 0) = std::exp(st.log_growth);
    segs.push_back({t, t + st.duration, st.roof, f, st.crosses});
    t += st.duration;
  }
  return LinearSystem::impulsive(1, std::move(segs));
}

/// Full base-tangent derivative along the orbit as an impulsive 2x2 system.
inline LinearSystem tangent_system(const SuspensionFlow& flow, const FlowPoint& p, double horizon) {
  std::vector<ImpulseSegment> segs;
  double t = 0.0;
  walk(flow, p, horizon, [&](const FiberSegment& seg) {
    segs.push_back({t, t + seg.duration(), seg.roof, Mat(flow.base.jacobian(seg.x)), seg.crosses});
    t += seg.duration();
  });
  return LinearSystem::impulsive(2, std::move(segs));
}

/// |int_s^{s+t} diag B_p - int_0^t diag B_{f_s p}| for the one-dimensional
/// bundle, with the frame at f_s p being the pushforward of the frame at p.
inline double cocycle_shift_check(const SuspensionFlow& flow, Bundle bundle, const FlowPoint& p, double s,
                                  double t, int n_iter = 60) {
  if (s == 0.0 || t == 0.0) return 0.0;
  const double grid_p[] = {0.0, s + t};
  const auto tp = triangularize(bundle_system(flow, p, s + t, bundle, n_iter), Mat::Identity(1, 1), grid_p);
  const double lhs = (integrated_diagonal_at(tp, s + t) - integrated_diagonal_at(tp, s))(0);
  const FlowPoint q = evolve(flow, p, s);
  Vec2 dir;
  const Vec2* start = nullptr;
  if (bundle == Bundle::Unstable) {
    dir = jacobian_cocycle(flow, p, s) * unstable_direction(flow.base, p.x, n_iter);
    start = &dir;
  }
  const double grid_q[] = {0.0, t};
  const auto tq = triangularize(bundle_system(flow, q, t, bundle, n_iter, start), Mat::Identity(1, 1), grid_q);
  const double rhs = integrated_diagonal_at(tq, t)(0);
  return std::abs(lhs - rhs);
}

/// Same check for the full tangent cocycle with the frame transported by
/// the derivative of f_s.
inline double cocycle_shift_check_tangent(const SuspensionFlow& flow, const FlowPoint& p, double s, double t) {
  if (s == 0.0 || t == 0.0) return 0.0;
  const double grid_p[] = {0.0, s + t};
  const auto tp = triangularize(tangent_system(flow, p, s + t), Mat::Identity(2, 2), grid_p);
  const Vec lhs = integrated_diagonal_at(tp, s + t) - integrated_diagonal_at(tp, s);
  const FlowPoint q = evolve(flow, p, s);
  const double grid_q[] = {0.0, t};
  const auto tq = triangularize(tangent_system(flow, q, t), Mat(jacobian_cocycle(flow, p, s)), grid_q);
  const Vec rhs = integrated_diagonal_at(tq, t);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

}  // namespace oslab
