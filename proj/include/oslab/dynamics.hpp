#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "oslab/core/errors.hpp"
#include "oslab/core/linalg.hpp"
#include "oslab/core/rng.hpp"
#include "oslab/path.hpp"

namespace oslab {

/// Reduce to [0,1).
inline double wrap01(double v) {
  const double w = v - std::floor(v);
  return w >= 1.0 ? 0.0 : w;
}

inline Vec2 wrap01(const Vec2& v) { return {wrap01(v(0)), wrap01(v(1))}; }

/// amplitude * cos(2 pi (k1 x1 + k2 x2) + phase) * cos(2 pi m s / r(x)).
/// fiber_mode m = 0 gives a function of the base point only.
struct TrigTerm {
  int k1 = 0;
  int k2 = 0;
  double amplitude = 0.0;
  double phase = 0.0;
  int fiber_mode = 0;

  double base_factor(const Vec2& x) const {
    return amplitude * std::cos(two_pi * (k1 * x(0) + k2 * x(1)) + phase);
  }
};

namespace detail {

// int cos(2 pi k.x + p) cos(2 pi l.x + q) dx over the torus
inline double trig_product_mean(const TrigTerm& a, const TrigTerm& b) {
  double v = 0.0;
  if (a.k1 + b.k1 == 0 && a.k2 + b.k2 == 0) v += 0.5 * std::cos(a.phase + b.phase);
  if (a.k1 == b.k1 && a.k2 == b.k2) v += 0.5 * std::cos(a.phase - b.phase);
  return v * a.amplitude * b.amplitude;
}

inline double trig_mean(const TrigTerm& a) {
  return (a.k1 == 0 && a.k2 == 0) ? a.amplitude * std::cos(a.phase) : 0.0;
}

}  // namespace detail

class RoofFunction {
 public:
  RoofFunction(double r0 = 1.0, std::vector<TrigTerm> terms = {}) : r0_(r0), terms_(std::move(terms)) {
    double amp = 0.0;
    for (const auto& t : terms_) {
      if (t.fiber_mode != 0) throw ShapeError("roof terms cannot depend on the fiber");
      amp += std::abs(t.amplitude);
    }
    if (!(r0_ > amp)) throw BoundError("roof: r0 must exceed the sum of |amplitudes|");
    r_min_ = r0_ - amp;
    r_max_ = r0_ + amp;
    mean_ = r0_;
    for (const auto& t : terms_) mean_ += detail::trig_mean(t);
  }

  double operator()(const Vec2& x) const {
    double r = r0_;
    for (const auto& t : terms_) r += t.base_factor(x);
    return r;
  }

  double r0() const { return r0_; }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  /// Lebesgue integral of r over the torus.
  double mean() const { return mean_; }
  bool constant() const { return terms_.empty(); }
  const std::vector<TrigTerm>& terms() const { return terms_; }

 private:
  double r0_;
  std::vector<TrigTerm> terms_;
  double r_min_ = 0.0, r_max_ = 0.0, mean_ = 0.0;
};

/// Real trigonometric polynomial on the suspension.
class Observable {
 public:
  Observable(double constant = 0.0, std::vector<TrigTerm> terms = {}) : c_(constant) {
    for (auto& t : terms)
      if (t.amplitude != 0.0) terms_.push_back(t);
    for (const auto& t : terms_)
      if (t.fiber_mode < 0) throw ShapeError("fiber mode must be non-negative");
  }

  static Observable constant(double c) { return Observable(c); }

  /// amplitude * cos(2 pi x1) plus an optional constant.
  static Observable cosine(double amplitude, double offset = 0.0) {
    return Observable(offset, {TrigTerm{1, 0, amplitude, 0.0, 0}});
  }

  double constant_term() const { return c_; }
  const std::vector<TrigTerm>& terms() const { return terms_; }
  bool is_constant() const { return terms_.empty(); }
  bool base_only() const {
    for (const auto& t : terms_)
      if (t.fiber_mode != 0) return false;
    return true;
  }

  /// Value of the fiber-independent part.
  double base_value(const Vec2& x) const {
    double v = c_;
    for (const auto& t : terms_)
      if (t.fiber_mode == 0) v += t.base_factor(x);
    return v;
  }

  double value(const Vec2& x, double s, double roof) const {
    double v = c_;
    for (const auto& t : terms_) {
      double f = t.base_factor(x);
      if (t.fiber_mode != 0) f *= std::cos(two_pi * t.fiber_mode * s / roof);
      v += f;
    }
    return v;
  }

  /// |c| + sum |a|, an upper bound for sup |u|.
  double sup_norm() const {
    double m = std::abs(c_);
    for (const auto& t : terms_) m += std::abs(t.amplitude);
    return m;
  }

  /// Integral against the normalized volume of the suspension.
  double mean(const RoofFunction& roof) const {
    double num = c_ * roof.mean();
    for (const auto& t : terms_) {
      if (t.fiber_mode != 0) continue;  // integrates to zero along each fiber
      num += roof.r0() * detail::trig_mean(t);
      for (const auto& rt : roof.terms()) num += detail::trig_product_mean(t, rt);
    }
    return num / roof.mean();
  }

  Observable scaled(double a) const {
    Observable o(*this);
    o.c_ *= a;
    for (auto& t : o.terms_) t.amplitude *= a;
    if (a == 0.0) o.terms_.clear();
    return o;
  }

  Observable plus_constant(double a) const {
    Observable o(*this);
    o.c_ += a;
    return o;
  }

 private:
  double c_;
  std::vector<TrigTerm> terms_;
};

/// f = A o h on the 2-torus with h(x1, x2) = (x1 + kappa/(2 pi) sin(2 pi x2), x2).
class BaseMap {
 public:
  static Mat2i cat() { return (Mat2i() << 2, 1, 1, 1).finished(); }

  explicit BaseMap(const Mat2i& a = cat(), double kappa = 0.0) : a_(a), kappa_(kappa) {
    const int det = a_(0, 0) * a_(1, 1) - a_(0, 1) * a_(1, 0);
    if (det != 1 && det != -1) throw BoundError("base matrix must be unimodular");
    if (std::abs(a_.trace()) <= 2) throw BoundError("base matrix must be hyperbolic (|trace| > 2)");
    if (!(kappa_ >= 0.0)) throw BoundError("kappa must be non-negative");
    inv_ << det * a_(1, 1), -det * a_(0, 1), -det * a_(1, 0), det * a_(0, 0);
    af_ = a_.cast<double>();
  }

  const Mat2i& matrix() const { return a_; }
  const Mat2i& inverse_matrix() const { return inv_; }
  double kappa() const { return kappa_; }

  Vec2 operator()(const Vec2& x) const {
    double x1 = x(0);
    if (kappa_ != 0.0) x1 = wrap01(x1 + kappa_ / two_pi * std::sin(two_pi * x(1)));
    return wrap01(Vec2(a_(0, 0) * x1 + a_(0, 1) * x(1), a_(1, 0) * x1 + a_(1, 1) * x(1)));
  }

  Vec2 inverse(const Vec2& y) const {
    Vec2 z = wrap01(Vec2(inv_(0, 0) * y(0) + inv_(0, 1) * y(1), inv_(1, 0) * y(0) + inv_(1, 1) * y(1)));
    if (kappa_ != 0.0) z(0) = wrap01(z(0) - kappa_ / two_pi * std::sin(two_pi * z(1)));
    return z;
  }

  Mat2 jacobian(const Vec2& x) const {
    Mat2 h = Mat2::Identity();
    h(0, 1) = kappa_ * std::cos(two_pi * x(1));
    return af_ * h;
  }

 private:
  Mat2i a_, inv_;
  Mat2 af_;
  double kappa_;
};

struct FlowPoint {
  Vec2 x = Vec2::Zero();
  double s = 0.0;
};

struct SuspensionFlow {
  BaseMap base;
  RoofFunction roof;
};

/// Portion of one fiber visited by an orbit. `crosses` is set when the orbit
/// leaves the top of this fiber (and enters the next base point).
struct FiberSegment {
  Vec2 x;
  double roof;
  double s_begin;
  double s_end;
  bool crosses;
  double duration() const { return s_end - s_begin; }
};

/// Runs the orbit forward for time t >= 0, calling visit(segment) for every
/// fiber portion with positive length. Returns the end point.
template <class Visit>
FlowPoint walk(const SuspensionFlow& flow, const FlowPoint& p, double t, Visit&& visit) {
  Vec2 x = p.x;
  double s = p.s;
  double remaining = t;
  for (;;) {
    const double r = flow.roof(x);
    const double room = r - s;
    if (remaining < room) {
      if (remaining > 0.0) visit(FiberSegment{x, r, s, s + remaining, false});
      return {x, s + remaining};
    }
    visit(FiberSegment{x, r, s, r, true});
    remaining -= room;
    x = flow.base(x);
    s = 0.0;
  }
}

inline std::vector<FiberSegment> orbit_segments(const SuspensionFlow& flow, const FlowPoint& p, double t) {
  std::vector<FiberSegment> out;
  walk(flow, p, t, [&](const FiberSegment& seg) { out.push_back(seg); });
  return out;
}

/// f_t(p) for any finite t.
inline FlowPoint evolve(const SuspensionFlow& flow, const FlowPoint& p, double t) {
  if (t >= 0.0) return walk(flow, p, t, [](const FiberSegment&) {});
  Vec2 x = p.x;
  double s = p.s;
  double rem = t;
  while (s + rem < 0.0) {
    rem += s;
    x = flow.base.inverse(x);
    s = flow.roof(x);
  }
  return {x, s + rem};
}

/// Base-tangent derivative of f_t: product of the crossing Jacobians in order.
inline Mat2 jacobian_cocycle(const SuspensionFlow& flow, const FlowPoint& p, double t) {
  Mat2 j = Mat2::Identity();
  if (t >= 0.0) {
    walk(flow, p, t, [&](const FiberSegment& seg) {
      if (seg.crosses) j = flow.base.jacobian(seg.x) * j;
    });
    return j;
  }
  Vec2 x = p.x;
  double s = p.s;
  double rem = t;
  while (s + rem < 0.0) {
    rem += s;
    x = flow.base.inverse(x);
    s = flow.roof(x);
    j = flow.base.jacobian(x).inverse() * j;
  }
  return j;
}

namespace detail {

inline Vec2 orient(Vec2 v) {
  v.normalize();
  const double lead = std::abs(v(0)) > 1e-12 ? v(0) : v(1);
  return lead < 0 ? Vec2(-v) : v;
}

inline double direction_gap(const Vec2& a, const Vec2& b) {
  return std::min((a - b).norm(), (a + b).norm());
}

inline const Vec2& seed_vector() {
  static const Vec2 v = Vec2(0.8, 0.6);
  return v;
}

// push the seed vector along y[n-1] <- ... <- y[0] = x, starting at y[from]
inline Vec2 push_forward_from(const BaseMap& f, const std::vector<Vec2>& back, std::size_t from) {
  Vec2 v = seed_vector();
  for (std::size_t k = from; k >= 1; --k) {
    v = f.jacobian(back[k]) * v;
    v.normalize();
  }
  return v;
}

}  // namespace detail

/// Unstable direction at x: a seed vector placed n_back crossings into the past
/// and pushed forward to x. Certified against the (n_back - 1) iterate.
inline Vec2 unstable_direction(const BaseMap& f, const Vec2& x, int n_back, double tol = 1e-8) {
  if (n_back < 1) throw std::invalid_argument("n_back must be >= 1");
  std::vector<Vec2> back(static_cast<std::size_t>(n_back) + 1);
  back[0] = x;
  for (std::size_t k = 1; k < back.size(); ++k) back[k] = f.inverse(back[k - 1]);
  const Vec2 v = detail::orient(detail::push_forward_from(f, back, back.size() - 1));
  const Vec2 w = detail::orient(detail::push_forward_from(f, back, back.size() - 2));
  if (n_back > 1 && detail::direction_gap(v, w) > tol)
    throw NonConvergence("unstable direction not converged after " + std::to_string(n_back) +
                         " crossings");
  return v;
}

/// Stable direction at x: a seed placed n_fwd crossings ahead, pulled back.
inline Vec2 stable_direction(const BaseMap& f, const Vec2& x, int n_fwd, double tol = 1e-8) {
  if (n_fwd < 1) throw std::invalid_argument("n_fwd must be >= 1");
  std::vector<Vec2> fwd(static_cast<std::size_t>(n_fwd) + 1);
  fwd[0] = x;
  for (std::size_t k = 1; k < fwd.size(); ++k) fwd[k] = f(fwd[k - 1]);
  auto pull = [&](std::size_t from) {
    Vec2 v = detail::seed_vector();
    for (std::size_t k = from; k-- > 0;) {
      v = f.jacobian(fwd[k]).inverse() * v;
      v.normalize();
    }
    return detail::orient(v);
  };
  const Vec2 v = pull(fwd.size() - 1);
  const Vec2 w = pull(fwd.size() - 2);
  if (n_fwd > 1 && detail::direction_gap(v, w) > tol)
    throw NonConvergence("stable direction not converged after " + std::to_string(n_fwd) +
                         " crossings");
  return v;
}

inline FlowPoint sample_volume_point(const SuspensionFlow& flow, std::uint64_t seed, std::uint64_t index,
                                     std::uint64_t* proposals = nullptr) {
  auto g = stream(seed, index, 0x766f6c756d65ULL);
  std::uint64_t tries = 0;
  for (;;) {
    ++tries;
    const Vec2 x(uniform01(g), uniform01(g));
    const double h = uniform01(g);
    if (flow.roof.constant()) {
      if (proposals) *proposals = tries;
      return {x, h * flow.roof.r0()};
    }
    const double s = h * flow.roof.r_max();
    if (s < flow.roof(x)) {
      if (proposals) *proposals = tries;
      return {x, s};
    }
  }
}

/// N points from the normalized volume; deterministic in seed.
inline std::vector<FlowPoint> sample_volume(const SuspensionFlow& flow, std::uint64_t seed, std::size_t n,
                                            std::uint64_t* proposals = nullptr) {
  std::vector<FlowPoint> out(n);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t k = 0;
    out[i] = sample_volume_point(flow, seed, i, &k);
    total += k;
  }
  if (proposals) *proposals = total;
  return out;
}

/// Integral of u over one fiber portion, in closed form.
inline double segment_integral(const Observable& u, const FiberSegment& seg) {
  double v = u.constant_term() * seg.duration();
  for (const auto& t : u.terms()) {
    const double b = t.base_factor(seg.x);
    if (t.fiber_mode == 0) {
      v += b * seg.duration();
    } else {
      const double w = two_pi * t.fiber_mode / seg.roof;
      v += b / w * (std::sin(w * seg.s_end) - std::sin(w * seg.s_begin));
    }
  }
  return v;
}

/// Integral of u along the orbit of p over [0, t].
inline double integrate_observable(const SuspensionFlow& flow, const Observable& u, const FlowPoint& p,
                                   double t) {
  if (t < 0.0) throw std::invalid_argument("integrate_observable expects t >= 0");
  if (u.is_constant()) return u.constant_term() * t;
  double acc = 0.0;
  walk(flow, p, t, [&](const FiberSegment& seg) { acc += segment_integral(u, seg); });
  return acc;
}

/// The integrand u(f_tau p), tau in [0, T], as a piecewise trigonometric path.
inline IntegrandPath observable_path(const SuspensionFlow& flow, const Observable& u, const FlowPoint& p,
                                     double horizon) {
  IntegrandPath path;
  std::vector<Harmonic> h;
  walk(flow, p, horizon, [&](const FiberSegment& seg) {
    h.clear();
    double level = u.constant_term();
    for (const auto& t : u.terms()) {
      const double b = t.base_factor(seg.x);
      if (t.fiber_mode == 0) {
        level += b;
      } else {
        const double w = two_pi * t.fiber_mode / seg.roof;
        h.push_back({b, w, w * seg.s_begin});
      }
    }
    path.add_piece(seg.duration(), level, h);
  });
  return path;
}

enum class Bundle { Unstable, Stable };

inline const char* bundle_name(Bundle b) { return b == Bundle::Unstable ? "unstable" : "stable"; }

/// One fiber portion of an orbit together with the expansion factor
/// c = |Df(x) e(x)| of the bundle direction at its base point.
struct BundleStep {
  Vec2 x;
  double roof;
  double duration;
  bool crosses;
  double log_growth;
  double density() const { return log_growth / roof; }
};

/// Walks the orbit and evaluates the one-dimensional bundle cocycle along it.
/// The suspension is given the continuous metric |v| c(x)^{s/r(x)} on the
/// bundle, in which the growth rate is the constant log c(x)/r(x) on each fiber.
inline std::vector<BundleStep> bundle_steps(const SuspensionFlow& flow, const FlowPoint& p, double horizon,
                                            Bundle bundle, int n_iter = 60, const Vec2* start_dir = nullptr) {
  std::vector<BundleStep> steps;
  walk(flow, p, horizon, [&](const FiberSegment& seg) {
    steps.push_back({seg.x, seg.roof, seg.duration(), seg.crosses, 0.0});
  });
  if (steps.empty()) {
    // zero horizon: still report the growth at the starting base point
    steps.push_back({p.x, flow.roof(p.x), 0.0, false, 0.0});
  }
  const BaseMap& f = flow.base;
  if (bundle == Bundle::Unstable) {
    Vec2 e = start_dir ? Vec2(start_dir->normalized()) : unstable_direction(f, steps.front().x, n_iter);
    for (auto& st : steps) {
      const Vec2 w = f.jacobian(st.x) * e;
      const double c = w.norm();
      st.log_growth = std::log(c);
      e = w / c;
    }
  } else {
    // pulled back from the far end of the window; start_dir is not used here
    Vec2 e = stable_direction(f, f(steps.back().x), n_iter);
    for (std::size_t k = steps.size(); k-- > 0;) {
      const Vec2 w = f.jacobian(steps[k].x).inverse() * e;
      const double n = w.norm();
      steps[k].log_growth = -std::log(n);
      e = w / n;
    }
  }
  return steps;
}

/// Growth-rate path of the bundle in the adapted metric. With `absolute`, the
/// pieces carry |rate| instead.
inline IntegrandPath bundle_rate_path(const std::vector<BundleStep>& steps, bool absolute) {
  IntegrandPath path;
  for (const auto& st : steps) {
    if (st.duration <= 0.0) continue;
    const double d = st.density();
    path.add_piece(st.duration, absolute ? std::abs(d) : d);
  }
  return path;
}

}  // namespace oslab
