#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <vector>

#include "oslab/core/parallel.hpp"
#include "oslab/core/stats.hpp"
#include "oslab/dynamics.hpp"

namespace oslab {

struct BirkhoffSample {
  FlowPoint point;
  double horizon = 0.0;
  double integral = 0.0;
  double average() const { return integral / horizon; }
};

/// log of the multiplicative cocycle exp(int_0^t u(f_s p) ds).
inline double log_delta(const SuspensionFlow& flow, const Observable& u, const FlowPoint& p, double t) {
  return integrate_observable(flow, u, p, t);
}

struct ChiEstimate {
  double mean = 0.0;
  double half_width = 0.0;  ///< 2 standard errors
  std::vector<BirkhoffSample> samples;
};

inline ChiEstimate estimate_chi(const SuspensionFlow& flow, const Observable& u,
                                std::span<const FlowPoint> points, double horizon, unsigned workers = 1) {
  if (horizon < 1.0) throw std::invalid_argument("estimate_chi: horizon must be >= 1");
  if (points.size() < 10) throw std::invalid_argument("estimate_chi: at least 10 samples");
  ChiEstimate out;
  out.samples = parallel_map(points.size(), workers, [&](std::size_t i) {
    return BirkhoffSample{points[i], horizon, integrate_observable(flow, u, points[i], horizon)};
  });
  if (u.is_constant()) {
    out.mean = u.constant_term();
    return out;
  }
  std::vector<double> avg(points.size());
  for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = out.samples[i].average();
  const auto ms = mean_stderr(avg);
  out.mean = ms.mean;
  out.half_width = 2.0 * ms.std_error;
  return out;
}

/// Lyapunov exponents of the base-tangent derivative along the suspension
/// orbit: the frame is re-orthonormalized at every roof crossing and the log
/// diagonal factor of each crossing is spread uniformly over its fiber.
inline std::vector<double> lyapunov_qr(const SuspensionFlow& flow, const FlowPoint& p, double horizon,
                                       const Mat2& initial_frame = Mat2::Identity()) {
  if (horizon < 100.0 * flow.roof.mean())
    throw std::invalid_argument("lyapunov_qr: horizon must be at least 100 mean roof heights");
  Mat q = gram_schmidt_frame(initial_frame);
  double l0 = 0.0, l1 = 0.0;
  walk(flow, p, horizon, [&](const FiberSegment& seg) {
    const QR f = qr_positive(flow.base.jacobian(seg.x) * q);
    const double w = seg.duration() / seg.roof;
    l0 += w * std::log(f.r(0, 0));
    l1 += w * std::log(f.r(1, 1));
    if (seg.crosses) q = f.q;
  });
  std::vector<double> ex{l0 / horizon, l1 / horizon};
  std::sort(ex.begin(), ex.end(), std::greater<>());
  return ex;
}

struct VarianceEstimate {
  double sigma2 = 0.0;
  double std_error = 0.0;
  double naive = 0.0;  ///< (1/T) E[S_T^2], biased by boundary terms
  bool degenerate = false;
};

/// Asymptotic variance of the centered integral. Uses the increment
/// (E[S_2T^2] - E[S_T^2]) / T so that bounded (coboundary) parts cancel.
inline VarianceEstimate variance_sigma2(const SuspensionFlow& flow, const Observable& u, double horizon,
                                        std::size_t n, std::uint64_t seed, unsigned workers = 1) {
  if (horizon < 100.0) throw std::invalid_argument("variance_sigma2: horizon must be >= 100");
  const Observable centered = u.plus_constant(-u.mean(flow.roof));
  const auto pts = sample_volume(flow, seed, n);
  struct Pair {
    double st = 0, s2t = 0;
  };
  const auto sums = parallel_map(n, workers, [&](std::size_t i) {
    Pair pr;
    const FlowPoint mid = walk(flow, pts[i], horizon, [&](const FiberSegment& seg) {
      pr.st += segment_integral(centered, seg);
    });
    pr.s2t = pr.st + integrate_observable(flow, centered, mid, horizon);
    return pr;
  });
  std::vector<double> inc(n), first(n);
  for (std::size_t i = 0; i < n; ++i) {
    inc[i] = (sums[i].s2t * sums[i].s2t - sums[i].st * sums[i].st) / horizon;
    first[i] = sums[i].st * sums[i].st / horizon;
  }
  const auto ms = mean_stderr(inc);
  VarianceEstimate out;
  out.sigma2 = ms.mean;
  out.std_error = ms.std_error;
  out.naive = mean_stderr(first).mean;
  out.degenerate = !(out.sigma2 > 3.0 * out.std_error);
  return out;
}

}  // namespace oslab
