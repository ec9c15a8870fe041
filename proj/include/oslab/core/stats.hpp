#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "oslab/core/parallel.hpp"

namespace oslab {

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Two-pass mean and standard error with tree-ordered sums.
inline MeanStderr mean_stderr(std::span<const double> v) {
  MeanStderr out;
  out.count = v.size();
  if (v.empty()) return out;
  out.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return out;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
  const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
  out.std_error = std::sqrt(var / static_cast<double>(v.size()));
  return out;
}

struct LineFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
};

/// Ordinary (optionally weighted) least squares y ~ a + b x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y,
                        std::span<const double> w = {}) {
  LineFit f;
  const std::size_t n = x.size();
  if (n < 2) return f;
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sxx += wi * (x[i] - mx) * (x[i] - mx);
    sxy += wi * (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for a binomial proportion, z = 1.96.
inline Interval wilson_interval(std::size_t hits, std::size_t n, double z = 1.96) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double den = 1.0 + z2 / nn;
  const double mid = (p + z2 / (2 * nn)) / den;
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / den;
  return {std::max(0.0, mid - half), std::min(1.0, mid + half)};
}

/// Linear-interpolated empirical quantile of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, sorted.size() - 1);
  return sorted[i] + (pos - static_cast<double>(i)) * (sorted[j] - sorted[i]);
}

/// log(sum exp(v)) without overflow.
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  std::vector<double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) e[i] = std::exp(v[i] - m);
  return m + std::log(pairwise_sum(e));
}

}  // namespace oslab
