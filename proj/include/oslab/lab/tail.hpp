#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "oslab/core/errors.hpp"
#include "oslab/core/rng.hpp"
#include "oslab/core/stats.hpp"
#include "oslab/regularity.hpp"
#include "oslab/thermo.hpp"

namespace oslab::lab {

struct HillEstimate {
  double p_hat = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  ///< bootstrap percentile interval, 95%
  std::size_t k = 0, n = 0, resamples = 0;
};

namespace detail {

// k / sum_{i<k} (L_(i) - L_(k)) with L sorted descending; NaN when the top is flat
inline double hill_from_logs(std::vector<double>& logs, std::size_t k) {
  std::nth_element(logs.begin(), logs.begin() + k, logs.end(), std::greater<>());
  const double thr = logs[k];
  std::vector<double> exc(k);
  for (std::size_t i = 0; i < k; ++i) exc[i] = logs[i] - thr;
  const double s = pairwise_sum(exc);
  return s > 0.0 ? static_cast<double>(k) / s : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Tail index p of m{X > lambda} ~ lambda^{-p} from the logs of X, with a
/// seeded bootstrap interval.
inline HillEstimate hill_tail_index(std::span<const double> log_values, std::size_t k, std::uint64_t seed,
                                    std::size_t resamples = 200) {
  const std::size_t n = log_values.size();
  if (k < 2 || 2 * k >= n) throw TooFewExceedances("hill_tail_index needs 2 <= k < n/2");
  std::vector<double> logs(log_values.begin(), log_values.end());
  HillEstimate h;
  h.k = k;
  h.n = n;
  h.p_hat = detail::hill_from_logs(logs, k);
  if (!std::isfinite(h.p_hat)) throw TooFewExceedances("the top order statistics are all equal");
  std::vector<double> boot;
  std::vector<double> sample(n);
  for (std::size_t b = 0; b < resamples; ++b) {
    auto g = stream(seed, b, 0x68696c6cULL);
    for (std::size_t i = 0; i < n; ++i)
      sample[i] = log_values[std::min(n - 1, static_cast<std::size_t>(uniform01(g) * static_cast<double>(n)))];
    const double p = detail::hill_from_logs(sample, k);
    if (std::isfinite(p)) boot.push_back(p);
  }
  h.resamples = boot.size();
  if (!boot.empty()) {
    std::sort(boot.begin(), boot.end());
    h.ci_lo = sorted_quantile(boot, 0.025);
    h.ci_hi = sorted_quantile(boot, 0.975);
  }
  return h;
}

/// Convenience overload for positive raw values.
inline HillEstimate hill_tail_index_values(std::span<const double> values, std::size_t k, std::uint64_t seed,
                                           std::size_t resamples = 200) {
  std::vector<double> logs;
  logs.reserve(values.size());
  for (double v : values) {
    if (!(v > 0.0)) throw std::invalid_argument("hill_tail_index: values must be positive");
    logs.push_back(std::log(v));
  }
  return hill_tail_index(logs, k, seed, resamples);
}

struct HillPoint {
  std::size_t k = 0;
  double p_hat = std::numeric_limits<double>::quiet_NaN();
};

/// p_hat against k on a geometric k grid; drift with k flags a misspecified tail.
inline std::vector<HillPoint> hill_plot(std::span<const double> log_values, std::size_t points = 20) {
  std::vector<HillPoint> out;
  const std::size_t n = log_values.size();
  if (n < 8) return out;
  const double kmax = static_cast<double>(n / 2 - 1);
  std::size_t last = 0;
  for (std::size_t i = 0; i < points; ++i) {
    const auto k = static_cast<std::size_t>(std::llround(std::pow(kmax / 2.0, static_cast<double>(i) / (points - 1)) * 2.0));
    if (k <= last || k < 2) continue;
    last = k;
    std::vector<double> logs(log_values.begin(), log_values.end());
    out.push_back({k, detail::hill_from_logs(logs, k)});
  }
  return out;
}

inline constexpr double lp_margin = 0.7;

struct LpReport {
  double eps = 0.0;
  double chi = 0.0;
  std::size_t samples = 0;
  double untruncated_fraction = 0.0;
  HillEstimate hill_D;   ///< tail of D_eps; p_hat = inf when bounded
  HillEstimate hill_T;   ///< tail of e^{T_eps}
  bool D_bounded = false, T_bounded = false;
  double p_star = 0.0;   ///< integrability threshold from the rate function
  double H = 0.0;        ///< H(chi + eps)
  bool beyond_profile = false;  ///< chi + eps past the sampled slopes; p_star = inf
  bool pass_T = false;   ///< p_hat_T >= 0.7 H(chi + eps)
  bool pass_D = false;   ///< p_hat_D >= 0.7 p*
};

/// Compares empirical tail indices of D_eps and e^{T_eps} with the thresholds
/// predicted by the rate function.
inline LpReport lp_report(std::span<const RegularityRecord> records, const EntropyProfile& prof, double chi,
                          double u_sup, double eps, std::size_t k, std::uint64_t seed) {
  LpReport r;
  r.eps = eps;
  r.chi = chi;
  r.samples = records.size();
  std::size_t untr = 0;
  std::vector<double> logD, T;
  for (const auto& rec : records) {
    untr += rec.truncated ? 0 : 1;
    logD.push_back(rec.log_D);
    T.push_back(rec.T_eps);
  }
  r.untruncated_fraction = records.empty() ? 0.0 : static_cast<double>(untr) / static_cast<double>(records.size());
  if (r.untruncated_fraction < 0.99)
    throw BoundError("fewer than 99% of the records are untruncated; raise T_max");
  if (k == 0) k = std::max<std::size_t>(10, records.size() / 100);
  const double inf = std::numeric_limits<double>::infinity();
  try {
    r.hill_D = hill_tail_index(logD, k, seed);
  } catch (const TooFewExceedances&) {
    r.D_bounded = true;
    r.hill_D.p_hat = inf;
  }
  try {
    r.hill_T = hill_tail_index(T, k, seed + 1);
  } catch (const TooFewExceedances&) {
    r.T_bounded = true;
    r.hill_T.p_hat = inf;
  }
  r.H = prof.H(chi + eps);
  try {
    r.p_star = integrability_threshold(prof, chi, u_sup, eps);
  } catch (const DegenerateProfile&) {
    r.beyond_profile = true;
    r.p_star = inf;
  }
  r.pass_T = r.hill_T.p_hat >= lp_margin * r.H;
  r.pass_D = r.hill_D.p_hat >= lp_margin * r.p_star;
  return r;
}

}  // namespace oslab::lab
