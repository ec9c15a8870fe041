#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace oslab {

/// amplitude * cos(omega * tau + phase)
struct Harmonic {
  double amplitude = 0.0;
  double omega = 0.0;
  double phase = 0.0;
};

/// An integrand along one orbit, stored as consecutive pieces. On piece i the
/// integrand is level_i + sum_j a_j cos(w_j tau + phase_j), tau in [0, duration_i].
/// Pieces without harmonics are constant, which covers base-only observables.
class IntegrandPath {
 public:
  IntegrandPath() { begin_.push_back(0); }

  /// One piece lasting `duration` (exactly in time) whose integrand is
  /// described by `level` plus the given harmonics.
  void add_piece(double duration, double level, std::span<const Harmonic> h = {}) {
    duration_.push_back(duration);
    level_.push_back(level);
    harm_.insert(harm_.end(), h.begin(), h.end());
    begin_.push_back(static_cast<std::uint32_t>(harm_.size()));
    horizon_ += duration;
    double amp = 0.0;
    for (const auto& c : h) amp += std::abs(c.amplitude);
    hi_.push_back(level + amp);
    lo_.push_back(level - amp);
  }

  /// A single-piece path following an explicit trigonometric integrand.
  static IntegrandPath explicit_integrand(double horizon, double level,
                                          std::span<const Harmonic> h) {
    IntegrandPath p;
    p.add_piece(horizon, level, h);
    return p;
  }

  std::size_t size() const { return duration_.size(); }
  double duration(std::size_t i) const { return duration_[i]; }
  double level(std::size_t i) const { return level_[i]; }
  double upper(std::size_t i) const { return hi_[i]; }
  double lower(std::size_t i) const { return lo_[i]; }
  bool constant_piece(std::size_t i) const { return begin_[i] == begin_[i + 1]; }
  std::span<const Harmonic> harmonics(std::size_t i) const {
    return {harm_.data() + begin_[i], harm_.data() + begin_[i + 1]};
  }
  double horizon() const { return horizon_; }

  /// Bound on sup |integrand| over the whole path.
  double sup_abs() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max({m, std::abs(hi_[i]), std::abs(lo_[i])});
    return m;
  }

  double value(std::size_t i, double tau) const {
    double v = level_[i];
    for (const auto& c : harmonics(i)) v += c.amplitude * std::cos(c.omega * tau + c.phase);
    return v;
  }

  /// Integral of the piece integrand over [0, tau].
  double integral(std::size_t i, double tau) const {
    double v = level_[i] * tau;
    for (const auto& c : harmonics(i)) {
      if (c.omega == 0.0)
        v += c.amplitude * std::cos(c.phase) * tau;
      else
        v += c.amplitude / c.omega * (std::sin(c.omega * tau + c.phase) - std::sin(c.phase));
    }
    return v;
  }

  /// Integral over the whole path.
  double total() const {
    double g = 0.0;
    for (std::size_t i = 0; i < size(); ++i) g += integral(i, duration_[i]);
    return g;
  }

 private:
  std::vector<double> duration_, level_, hi_, lo_;
  std::vector<Harmonic> harm_;
  std::vector<std::uint32_t> begin_;
  double horizon_ = 0.0;
};

}  // namespace oslab
