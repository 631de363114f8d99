#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <string>

#include "irlobs/numerics/types.hpp"

namespace irlobs::numerics {

/// Uniformly sampled vector signal with a bounded retention window.
///
/// Sample k sits at time t0 + k*dt. Samples older than the window are
/// dropped; asking for them raises WindowUnderflow rather than
/// extrapolating. Single writer, append-only.
class SampledSignal {
 public:
  static constexpr double kUnbounded = std::numeric_limits<double>::infinity();

  SampledSignal(double dt, Eigen::Index dim, double window = kUnbounded, double t0 = 0.0)
      : dt_(dt), t0_(t0), dim_(dim) {
    if (!(dt > 0.0)) throw DomainError("SampledSignal: dt must be positive");
    if (dim <= 0) throw DimensionMismatch("SampledSignal: dimension must be positive");
    if (!(window > 0.0)) throw DomainError("SampledSignal: window must be positive");
    if (std::isfinite(window)) {
      capacity_ = static_cast<std::size_t>(std::ceil(window / dt - 1e-9)) + 2;
    }
  }

  double dt() const noexcept { return dt_; }
  double t0() const noexcept { return t0_; }
  Eigen::Index dim() const noexcept { return dim_; }
  /// Retained span in seconds (infinite for unbounded signals).
  double window() const noexcept {
    return capacity_ == 0 ? kUnbounded : static_cast<double>(capacity_ - 2) * dt_;
  }

  /// Number of samples ever pushed.
  std::size_t count() const noexcept { return first_ + samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t first_index() const noexcept { return first_; }

  double time_at(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) * dt_; }
  double front_time() const noexcept { return time_at(first_); }
  double back_time() const noexcept { return time_at(count() - 1); }

  void push(const Vector& v) {
    require_dims(v.size() == dim_, "SampledSignal::push: dimension mismatch");
    require_finite(v, "SampledSignal::push");
    samples_.push_back(v);
    if (capacity_ != 0 && samples_.size() > capacity_) {
      samples_.pop_front();
      ++first_;
    }
  }

  const Vector& at_index(std::size_t k) const {
    if (k < first_) {
      throw WindowUnderflow("SampledSignal: sample " + std::to_string(k) +
                            " is older than the retention window");
    }
    if (k >= count()) throw DomainError("SampledSignal: sample index in the future");
    return samples_[k - first_];
  }

  const Vector& back() const {
    if (samples_.empty()) throw DomainError("SampledSignal: empty");
    return samples_.back();
  }

  /// Value at time t; linear interpolation between grid samples.
  Vector at(double t) const {
    const auto [k, frac] = locate(t);
    return value(k, frac);
  }

  /// Grid index of time t, which must lie on the grid (within 1e-6 of a step).
  std::size_t index_of(double t) const {
    const double s = (t - t0_) / dt_;
    const double r = std::round(s);
    if (std::abs(s - r) > 1e-6 || r < 0.0) {
      throw DomainError("SampledSignal: time " + std::to_string(t) + " is not on the sample grid");
    }
    return static_cast<std::size_t>(r);
  }

  /// Integral over [a, b] of the piecewise-linear interpolant (composite
  /// trapezoid rule, off-grid endpoints interpolated).
  Vector trapezoid(double a, double b) const {
    if (a > b) throw DomainError("SampledSignal::trapezoid: a > b");
    Vector acc = Vector::Zero(dim_);
    if (a == b) return acc;
    const auto [ka, fa] = locate(a);
    const auto [kb, fb] = locate(b);
    Vector va = value(ka, fa);
    if (ka == kb) {
      return 0.5 * (b - a) * (va + value(kb, fb));
    }
    // a -> grid point ka+1
    std::size_t k = ka + 1;
    acc += 0.5 * (time_at(k) - a) * (va + at_index(k));
    for (; k < kb; ++k) acc += 0.5 * dt_ * (at_index(k) + at_index(k + 1));
    if (fb > 0.0) acc += 0.5 * (b - time_at(kb)) * (at_index(kb) + value(kb, fb));
    return acc;
  }

 private:
  struct Location {
    std::size_t index;
    double frac;
  };

  Location locate(double t) const {
    if (samples_.empty()) throw DomainError("SampledSignal: empty");
    const double s = (t - t0_) / dt_;
    const double tol = 1e-9 * std::max(1.0, std::abs(s));
    if (s < static_cast<double>(first_) - tol) {
      throw WindowUnderflow("SampledSignal: time " + std::to_string(t) +
                            " precedes the retained window starting at " +
                            std::to_string(front_time()));
    }
    const double last = static_cast<double>(count() - 1);
    if (s > last + tol) {
      throw DomainError("SampledSignal: time " + std::to_string(t) + " is after the last sample");
    }
    double r = std::round(s);
    if (std::abs(s - r) <= tol) {
      r = std::clamp(r, static_cast<double>(first_), last);
      return {static_cast<std::size_t>(r), 0.0};
    }
    const double f = std::floor(s);
    return {static_cast<std::size_t>(f), s - f};
  }

  Vector value(std::size_t k, double frac) const {
    if (frac == 0.0) return at_index(k);
    return (1.0 - frac) * at_index(k) + frac * at_index(k + 1);
  }

  double dt_;
  double t0_;
  Eigen::Index dim_;
  std::size_t capacity_ = 0;  // 0 = unbounded
  std::size_t first_ = 0;
  std::deque<Vector> samples_;
};

/// Free-function form of SampledSignal::trapezoid.
inline Vector trapezoid(const SampledSignal& signal, double a, double b) {
  return signal.trapezoid(a, b);
}

}  // namespace irlobs::numerics
