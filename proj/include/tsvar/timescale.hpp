// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsvar/errors.hpp"

namespace tsvar {

/// Forward jump parameters of an affine scale: sigma(t) = a1*t + a0.
struct AffineJump {
  double a1 = 1.0;
  double a0 = 0.0;
};

/// Result of the least-squares affine fit of consecutive scale points.
/// Residuals are normalized per point by max(1, |t_{i+1}|) so geometric
/// scales with huge coordinates stay comparable against a fixed tolerance.
struct AffineFit {
  double a1 = 0.0;
  double a0 = 0.0;
  double max_residual = 0.0;
};

/// An isolated time scale with sup = +infinity, represented by its strictly
/// increasing point sequence from an anchor. Points are addressed by index;
/// all jump operators work in index space, so there is no drift from
/// repeated floating-point sigma applications.
///
/// Instances are immutable after construction and safe to share across
/// concurrent readers.
class TimeScale {
public:
  enum class Kind { Integer, HStep, QScale, Affine, PointSequence };

  using Generator = std::function<double(std::int64_t)>;

  static constexpr double kMembershipTol = 1e-9;

  /// Integer-step scale {a, a+1, a+2, ...}; sigma(t) = t + 1.
  static TimeScale integers(double anchor) {
    return TimeScale(Kind::Integer, anchor, AffineJump{1.0, 1.0});
  }

  /// h-step scale {a, a+h, a+2h, ...}; sigma(t) = t + h, h > 0.
  static TimeScale h_step(double h, double anchor) {
    if (!(h > 0.0))
      throw std::invalid_argument("h_step: step must be positive");
    return TimeScale(Kind::HStep, anchor, AffineJump{1.0, h});
  }

  /// Geometric scale {a, aq, aq^2, ...}; sigma(t) = q*t, q > 1, anchor > 0.
  static TimeScale q_scale(double q, double anchor) {
    if (!(q > 1.0))
      throw std::invalid_argument("q_scale: q must exceed 1");
    if (!(anchor > 0.0))
      throw std::invalid_argument("q_scale: anchor must be positive");
    return TimeScale(Kind::QScale, anchor, AffineJump{q, 0.0});
  }

  /// General affine scale with sigma(t) = a1*t + a0. Requires a1 >= 1 and
  /// mu(anchor) > 0 so the scale is strictly increasing and unbounded above.
  static TimeScale affine(double a1, double a0, double anchor) {
    if (!(a1 > 0.0))
      throw std::invalid_argument("affine: a1 must be positive");
    if (a1 < 1.0)
      throw std::invalid_argument(
          "affine: a1 < 1 yields a bounded scale (sup < +infinity)");
    if (!((a1 - 1.0) * anchor + a0 > 0.0))
      throw std::invalid_argument("affine: sigma(anchor) must exceed anchor");
    return TimeScale(Kind::Affine, anchor, AffineJump{a1, a0});
  }

  /// Scale defined by an arbitrary strictly increasing generator;
  /// generator(0) must equal the anchor. An optional max_index bounds the
  /// representable horizon; requests beyond it raise horizon_error.
  static TimeScale from_points(Generator generator,
                               std::int64_t max_index = -1) {
    if (!generator)
      throw std::invalid_argument("from_points: null generator");
    TimeScale ts(Kind::PointSequence, generator(0), std::nullopt);
    ts.generator_ = std::move(generator);
    ts.max_index_ = max_index;
    return ts;
  }

  /// Convenience wrapper over from_points for a finite, explicit list.
  static TimeScale from_vector(std::vector<double> points) {
    if (points.size() < 2)
      throw std::invalid_argument("from_vector: need at least two points");
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i] > points[i - 1]))
        throw std::invalid_argument("from_vector: points must increase");
    auto shared = std::make_shared<std::vector<double>>(std::move(points));
    auto max_index = static_cast<std::int64_t>(shared->size()) - 1;
    return from_points(
        [shared](std::int64_t k) { return (*shared)[static_cast<std::size_t>(k)]; },
        max_index);
  }

  Kind kind() const noexcept { return kind_; }
  double anchor() const noexcept { return anchor_; }

  /// Exact jump parameters for the four affine kinds; empty for
  /// point-sequence scales.
  std::optional<AffineJump> affine_jump() const noexcept { return jump_; }

  /// The k-th point of the scale, k >= 0, point(0) == anchor.
  double point(std::int64_t index) const {
    if (index < 0)
      throw off_scale_error("point index below anchor");
    if (max_index_ >= 0 && index > max_index_)
      throw horizon_error("scale generator exhausted at index " +
                          std::to_string(max_index_));
    double value;
    if (generator_) {
      value = generator_(index);
    } else {
      const double a1 = jump_->a1;
      const double a0 = jump_->a0;
      if (a1 == 1.0) {
        value = anchor_ + static_cast<double>(index) * a0;
      } else if (a0 == 0.0) {
        value = anchor_ * std::pow(a1, static_cast<double>(index));
      } else {
        const double p = std::pow(a1, static_cast<double>(index));
        value = p * anchor_ + a0 * (p - 1.0) / (a1 - 1.0);
      }
    }
    if (!std::isfinite(value))
      throw horizon_error("scale point overflows at index " +
                          std::to_string(index));
    return value;
  }

  /// Index of a scale member, tested with relative tolerance kMembershipTol
  /// against the nearest generated point. Throws off_scale_error otherwise.
  std::int64_t index_of(double t) const {
    if (!std::isfinite(t)) throw off_scale_error("non-finite time point");
    std::int64_t guess = generator_ ? search_index(t) : closed_form_index(t);
    std::int64_t best = -1;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::int64_t k = std::max<std::int64_t>(0, guess - 1);
         k <= guess + 1; ++k) {
      double p;
      try {
        p = point(k);
      } catch (const horizon_error&) {
        break;
      }
      const double err = std::abs(p - t);
      if (err < best_err) {
        best_err = err;
        best = k;
      }
    }
    if (best >= 0 &&
        best_err <= kMembershipTol * std::max({1.0, std::abs(t),
                                               std::abs(point(best))}))
      return best;
    throw off_scale_error("time point " + std::to_string(t) +
                          " is not on the scale");
  }

  bool contains(double t) const {
    try {
      index_of(t);
      return true;
    } catch (const off_scale_error&) {
      return false;
    }
  }

  /// Graininess at an index: point(k+1) - point(k). Always positive.
  double mu_at(std::int64_t index) const { return point(index + 1) - point(index); }

  /// Forward jump operator.
  double sigma(double t) const { return point(index_of(t) + 1); }

  /// Backward jump operator; rho(anchor) == anchor.
  double rho(double t) const {
    const auto k = index_of(t);
    return k == 0 ? point(0) : point(k - 1);
  }

  /// Graininess mu(t) = sigma(t) - t.
  double mu(double t) const {
    const auto k = index_of(t);
    return point(k + 1) - point(k);
  }

  /// k-fold forward jump; sigma_k(t, 0) == t.
  double sigma_k(double t, std::int64_t k) const {
    if (k < 0) throw std::invalid_argument("sigma_k: negative iterate count");
    return point(index_of(t) + k);
  }

  /// The first `count` scale points >= from, strictly increasing.
  std::vector<double> grid(double from, std::size_t count) const {
    std::vector<double> points;
    points.reserve(count);
    const auto start = index_of(from);
    for (std::size_t j = 0; j < count; ++j)
      points.push_back(point(start + static_cast<std::int64_t>(j)));
    return points;
  }

private:
  TimeScale(Kind kind, double anchor, std::optional<AffineJump> jump)
      : kind_(kind), anchor_(anchor), jump_(jump) {
    if (!std::isfinite(anchor_))
      throw std::invalid_argument("anchor must be finite");
  }

  std::int64_t closed_form_index(double t) const {
    const double a1 = jump_->a1;
    const double a0 = jump_->a0;
    double kf;
    if (a1 == 1.0) {
      kf = (t - anchor_) / a0;
    } else {
      // point(k) = a1^k * (anchor + c) - c with c = a0 / (a1 - 1)
      const double c = a0 / (a1 - 1.0);
      const double ratio = (t + c) / (anchor_ + c);
      if (!(ratio > 0.0)) return 0;
      kf = std::log(ratio) / std::log(a1);
    }
    if (kf < 0.0) kf = 0.0;
    if (kf > 9.0e15) throw off_scale_error("time point beyond index range");
    return static_cast<std::int64_t>(std::llround(kf));
  }

  // Galloping search over the generator; points are strictly increasing.
  std::int64_t search_index(double t) const {
    std::int64_t hi = 1;
    const std::int64_t cap = max_index_ >= 0 ? max_index_
                                             : std::int64_t{1} << 48;
    while (hi < cap && point_or_last(hi) < t) hi = std::min(cap, hi * 2);
    std::int64_t lo = 0;
    while (lo < hi) {
      const std::int64_t mid = lo + (hi - lo) / 2;
      if (point_or_last(mid) < t)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

  double point_or_last(std::int64_t index) const {
    if (max_index_ >= 0 && index > max_index_) index = max_index_;
    return generator_(index);
  }

  Kind kind_;
  double anchor_;
  std::optional<AffineJump> jump_;
  Generator generator_;
  std::int64_t max_index_ = -1;
};

/// Least-squares fit of sigma(t_i) = t_{i+1} against t_i over consecutive
/// points, weighted by 1 / max(1, |t_{i+1}|)^2 so the minimized quantity is
/// the relative residual that max_residual reports. Plain unweighted least
/// squares cannot meet tight residual bounds on geometric windows: the
/// intercept error scales with the mean abscissa, which spans many decades
/// there. Exactly affine windows are reproduced with zero residual either
/// way. max_residual <= tol (caller's choice) means the sampled window is
/// consistent with an affine forward jump.
inline AffineFit fit_condition_H(const std::vector<double>& points) {
  if (points.size() < 3)
    throw std::invalid_argument("fit_condition_H: need at least 3 points");
  for (std::size_t i = 1; i < points.size(); ++i)
    if (!(points[i] > points[i - 1]))
      throw std::invalid_argument(
          "fit_condition_H: points must be strictly increasing");

  const std::size_t n = points.size() - 1;
  long double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double x = points[i];
    const long double y = points[i + 1];
    const long double scale = std::max<long double>(1.0, std::abs(points[i + 1]));
    const long double w = 1.0L / (scale * scale);
    sw += w;
    swx += w * x;
    swy += w * y;
    swxx += w * x * x;
    swxy += w * x * y;
  }
  const long double den = sw * swxx - swx * swx;
  if (den == 0)
    throw std::invalid_argument("fit_condition_H: degenerate abscissae");
  const long double slope = (sw * swxy - swx * swy) / den;
  const long double intercept = (swy - slope * swx) / sw;

  AffineFit fit;
  fit.a1 = static_cast<double>(slope);
  fit.a0 = static_cast<double>(intercept);
  for (std::size_t i = 0; i < n; ++i) {
    const double res =
        static_cast<double>(std::abs(points[i + 1] - slope * points[i] - intercept)) /
        std::max(1.0, std::abs(points[i + 1]));
    fit.max_residual = std::max(fit.max_residual, res);
  }
  return fit;
}

}  // namespace tsvar
