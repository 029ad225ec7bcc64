// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "tsvar/lagrangian.hpp"
#include "tsvar/timescale.hpp"

namespace tsvar {

/// Truncation-horizon layout, expressed in grid-point indices past the start
/// point so configurations stay meaningful on geometric scales.
struct Horizon {
  std::int64_t t_max_index = 0;
  std::int64_t t_grid_stride = 0;

  /// Defaults: 200 points past the start on unit-jump scales, 40 on
  /// geometric ones; the scan grid samples every t_max/20 indices.
  static Horizon defaults_for(const TimeScale& scale) {
    Horizon h;
    const auto jump = scale.affine_jump();
    h.t_max_index = (jump && jump->a1 > 1.0) ? 40 : 200;
    h.t_grid_stride = std::max<std::int64_t>(1, h.t_max_index / 20);
    return h;
  }
};

/// An infinite-horizon variational problem of order r on a time scale:
/// maximize the delta integral of L over [start, +infinity) subject to
/// x^{Delta^i}(start) = initial_conditions[i], i = 0..r-1.
class Problem {
public:
  Problem(std::shared_ptr<const TimeScale> scale, int order, double start,
          std::vector<double> initial_conditions, Lagrangian lagrangian,
          Horizon horizon = {})
      : scale_(std::move(scale)),
        order_(order),
        start_(start),
        initial_conditions_(std::move(initial_conditions)),
        lagrangian_(std::move(lagrangian)),
        horizon_(horizon) {
    if (!scale_) throw std::invalid_argument("Problem: null scale");
    if (order_ < 1) throw std::invalid_argument("Problem: order must be >= 1");
    if (static_cast<int>(initial_conditions_.size()) != order_)
      throw std::invalid_argument(
          "Problem: expected exactly r initial conditions");
    if (lagrangian_.order() != order_)
      throw std::invalid_argument("Problem: Lagrangian arity != order");
    start_index_ = scale_->index_of(start_);  // throws if off scale

    const auto jump = scale_->affine_jump();
    if (order_ >= 2) {
      // Higher-order problems require an affine forward jump. Declared
      // affine kinds are checked by a residual fit over an initial window.
      if (!jump)
        throw std::invalid_argument(
            "Problem: order >= 2 requires an affine scale (sigma = a1*t + a0)");
      const auto fit = fit_condition_H(scale_->grid(start_, 16));
      if (fit.max_residual > 1e-9)
        throw std::invalid_argument(
            "Problem: scale failed the affine forward-jump check");
    }
    if (jump) {
      a1_ = jump->a1;
      a0_ = jump->a0;
    }
    if (horizon_.t_max_index <= 0 || horizon_.t_grid_stride <= 0) {
      const Horizon defaults = Horizon::defaults_for(*scale_);
      if (horizon_.t_max_index <= 0) horizon_.t_max_index = defaults.t_max_index;
      if (horizon_.t_grid_stride <= 0)
        horizon_.t_grid_stride = defaults.t_grid_stride;
    }
  }

  const TimeScale& scale() const noexcept { return *scale_; }
  std::shared_ptr<const TimeScale> scale_ptr() const noexcept { return scale_; }
  int order() const noexcept { return order_; }
  double start() const noexcept { return start_; }
  std::int64_t start_index() const noexcept { return start_index_; }
  const std::vector<double>& initial_conditions() const noexcept {
    return initial_conditions_;
  }
  const Lagrangian& lagrangian() const noexcept { return lagrangian_; }
  const Horizon& horizon() const noexcept { return horizon_; }

  /// Forward-jump slope; 1 when the scale carries no declared jump
  /// (only possible for first-order problems, where it never enters).
  double a1() const noexcept { return a1_; }
  double a0() const noexcept { return a0_; }

  /// Scan grid T values: start index + stride, + 2*stride, ..., t_max.
  std::vector<double> default_t_grid() const {
    std::vector<double> grid;
    for (std::int64_t j = horizon_.t_grid_stride; j <= horizon_.t_max_index;
         j += horizon_.t_grid_stride)
      grid.push_back(scale_->point(start_index_ + j));
    if (grid.empty()) grid.push_back(scale_->point(start_index_ + 1));
    return grid;
  }

private:
  std::shared_ptr<const TimeScale> scale_;
  int order_;
  double start_;
  std::int64_t start_index_ = 0;
  std::vector<double> initial_conditions_;
  Lagrangian lagrangian_;
  Horizon horizon_;
  double a1_ = 1.0;
  double a0_ = 0.0;
};

}  // namespace tsvar
