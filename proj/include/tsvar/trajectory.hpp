// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tsvar/timescale.hpp"

namespace tsvar {

/// A named scalar function of the time variable, used as a solver basis
/// element and as a building block for basis-backed trajectories.
struct BasisFunction {
  std::string name;
  std::function<double(double)> fn;

  double operator()(double t) const { return fn(t); }
};

/// A scalar function on a time scale, evaluable at every grid point from the
/// anchor onward. Either closure-backed or an exact linear combination of
/// basis functions. Evaluation must be pure: trajectories are shared across
/// concurrent readers and callers rely on repeatable values.
class Trajectory {
public:
  Trajectory(std::shared_ptr<const TimeScale> scale,
             std::function<double(double)> evaluate, std::string label = "")
      : scale_(std::move(scale)),
        evaluate_(std::move(evaluate)),
        label_(std::move(label)) {
    if (!scale_) throw std::invalid_argument("Trajectory: null scale");
    if (!evaluate_) throw std::invalid_argument("Trajectory: null evaluator");
  }

  /// Trajectory evaluating sum_j coeffs[j] * basis[j](t).
  static Trajectory from_basis(std::shared_ptr<const TimeScale> scale,
                               std::vector<BasisFunction> basis,
                               std::vector<double> coeffs,
                               std::string label = "") {
    if (basis.size() != coeffs.size())
      throw std::invalid_argument("from_basis: basis/coefficient size mismatch");
    auto shared_basis =
        std::make_shared<std::vector<BasisFunction>>(std::move(basis));
    auto shared_coeffs =
        std::make_shared<std::vector<double>>(std::move(coeffs));
    return Trajectory(
        std::move(scale),
        [shared_basis, shared_coeffs](double t) {
          double acc = 0.0;
          for (std::size_t j = 0; j < shared_basis->size(); ++j)
            acc += (*shared_coeffs)[j] * (*shared_basis)[j](t);
          return acc;
        },
        std::move(label));
  }

  double operator()(double t) const { return evaluate_(t); }
  double value(double t) const { return evaluate_(t); }

  const TimeScale& scale() const noexcept { return *scale_; }
  std::shared_ptr<const TimeScale> scale_ptr() const noexcept { return scale_; }
  const std::string& label() const noexcept { return label_; }

private:
  std::shared_ptr<const TimeScale> scale_;
  std::function<double(double)> evaluate_;
  std::string label_;
};

}  // namespace tsvar
