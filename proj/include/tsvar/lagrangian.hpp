// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsvar/exprlang.hpp"

namespace tsvar {

/// The integrand L(t, u0, ..., uR) together with its first partial
/// derivatives with respect to the state slots. Slot i corresponds to the
/// mixed evaluation component x^{sigma^{r-i} Delta^i}, so partial(i, ...)
/// is the (i+2)-th partial derivative of L in argument order.
///
/// Partials are exact when the Lagrangian comes from an expression or an
/// analytic callback; otherwise they fall back to symmetric differences
/// with step 1e-6 * (1 + |u_i|).
class Lagrangian {
public:
  using ValueFn = std::function<double(double, std::span<const double>)>;
  using PartialFn =
      std::function<double(int, double, std::span<const double>)>;

  Lagrangian(int order, ValueFn value)
      : order_(order), value_(std::move(value)) {
    check_order();
  }

  Lagrangian(int order, ValueFn value, PartialFn partial)
      : order_(order), value_(std::move(value)), partial_(std::move(partial)) {
    check_order();
  }

  /// Builds value and exact symbolic partials from expression source over
  /// t, u0..uR.
  static Lagrangian from_expression(const std::string& source, int order) {
    Expr expr = Expr::parse(source, order);
    auto partials = std::make_shared<std::vector<Expr>>();
    partials->reserve(static_cast<std::size_t>(order) + 1);
    for (int i = 0; i <= order; ++i)
      partials->push_back(expr.differentiate(Expr::var_u(i)));
    Lagrangian lagrangian(
        order,
        [expr](double t, std::span<const double> u) {
          return expr.evaluate(t, u);
        },
        [partials](int i, double t, std::span<const double> u) {
          return (*partials)[static_cast<std::size_t>(i)].evaluate(t, u);
        });
    lagrangian.source_ = source;
    return lagrangian;
  }

  int order() const noexcept { return order_; }
  const std::string& source() const noexcept { return source_; }

  double value(double t, std::span<const double> u) const {
    return value_(t, u);
  }

  /// Value on a mixed-evaluation tuple (t, u0..uR).
  double value_on(std::span<const double> tuple) const {
    return value_(tuple[0], tuple.subspan(1));
  }

  double partial(int i, double t, std::span<const double> u) const {
    require_slot(i);
    if (partial_) return partial_(i, t, u);
    return partial_fd(i, t, u);
  }

  double partial_on(int i, std::span<const double> tuple) const {
    return partial(i, tuple[0], tuple.subspan(1));
  }

  /// Symmetric-difference estimate of partial(i); the analytic path should
  /// agree with this to ~1e-5 relative, which tests use as a diagnostic.
  double partial_fd(int i, double t, std::span<const double> u) const {
    require_slot(i);
    std::vector<double> shifted(u.begin(), u.end());
    const double h = 1e-6 * (1.0 + std::abs(u[static_cast<std::size_t>(i)]));
    shifted[static_cast<std::size_t>(i)] += h;
    const double plus = value_(t, shifted);
    shifted[static_cast<std::size_t>(i)] -= 2.0 * h;
    const double minus = value_(t, shifted);
    return (plus - minus) / (2.0 * h);
  }

private:
  void check_order() const {
    if (order_ < 1)
      throw std::invalid_argument("Lagrangian: order must be >= 1");
    if (!value_) throw std::invalid_argument("Lagrangian: null value");
  }

  void require_slot(int i) const {
    if (i < 0 || i > order_)
      throw std::invalid_argument("Lagrangian: slot index out of range");
  }

  int order_;
  ValueFn value_;
  PartialFn partial_;
  std::string source_;
};

}  // namespace tsvar
