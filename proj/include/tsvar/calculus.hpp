// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "tsvar/timescale.hpp"
#include "tsvar/trajectory.hpp"

namespace tsvar {

namespace detail {

/// Iterated delta derivative of f at scale index k0, computed by the exact
/// forward-difference quotient, one triangle level per order:
///   f^{Delta}(p_j) = (f(p_{j+1}) - f(p_j)) / mu(p_j).
/// Exact on isolated scales; no truncation error.
inline double delta_derivative_at_index(const TimeScale& ts,
                                        const std::function<double(double)>& f,
                                        std::int64_t k0, int order) {
  if (order < 0)
    throw std::invalid_argument("delta_derivative: negative order");
  std::vector<double> v(static_cast<std::size_t>(order) + 1);
  for (int j = 0; j <= order; ++j)
    v[static_cast<std::size_t>(j)] = f(ts.point(k0 + j));
  for (int level = 1; level <= order; ++level)
    for (int j = 0; j + level <= order; ++j)
      v[static_cast<std::size_t>(j)] =
          (v[static_cast<std::size_t>(j) + 1] - v[static_cast<std::size_t>(j)]) /
          ts.mu_at(k0 + j);
  return v[0];
}

/// Value of f^{sigma^s Delta^m} at scale index k: compose with the s-fold
/// forward jump (an index shift), then delta-differentiate m times.
inline double sigma_delta_at_index(const TimeScale& ts,
                                   const std::function<double(double)>& f,
                                   std::int64_t k, std::int64_t s, int m) {
  auto shifted = [&ts, &f, s](double t) { return f(ts.point(ts.index_of(t) + s)); };
  return delta_derivative_at_index(ts, shifted, k, m);
}

}  // namespace detail

/// r-th delta derivative of a raw function at t (order 0 returns f(t)).
inline double delta_derivative(const TimeScale& ts,
                               const std::function<double(double)>& f, double t,
                               int order) {
  return detail::delta_derivative_at_index(ts, f, ts.index_of(t), order);
}

/// r-th delta derivative of a trajectory at t.
inline double delta_derivative(const Trajectory& x, double t, int order) {
  return delta_derivative(x.scale(), [&x](double s) { return x(s); }, t, order);
}

/// Delta integral over [from, to): sum of f(t) * mu(t) over scale points,
/// iterated by index. from > to flips the sign; [a, a) is zero.
inline double delta_integral(const TimeScale& ts,
                             const std::function<double(double)>& f,
                             double from, double to) {
  std::int64_t ia = ts.index_of(from);
  std::int64_t ib = ts.index_of(to);
  double sign = 1.0;
  if (ia > ib) {
    std::swap(ia, ib);
    sign = -1.0;
  }
  double acc = 0.0;
  for (std::int64_t k = ia; k < ib; ++k) acc += f(ts.point(k)) * ts.mu_at(k);
  return sign * acc;
}

inline double delta_integral(const Trajectory& f, double from, double to) {
  return delta_integral(f.scale(), [&f](double s) { return f(s); }, from, to);
}

/// The tuple (t, x^{sigma^r}(t), x^{sigma^{r-1}Delta}(t), ...,
/// x^{sigma Delta^{r-1}}(t), x^{Delta^r}(t)) of length r + 2.
/// For r >= 2 this evaluation pattern is meaningful on scales with an affine
/// forward jump; honoring that is the caller's obligation.
inline std::vector<double> mixed_eval(const Trajectory& x, double t, int r) {
  if (r < 1) throw std::invalid_argument("mixed_eval: r must be >= 1");
  const TimeScale& ts = x.scale();
  const std::int64_t k = ts.index_of(t);
  std::vector<double> tuple(static_cast<std::size_t>(r) + 2);
  tuple[0] = ts.point(k);
  auto f = [&x](double s) { return x(s); };
  for (int i = 0; i <= r; ++i)
    tuple[static_cast<std::size_t>(i) + 1] =
        detail::sigma_delta_at_index(ts, f, k, r - i, i);
  return tuple;
}

/// Commutation defect f^{sigma Delta}(t) - a1 * f^{Delta sigma}(t).
/// Zero (up to rounding) on scales with sigma(t) = a1*t + a0.
inline double commutation_residual(const Trajectory& x, double t) {
  const TimeScale& ts = x.scale();
  const auto jump = ts.affine_jump();
  if (!jump)
    throw precondition_error("commutation_residual: affine scale required");
  const std::int64_t k = ts.index_of(t);
  auto f = [&x](double s) { return x(s); };
  const double sigma_delta = detail::sigma_delta_at_index(ts, f, k, 1, 1);
  const double delta_sigma =
      detail::delta_derivative_at_index(ts, f, k + 1, 1);
  return sigma_delta - jump->a1 * delta_sigma;
}

/// The two sides of the higher-order integration by parts identity on an
/// affine scale, split so callers can form a relative residual:
///   lhs            = int_a^b f * g^{sigma^{r-i} Delta^i}
///   rhs_boundary   = [ f * g^{sigma^{r-i} Delta^{i-1}}
///                      + sum_{k=1}^{i-1} (-1)^k f^{Delta^k}
///                        * g^{sigma^{r-i+k} Delta^{i-1-k}}
///                        * prod_{j=1}^{k} (1/a1)^{i-j} ]_a^b
///   rhs_integral   = (-1)^i (1/a1)^{i(i-1)/2} int_a^b f^{Delta^i} g^{sigma^r}
struct IbpParts {
  double lhs = 0.0;
  double rhs_boundary = 0.0;
  double rhs_integral = 0.0;

  double residual() const { return lhs - rhs_boundary - rhs_integral; }
  double scale() const {
    return std::max(
        {1.0, std::abs(lhs), std::abs(rhs_boundary), std::abs(rhs_integral)});
  }
};

inline IbpParts ibp_parts(const Trajectory& f, const Trajectory& g, double from,
                          double to, int r, int i) {
  if (r < 1) throw std::invalid_argument("ibp_parts: r must be >= 1");
  if (i < 1 || i > r)
    throw std::invalid_argument("ibp_parts: i must lie in 1..r");
  const TimeScale& ts = f.scale();
  const auto jump = ts.affine_jump();
  if (!jump) throw precondition_error("ibp_parts: affine scale required");
  const double a1 = jump->a1;

  auto ff = [&f](double s) { return f(s); };
  auto gg = [&g](double s) { return g(s); };
  const std::int64_t ia = ts.index_of(from);
  const std::int64_t ib = ts.index_of(to);
  if (ia > ib) throw std::invalid_argument("ibp_parts: from must be <= to");

  IbpParts parts;
  for (std::int64_t m = ia; m < ib; ++m)
    parts.lhs += ff(ts.point(m)) *
                 detail::sigma_delta_at_index(ts, gg, m, r - i, i) *
                 ts.mu_at(m);

  auto boundary_term = [&](std::int64_t m) {
    double acc = ff(ts.point(m)) *
                 detail::sigma_delta_at_index(ts, gg, m, r - i, i - 1);
    for (int k = 1; k <= i - 1; ++k) {
      // prod_{j=1}^{k} (1/a1)^{i-j} = a1^{-(k*i - k(k+1)/2)}
      const double coeff = std::pow(a1, -(k * i - k * (k + 1) / 2));
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      acc += sign *
             detail::delta_derivative_at_index(ts, ff, m, k) *
             detail::sigma_delta_at_index(ts, gg, m, r - i + k, i - 1 - k) *
             coeff;
    }
    return acc;
  };
  parts.rhs_boundary = boundary_term(ib) - boundary_term(ia);

  const double tail_coeff = std::pow(a1, -(i * (i - 1) / 2));
  const double tail_sign = (i % 2 == 0) ? 1.0 : -1.0;
  double tail = 0.0;
  for (std::int64_t m = ia; m < ib; ++m)
    tail += detail::delta_derivative_at_index(ts, ff, m, i) *
            detail::sigma_delta_at_index(ts, gg, m, r, 0) * ts.mu_at(m);
  parts.rhs_integral = tail_sign * tail_coeff * tail;
  return parts;
}

/// Raw defect (lhs - rhs) of the integration by parts identity.
inline double ibp_residual(const Trajectory& f, const Trajectory& g,
                           double from, double to, int r, int i) {
  return ibp_parts(f, g, from, to, r, i).residual();
}

}  // namespace tsvar
