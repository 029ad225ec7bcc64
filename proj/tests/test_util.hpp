// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "tsvar/timescale.hpp"
#include "tsvar/trajectory.hpp"

namespace tsvar_test {

inline std::shared_ptr<const tsvar::TimeScale> make_scale(tsvar::TimeScale ts) {
  return std::make_shared<const tsvar::TimeScale>(std::move(ts));
}

inline std::shared_ptr<const tsvar::TimeScale> integers(double anchor = 0.0) {
  return make_scale(tsvar::TimeScale::integers(anchor));
}
inline std::shared_ptr<const tsvar::TimeScale> h_step(double h,
                                                      double anchor = 0.0) {
  return make_scale(tsvar::TimeScale::h_step(h, anchor));
}
inline std::shared_ptr<const tsvar::TimeScale> q_scale(double q,
                                                       double anchor = 1.0) {
  return make_scale(tsvar::TimeScale::q_scale(q, anchor));
}

/// Polynomial with the given coefficients (constant term first).
inline std::function<double(double)> poly(std::vector<double> coeffs) {
  return [coeffs](double t) {
    double acc = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * t + coeffs[k];
    return acc;
  };
}

inline std::vector<double> random_coeffs(std::mt19937_64& rng, int degree) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> coeffs(static_cast<std::size_t>(degree) + 1);
  for (auto& c : coeffs) c = dist(rng);
  return coeffs;
}

/// Literal recursive definition of the iterated delta derivative, used as an
/// independent oracle for the library's index-triangle implementation.
inline double oracle_delta(const tsvar::TimeScale& ts,
                           const std::function<double(double)>& f, double t,
                           int order) {
  if (order == 0) return f(t);
  auto lower = [&](double s) { return oracle_delta(ts, f, s, order - 1); };
  return (lower(ts.sigma(t)) - lower(t)) / ts.mu(t);
}

/// Oracle for f^{sigma^s Delta^m}(t): compose with the forward jump s times,
/// then apply the recursive delta derivative m times.
inline double oracle_sigma_delta(const tsvar::TimeScale& ts,
                                 const std::function<double(double)>& f,
                                 double t, int s, int m) {
  auto shifted = [&](double x) {
    double y = x;
    for (int j = 0; j < s; ++j) y = ts.sigma(y);
    return f(y);
  };
  return oracle_delta(ts, shifted, t, m);
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace tsvar_test

