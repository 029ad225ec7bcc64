// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tsvar/calculus.hpp"
#include "tsvar/problem.hpp"
#include "tsvar/scan.hpp"
#include "tsvar/trajectory.hpp"

namespace tsvar {

inline constexpr double kAdmissibilityTol = 1e-9;

/// Initial-condition residuals x^{Delta^i}(a) - alpha_i, i = 0..r-1.
/// The trajectory is admissible when every |residual| <= kAdmissibilityTol.
inline std::vector<double> admissibility_check(const Problem& p,
                                               const Trajectory& x) {
  std::vector<double> residuals(static_cast<std::size_t>(p.order()));
  for (int i = 0; i < p.order(); ++i)
    residuals[static_cast<std::size_t>(i)] =
        delta_derivative(x, p.start(), i) -
        p.initial_conditions()[static_cast<std::size_t>(i)];
  return residuals;
}

inline bool is_admissible(const Problem& p, const Trajectory& x) {
  for (double res : admissibility_check(p, x))
    if (std::abs(res) > kAdmissibilityTol) return false;
  return true;
}

/// Signed coefficient (-1)^i (1/a1)^{i(i-1)/2} in front of the i-th term of
/// the stationarity equation.
inline double el_coefficient(int i, double a1) {
  if (i < 0) throw std::invalid_argument("el_coefficient: negative index");
  if (!(a1 > 0.0))
    throw std::invalid_argument("el_coefficient: a1 must be positive");
  const double sign = (i % 2 == 0) ? 1.0 : -1.0;
  return sign * std::pow(a1, -(static_cast<double>(i) * (i - 1) / 2.0));
}

/// Weight Psi_i^r(k) = prod_{j=1}^{i} (1/a1)^{r-(k-1)+(j-1)} appearing in
/// the k-th boundary-at-infinity condition. Requires 1 <= i <= k-1 <= r-1.
inline double psi(int i, int r, int k, double a1) {
  if (!(a1 > 0.0)) throw std::invalid_argument("psi: a1 must be positive");
  if (r < 1 || k < 1 || k > r)
    throw std::invalid_argument("psi: k must lie in 1..r");
  if (i < 1 || i > k - 1)
    throw std::invalid_argument("psi: i must lie in 1..k-1");
  // Exponent sum: sum_{j=1}^{i} (r - k + j) = i*(r-k) + i*(i+1)/2.
  const double exponent =
      static_cast<double>(i) * (r - k) + static_cast<double>(i) * (i + 1) / 2.0;
  return std::pow(a1, -exponent);
}

namespace detail {

/// g_i(s) = partial slot i of L on the mixed tuple of x at s.
inline std::function<double(double)> partial_along(const Problem& p,
                                                   const Trajectory& x,
                                                   int slot) {
  return [&p, &x, slot](double s) {
    const auto tuple = mixed_eval(x, s, p.order());
    return p.lagrangian().partial_on(slot, tuple);
  };
}

}  // namespace detail

/// Stationarity defect at t:
///   sum_{i=0}^{r} (-1)^i (1/a1)^{i(i-1)/2} (d_{u_i} L)^{Delta^i} applied to
///   the mixed tuple of x. Extremals make this vanish at every grid point.
/// Needs forward points up to sigma^{2r}(t).
inline double el_residual(const Problem& p, const Trajectory& x, double t) {
  const int r = p.order();
  const double a1 = p.a1();
  double acc = 0.0;
  for (int i = 0; i <= r; ++i)
    acc += el_coefficient(i, a1) *
           delta_derivative(p.scale(), detail::partial_along(p, x, i), t, i);
  return acc;
}

/// The k-th transversality expression at truncation point T':
///   ( d_{u_m} L + sum_{i=1}^{k-1} (-1)^i (d_{u_{m+i}} L)^{Delta^i} Psi_i^r(k) )
///   * x^{sigma^{k-1} Delta^{r-k}}(T'),   with m = r - k + 1.
inline double transversality_value(const Problem& p, const Trajectory& x,
                                   int k, double t_prime) {
  const int r = p.order();
  if (k < 1 || k > r)
    throw std::invalid_argument("transversality_value: k must lie in 1..r");
  const double a1 = p.a1();
  const int m = r - k + 1;

  double bracket = detail::partial_along(p, x, m)(t_prime);
  for (int i = 1; i <= k - 1; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    bracket += sign *
               delta_derivative(p.scale(), detail::partial_along(p, x, m + i),
                                t_prime, i) *
               psi(i, r, k, a1);
  }

  const TimeScale& ts = p.scale();
  const double factor = detail::sigma_delta_at_index(
      ts, [&x](double s) { return x(s); }, ts.index_of(t_prime), k - 1, r - k);
  return bracket * factor;
}

/// Scans the k-th transversality expression over truncations: for each T of
/// t_grid, the infimum over all scale points T' in [T, T_max].
inline TruncationScan transversality_scan(const Problem& p, const Trajectory& x,
                                          int k,
                                          const std::vector<double>& t_grid) {
  const std::int64_t t_max = p.start_index() + p.horizon().t_max_index;
  return detail::scan_quantity(
      p.scale(), t_grid, t_max, [&](std::int64_t index) {
        return transversality_value(p, x, k, p.scale().point(index));
      });
}

inline TruncationScan transversality_scan(const Problem& p,
                                          const Trajectory& x, int k) {
  return transversality_scan(p, x, k, p.default_t_grid());
}

/// A labelled trajectory competing against a reference in the weak
/// maximality test.
struct Competitor {
  std::string name;
  Trajectory trajectory;
};

struct CompetitorResult {
  std::string name;
  bool admissible = false;
  std::vector<double> admissibility_residuals;
  TruncationScan scan;
  bool rejects = false;
};

struct MaximalityReport {
  enum class Overall { NotRejected, Rejected };
  std::vector<CompetitorResult> competitors;
  Overall overall = Overall::NotRejected;
  int witness = -1;  // index into competitors when Rejected

  bool rejected() const { return overall == Overall::Rejected; }
};

/// Brock-style falsification battery: for each admissible competitor x the
/// payoff difference Delta(T') = int_a^{T'} [L<x> - L<x*>] is scanned over
/// truncations. x* survives (NotRejected) when every scan's limit estimate
/// stays <= +tol; a competitor whose payoff difference converges or diverges
/// above +tol rejects x* and is reported as the witness. A finite battery
/// can only falsify, never certify maximality.
inline MaximalityReport weak_maximality_test(
    const Problem& p, const Trajectory& x_star,
    const std::vector<Competitor>& competitors,
    const std::vector<double>& t_grid) {
  const TimeScale& ts = p.scale();
  const int r = p.order();
  const std::int64_t a_idx = p.start_index();
  std::int64_t t_max = a_idx + p.horizon().t_max_index;
  if (t_grid.empty())
    throw std::invalid_argument("weak_maximality_test: empty truncation grid");
  if (ts.index_of(t_grid.front()) <= a_idx)
    throw std::invalid_argument(
        "weak_maximality_test: truncation grid must start past the start point");
  t_max = std::max(t_max, ts.index_of(t_grid.back()));

  // Prefix sums of the integrand difference from the start point; the scan
  // then reads Delta at any truncation index in O(1).
  auto integrand_at = [&](const Trajectory& x, std::int64_t index) {
    const double t = ts.point(index);
    const auto tup_x = mixed_eval(x, t, r);
    const auto tup_s = mixed_eval(x_star, t, r);
    return (p.lagrangian().value_on(tup_x) - p.lagrangian().value_on(tup_s)) *
           ts.mu_at(index);
  };

  MaximalityReport report;
  for (const auto& competitor : competitors) {
    CompetitorResult result;
    result.name = competitor.name;
    result.admissibility_residuals = admissibility_check(p, competitor.trajectory);
    result.admissible = true;
    for (double res : result.admissibility_residuals)
      if (std::abs(res) > kAdmissibilityTol) result.admissible = false;
    if (!result.admissible) {
      report.competitors.push_back(std::move(result));
      continue;
    }

    std::vector<double> prefix(static_cast<std::size_t>(t_max - a_idx) + 1, 0.0);
    for (std::int64_t j = a_idx; j < t_max; ++j)
      prefix[static_cast<std::size_t>(j - a_idx + 1)] =
          prefix[static_cast<std::size_t>(j - a_idx)] +
          integrand_at(competitor.trajectory, j);

    result.scan = detail::scan_quantity(
        ts, t_grid, t_max, [&](std::int64_t index) {
          return prefix[static_cast<std::size_t>(index - a_idx)];
        });

    double magnitude = 0.0;
    for (double v : result.scan.inf_values)
      magnitude = std::max(magnitude, std::abs(v));
    const double tol = detail::ScanTolerances::kZeroBand * (1.0 + magnitude);
    switch (result.scan.verdict) {
      case ScanVerdict::ConvergesToZero:
        result.rejects = false;
        break;
      case ScanVerdict::ConvergesNonzero:
      case ScanVerdict::Diverges:
        result.rejects = result.scan.limit_estimate > tol;
        break;
      case ScanVerdict::Inconclusive:
        result.rejects = false;
        break;
    }
    report.competitors.push_back(std::move(result));
  }

  for (std::size_t i = 0; i < report.competitors.size(); ++i) {
    if (report.competitors[i].rejects) {
      report.overall = MaximalityReport::Overall::Rejected;
      report.witness = static_cast<int>(i);
      break;
    }
  }
  return report;
}

inline MaximalityReport weak_maximality_test(
    const Problem& p, const Trajectory& x_star,
    const std::vector<Competitor>& competitors) {
  return weak_maximality_test(p, x_star, competitors, p.default_t_grid());
}

/// Default falsification family: variations eta_e(t) =
/// prod_{i=0}^{r-1} (t - sigma^i(a)) * (t - a)^e for e = 0..3, which have r
/// vanishing delta derivatives at the start point, each scaled by
/// epsilon in {+-0.5, +-0.1, +-0.01} and added to the reference trajectory.
inline std::vector<Competitor> default_variation_battery(
    const Problem& p, const Trajectory& x_star) {
  const int r = p.order();
  std::vector<double> roots;
  for (int i = 0; i < r; ++i)
    roots.push_back(p.scale().point(p.start_index() + i));
  const double a = p.start();

  std::vector<Competitor> competitors;
  const double epsilons[] = {0.5, -0.5, 0.1, -0.1, 0.01, -0.01};
  for (int degree = 0; degree <= 3; ++degree) {
    auto eta = [roots, a, degree](double t) {
      double value = 1.0;
      for (double root : roots) value *= (t - root);
      for (int e = 0; e < degree; ++e) value *= (t - a);
      return value;
    };
    for (double eps : epsilons) {
      char name[64];
      std::snprintf(name, sizeof(name), "x*%+g*eta%d", eps, degree);
      competitors.push_back(Competitor{
          name,
          Trajectory(p.scale_ptr(),
                     [x_star, eta, eps](double t) {
                       return x_star(t) + eps * eta(t);
                     },
                     name)});
    }
  }
  return competitors;
}

}  // namespace tsvar
