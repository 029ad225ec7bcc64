// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "tsvar/timescale.hpp"

namespace tsvar {

enum class ScanVerdict { ConvergesToZero, ConvergesNonzero, Diverges, Inconclusive };

inline const char* to_string(ScanVerdict v) {
  switch (v) {
    case ScanVerdict::ConvergesToZero: return "ConvergesToZero";
    case ScanVerdict::ConvergesNonzero: return "ConvergesNonzero";
    case ScanVerdict::Diverges: return "Diverges";
    case ScanVerdict::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

/// Numerical surrogate for lim_{T->inf} inf_{T' >= T} q(T'): for each T of
/// an increasing grid, the infimum of the scanned quantity over all scale
/// points T' in [T, T_max], together with the T' attaining it (smallest on
/// ties). The verdict classifies the tail of the infima.
struct TruncationScan {
  std::vector<double> t_values;
  std::vector<double> inf_values;
  std::vector<double> argmin_tprime;
  ScanVerdict verdict = ScanVerdict::Inconclusive;
  /// Tail estimate of the limit; 0 for ConvergesToZero, +-inf for Diverges.
  double limit_estimate = 0.0;
  /// True when the final infimum sits on the T_max boundary, a symptom of a
  /// quantity still descending at the edge of the sampled window.
  bool boundary_pinned = false;

  void write_csv(std::ostream& os) const {
    os << "T,inf_value,argmin_Tprime\n";
    char line[128];
    auto canon = [](double v) { return v == 0.0 ? 0.0 : v; };
    for (std::size_t i = 0; i < t_values.size(); ++i) {
      std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n",
                    canon(t_values[i]), canon(inf_values[i]),
                    canon(argmin_tprime[i]));
      os << line;
    }
  }
};

namespace detail {

/// Verdict thresholds. The zero band is scale-free; divergence fires on
/// infimum-magnitude growth by >= 10x (across the last three classified
/// entries or the whole scan) or on windowed sample minima that keep
/// descending into the T_max boundary.
struct ScanTolerances {
  static constexpr double kZeroBand = 1e-7;
  static constexpr double kGrowthFactor = 10.0;
  static constexpr double kFlatRel = 1e-3;
  static constexpr double kDescentRel = 0.05;
};

/// Classifies the tail of the infima. Entries whose T' window holds fewer
/// than max(3, samples/10) points are excluded from tail analysis: with a
/// fixed T_max the infimum over a shrinking window drifts up artificially,
/// which says nothing about the underlying limit. `offsets[i]` locates entry
/// i's window start inside `raw_values`.
inline void classify_scan(TruncationScan& scan,
                          const std::vector<double>& raw_values,
                          const std::vector<std::size_t>& offsets) {
  const std::size_t n = scan.inf_values.size();
  if (n == 0 || raw_values.empty()) {
    scan.verdict = ScanVerdict::Inconclusive;
    return;
  }
  const std::size_t samples = raw_values.size();
  double magnitude = 0.0;
  for (double v : raw_values) magnitude = std::max(magnitude, std::abs(v));
  const double tol_zero = ScanTolerances::kZeroBand * (1.0 + magnitude);

  const std::size_t min_window = std::max<std::size_t>(3, samples / 10);
  std::vector<std::size_t> classified;
  for (std::size_t i = 0; i < n; ++i)
    if (samples - offsets[i] >= min_window) classified.push_back(i);
  if (classified.size() < 3) {
    classified.resize(n);
    std::iota(classified.begin(), classified.end(), 0);
  }
  const auto& v = scan.inf_values;
  const std::size_t c = classified.size();
  auto entry = [&](std::size_t back) { return v[classified[c - 1 - back]]; };

  bool tail_zero = true;
  for (std::size_t back = 0; back < std::min<std::size_t>(3, c); ++back)
    if (std::abs(entry(back)) > tol_zero) tail_zero = false;
  if (tail_zero) {
    scan.verdict = ScanVerdict::ConvergesToZero;
    scan.limit_estimate = 0.0;
    return;
  }

  const double last = entry(0);
  const bool growing_tail = c >= 3 && std::abs(entry(0)) > std::abs(entry(1)) &&
                            std::abs(entry(1)) > std::abs(entry(2));
  const bool grew_in_tail =
      growing_tail && std::abs(last) >= ScanTolerances::kGrowthFactor *
                                            std::max(std::abs(entry(2)), tol_zero);
  const bool grew_overall =
      growing_tail &&
      std::abs(last) >= ScanTolerances::kGrowthFactor *
                            std::max(std::abs(v[classified[0]]), tol_zero);
  if (grew_in_tail || grew_overall) {
    scan.verdict = ScanVerdict::Diverges;
    scan.limit_estimate = last > 0 ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
    return;
  }

  // Quantities sinking to -infinity pin every infimum at T_max, so the
  // infima show no growth in T. Their signature is sample minima that keep
  // descending window over window into the boundary.
  if (samples >= 10) {
    const std::size_t window = samples / 5;
    auto window_min = [&](std::size_t end) {  // min over [end - window, end)
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t j = end - window; j < end; ++j)
        m = std::min(m, raw_values[j]);
      return m;
    };
    const double last_min = window_min(samples);
    const double prev_min = window_min(samples - window);
    double global_min = std::numeric_limits<double>::infinity();
    for (double r : raw_values) global_min = std::min(global_min, r);
    if (last_min <= global_min &&
        last_min < prev_min - ScanTolerances::kDescentRel *
                                  (std::abs(last_min) + tol_zero)) {
      scan.verdict = ScanVerdict::Diverges;
      scan.limit_estimate = -std::numeric_limits<double>::infinity();
      return;
    }
  }

  if (c >= 2 && std::abs(entry(0) - entry(1)) <=
                    ScanTolerances::kFlatRel * (1.0 + std::abs(last))) {
    scan.verdict = ScanVerdict::ConvergesNonzero;
    scan.limit_estimate = last;
    return;
  }

  scan.verdict = ScanVerdict::Inconclusive;
  scan.limit_estimate = last;
}

/// Shared scan driver: samples `quantity` at every scale index in
/// [index_of(t_grid.front()), t_max_index] and takes suffix infima.
inline TruncationScan scan_quantity(
    const TimeScale& ts, const std::vector<double>& t_grid,
    std::int64_t t_max_index,
    const std::function<double(std::int64_t)>& quantity) {
  if (t_grid.empty())
    throw std::invalid_argument("scan: empty truncation grid");
  std::vector<std::int64_t> t_idx;
  t_idx.reserve(t_grid.size());
  for (double t : t_grid) t_idx.push_back(ts.index_of(t));
  for (std::size_t i = 1; i < t_idx.size(); ++i)
    if (t_idx[i] <= t_idx[i - 1])
      throw std::invalid_argument("scan: truncation grid must increase");
  const std::int64_t first = t_idx.front();
  const std::int64_t last = std::max(t_max_index, t_idx.back());

  const std::size_t count = static_cast<std::size_t>(last - first + 1);
  std::vector<double> raw(count);
  for (std::size_t j = 0; j < count; ++j)
    raw[j] = quantity(first + static_cast<std::int64_t>(j));

  // Suffix minima with ties resolved toward the smallest T'.
  std::vector<double> suffix_min(count);
  std::vector<std::int64_t> suffix_arg(count);
  suffix_min[count - 1] = raw[count - 1];
  suffix_arg[count - 1] = last;
  for (std::size_t j = count - 1; j-- > 0;) {
    if (raw[j] <= suffix_min[j + 1]) {
      suffix_min[j] = raw[j];
      suffix_arg[j] = first + static_cast<std::int64_t>(j);
    } else {
      suffix_min[j] = suffix_min[j + 1];
      suffix_arg[j] = suffix_arg[j + 1];
    }
  }

  TruncationScan scan;
  for (std::size_t i = 0; i < t_idx.size(); ++i) {
    const std::size_t j = static_cast<std::size_t>(t_idx[i] - first);
    scan.t_values.push_back(ts.point(t_idx[i]));
    scan.inf_values.push_back(suffix_min[j]);
    scan.argmin_tprime.push_back(ts.point(suffix_arg[j]));
  }
  scan.boundary_pinned = suffix_arg[static_cast<std::size_t>(
                             t_idx.back() - first)] == last;
  classify_scan(scan, raw);
  return scan;
}

}  // namespace detail

}  // namespace tsvar
