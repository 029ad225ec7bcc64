// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsvar/calculus.hpp"
#include "tsvar/config.hpp"
#include "tsvar/scan.hpp"
#include "tsvar/solver.hpp"
#include "tsvar/variational.hpp"

namespace tsvar {

/// Outcome of one batch command: machine-readable report plus the process
/// exit code (0 pass, 1 check/solve failure, 2 usage/config error).
struct CommandResult {
  nlohmann::json report;
  int exit_code = 0;
};

namespace detail {

/// JSON-safe double: negative zero is canonicalized and non-finite values
/// become signed-infinity strings (JSON has no inf/nan literals).
inline nlohmann::json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v == 0.0 ? 0.0 : v;
}

inline nlohmann::json json_array(const std::vector<double>& values) {
  nlohmann::json a = nlohmann::json::array();
  for (double v : values) a.push_back(json_number(v));
  return a;
}

inline nlohmann::json scan_to_json(const TruncationScan& scan, int k) {
  return nlohmann::json{{"k", k},
                        {"verdict", to_string(scan.verdict)},
                        {"limit_estimate", json_number(scan.limit_estimate)},
                        {"boundary_pinned", scan.boundary_pinned},
                        {"T", json_array(scan.t_values)},
                        {"inf_value", json_array(scan.inf_values)},
                        {"argmin_Tprime", json_array(scan.argmin_tprime)},
                        {"pass", scan.verdict == ScanVerdict::ConvergesToZero}};
}

}  // namespace detail

/// Writes content through a temporary file and a rename, so readers never
/// observe a half-written report.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot write file: " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

/// Checks a configured candidate: admissibility residuals, the largest
/// stationarity residual over the horizon grid, one truncation scan per
/// boundary condition, and optionally the default falsification battery.
inline CommandResult run_verify(const ProblemConfig& config,
                                bool with_battery = false) {
  if (!config.candidate)
    throw config_error("verify requires a candidate expression");
  Problem problem = config.make_problem();
  Trajectory candidate = config.make_candidate(problem.scale_ptr());
  const int r = problem.order();

  nlohmann::json report{{"command", "verify"},
                        {"schema_version", 1},
                        {"candidate", *config.candidate}};

  const auto residuals = admissibility_check(problem, candidate);
  bool admissible = true;
  for (double res : residuals)
    if (std::abs(res) > config.tolerances.admissibility) admissible = false;
  report["admissibility"] = {{"residuals", detail::json_array(residuals)},
                             {"tolerance", config.tolerances.admissibility},
                             {"pass", admissible}};

  double max_el = 0.0;
  const std::int64_t grid_points = problem.horizon().t_max_index + 1;
  for (std::int64_t j = 0; j < grid_points; ++j) {
    const double t = problem.scale().point(problem.start_index() + j);
    max_el = std::max(max_el, std::abs(el_residual(problem, candidate, t)));
  }
  const bool el_pass = max_el <= config.tolerances.el_residual;
  report["el"] = {{"max_residual", detail::json_number(max_el)},
                  {"grid_points", grid_points},
                  {"tolerance", config.tolerances.el_residual},
                  {"pass", el_pass}};

  bool scans_pass = true;
  nlohmann::json scans = nlohmann::json::array();
  for (int k = 1; k <= r; ++k) {
    const auto scan = transversality_scan(problem, candidate, k);
    if (scan.verdict != ScanVerdict::ConvergesToZero) scans_pass = false;
    scans.push_back(detail::scan_to_json(scan, k));
  }
  report["transversality"] = scans;

  bool battery_pass = true;
  if (with_battery) {
    const auto battery = default_variation_battery(problem, candidate);
    const auto maximality = weak_maximality_test(problem, candidate, battery);
    battery_pass = !maximality.rejected();
    nlohmann::json competitors = nlohmann::json::array();
    for (const auto& result : maximality.competitors)
      competitors.push_back(
          {{"name", result.name},
           {"admissible", result.admissible},
           {"verdict", to_string(result.scan.verdict)},
           {"limit_estimate", detail::json_number(result.scan.limit_estimate)},
           {"rejects", result.rejects}});
    report["battery"] = {
        {"overall", maximality.rejected() ? "Rejected" : "NotRejected"},
        {"witness", maximality.rejected()
                        ? maximality.competitors[static_cast<std::size_t>(
                                                     maximality.witness)]
                              .name
                        : ""},
        {"competitors", competitors}};
  }

  const bool pass = admissible && el_pass && scans_pass && battery_pass;
  report["pass"] = pass;
  return CommandResult{report, pass ? 0 : 1};
}

/// Runs the basis-ansatz solver and reports coefficients, residual norms,
/// family dimension, Gram conditioning, and the pinned candidate's scans.
inline CommandResult run_solve(const ProblemConfig& config) {
  if (config.basis.empty())
    throw config_error("solve requires a non-empty solver.basis");
  Problem problem = config.make_problem();
  SolverOptions options;
  options.seed = config.seed;

  nlohmann::json report{{"command", "solve"},
                        {"schema_version", 1},
                        {"basis", config.basis},
                        {"seed", config.seed}};
  try {
    const SolveResult result =
        solve_candidate(problem, config.make_basis(), options);
    report["coefficients"] = detail::json_array(result.ansatz.coefficients);
    report["el_residual_norm"] = detail::json_number(result.el_residual_norm);
    report["family_dim"] = result.family_dim;
    report["gram_condition"] = detail::json_number(result.gram_condition);
    report["linear_stage1"] = result.linear_stage1;
    report["stage2_objective"] = detail::json_number(result.stage2_objective);
    nlohmann::json scans = nlohmann::json::array();
    for (std::size_t k = 0; k < result.transversality.size(); ++k)
      scans.push_back(detail::scan_to_json(result.transversality[k],
                                           static_cast<int>(k) + 1));
    report["transversality"] = scans;
    report["pass"] = true;
    return CommandResult{report, 0};
  } catch (const convergence_error& e) {
    report["error"] = e.what();
    report["best_iterate"] = detail::json_array(e.best_iterate());
    report["objective"] = detail::json_number(e.objective());
    report["pass"] = false;
    return CommandResult{report, 1};
  } catch (const basis_error& e) {
    report["error"] = e.what();
    report["pass"] = false;
    return CommandResult{report, 1};
  } catch (const infeasibility_error& e) {
    report["error"] = e.what();
    report["pass"] = false;
    return CommandResult{report, 1};
  }
}

/// Scans one transversality condition of the configured candidate.
inline CommandResult run_scan(const ProblemConfig& config, int k,
                              TruncationScan* scan_out = nullptr) {
  if (!config.candidate)
    throw config_error("scan requires a candidate expression");
  Problem problem = config.make_problem();
  if (k < 1 || k > problem.order())
    throw config_error("scan: k must lie in 1..order");
  Trajectory candidate = config.make_candidate(problem.scale_ptr());
  const auto scan = transversality_scan(problem, candidate, k);
  if (scan_out) *scan_out = scan;
  nlohmann::json report{{"command", "scan"},
                        {"schema_version", 1},
                        {"candidate", *config.candidate},
                        {"scan", detail::scan_to_json(scan, k)}};
  report["pass"] = scan.verdict == ScanVerdict::ConvergesToZero;
  return CommandResult{report,
                       scan.verdict == ScanVerdict::ConvergesToZero ? 0 : 1};
}

/// Integration-by-parts identity battery on the configured scale: random
/// polynomial pairs of degree <= 4, orders r in {1,2,3}, i in 1..r, over a
/// 10-point window. The largest relative defect must stay below 1e-9.
inline CommandResult run_ibp_check(const ProblemConfig& config) {
  const auto scale = config.make_scale();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);

  constexpr int kPairs = 50;
  constexpr double kTolerance = 1e-9;
  double max_residual = 0.0;
  for (int pair = 0; pair < kPairs; ++pair) {
    std::vector<double> fc(5), gc(5);
    for (auto& c : fc) c = dist(rng);
    for (auto& c : gc) c = dist(rng);
    auto horner = [](const std::vector<double>& coeffs, double t) {
      double acc = 0.0;
      for (std::size_t i = coeffs.size(); i-- > 0;) acc = acc * t + coeffs[i];
      return acc;
    };
    Trajectory f(scale, [fc, horner](double t) { return horner(fc, t); });
    Trajectory g(scale, [gc, horner](double t) { return horner(gc, t); });
    for (int r = 1; r <= 3; ++r)
      for (int i = 1; i <= r; ++i) {
        const auto parts =
            ibp_parts(f, g, scale->point(0), scale->point(10), r, i);
        max_residual =
            std::max(max_residual, std::abs(parts.residual()) / parts.scale());
      }
  }

  const bool pass = max_residual <= kTolerance;
  nlohmann::json report{{"command", "ibp-check"},
                        {"schema_version", 1},
                        {"pairs", kPairs},
                        {"orders", {1, 2, 3}},
                        {"window_points", 10},
                        {"max_residual_rel", detail::json_number(max_residual)},
                        {"tolerance", kTolerance},
                        {"seed", config.seed},
                        {"pass", pass}};
  return CommandResult{report, pass ? 0 : 1};
}

/// Recursive JSON comparison with a relative tolerance for numbers; appends
/// the paths of mismatching nodes to `diffs`.
inline void json_numeric_diff(const nlohmann::json& a, const nlohmann::json& b,
                              const std::string& path,
                              std::vector<std::string>& diffs,
                              double tol = 1e-9) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>();
    const double y = b.get<double>();
    if (std::abs(x - y) > tol * std::max({1.0, std::abs(x), std::abs(y)}))
      diffs.push_back(path);
    return;
  }
  if (a.type() != b.type()) {
    diffs.push_back(path);
    return;
  }
  if (a.is_object()) {
    for (const auto& item : a.items()) {
      if (!b.contains(item.key()))
        diffs.push_back(path + "/" + item.key());
      else
        json_numeric_diff(item.value(), b.at(item.key()),
                          path + "/" + item.key(), diffs, tol);
    }
    for (const auto& item : b.items())
      if (!a.contains(item.key())) diffs.push_back(path + "/" + item.key());
    return;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) {
      diffs.push_back(path);
      return;
    }
    for (std::size_t i = 0; i < a.size(); ++i)
      json_numeric_diff(a[i], b[i], path + "/" + std::to_string(i), diffs,
                        tol);
    return;
  }
  if (a != b) diffs.push_back(path);
}

/// Reproduces the two bundled reference problems end to end (solve + verify)
/// and diffs the reports against the golden files under <data_dir>/golden.
/// With write_golden set, regenerates the golden files instead.
inline CommandResult run_examples(const std::string& data_dir,
                                  bool write_golden = false) {
  nlohmann::json report{{"command", "examples"}, {"schema_version", 1}};
  bool pass = true;
  for (const std::string name : {"example1", "example2"}) {
    const std::string config_path = data_dir + "/" + name + ".json";
    ProblemConfig config = ProblemConfig::load(config_path);
    nlohmann::json produced{{"solve", run_solve(config).report},
                            {"verify", run_verify(config).report}};
    report["results"][name] = produced;

    const std::filesystem::path golden_path =
        std::filesystem::path(data_dir) / "golden" / (name + ".json");
    if (write_golden) {
      atomic_write_file(golden_path, produced.dump(2) + "\n");
      report["diffs"][name] = nlohmann::json::array();
      continue;
    }
    std::ifstream in(golden_path);
    if (!in) throw config_error("cannot open golden file: " + golden_path.string());
    nlohmann::json golden;
    in >> golden;
    std::vector<std::string> diffs;
    json_numeric_diff(produced, golden, "", diffs);
    report["diffs"][name] = diffs;
    if (!diffs.empty()) pass = false;
  }
  report["pass"] = pass;
  return CommandResult{report, pass ? 0 : 1};
}

}  // namespace tsvar
