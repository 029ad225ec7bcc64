// SPDX-License-Identifier: Apache-2.0
//
// tsvar: batch front door for time-scale variational problems.
// Subcommands load a JSON problem config, run the requested check or solve,
// write a machine-readable report into --out, and print a short summary.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <string>

#include "tsvar/report.hpp"

namespace {

namespace fs = std::filesystem;

void write_report(const fs::path& out_dir, const std::string& filename,
                  const nlohmann::json& report) {
  fs::create_directories(out_dir);
  tsvar::atomic_write_file(out_dir / filename, report.dump(2) + "\n");
}

void print_scan_summary(const nlohmann::json& report) {
  for (const auto& scan : report.at("transversality"))
    std::cout << "  transversality k=" << scan.at("k").get<int>() << ": "
              << scan.at("verdict").get<std::string>() << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"calculus of variations on time scales"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string data_dir = "data";
  std::string format = "csv";
  int k = 1;
  bool battery = false;
  bool write_golden = false;

  auto* verify = app.add_subcommand("verify", "check a candidate trajectory");
  verify->add_option("--config", config_path, "problem config")->required();
  verify->add_option("--out", out_dir, "report directory");
  verify->add_flag("--battery", battery, "run the weak-maximality battery");

  auto* solve = app.add_subcommand("solve", "fit a basis ansatz");
  solve->add_option("--config", config_path, "problem config")->required();
  solve->add_option("--out", out_dir, "report directory");

  auto* scan = app.add_subcommand("scan", "scan one transversality condition");
  scan->add_option("--config", config_path, "problem config")->required();
  scan->add_option("--k", k, "condition index (1..order)")->required();
  scan->add_option("--out", out_dir, "report directory");
  scan->add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* ibp = app.add_subcommand("ibp-check",
                                 "integration-by-parts identity battery");
  ibp->add_option("--config", config_path, "problem config")->required();
  ibp->add_option("--out", out_dir, "report directory");

  auto* examples =
      app.add_subcommand("examples", "reproduce the bundled reference runs");
  examples->add_option("--data", data_dir,
                       "directory with example configs and golden files");
  examples->add_option("--out", out_dir, "report directory");
  examples->add_flag("--write-golden", write_golden,
                     "regenerate the golden files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (verify->parsed()) {
      const auto config = tsvar::ProblemConfig::load(config_path);
      const auto result = tsvar::run_verify(config, battery);
      write_report(out_dir, "report.json", result.report);
      std::cout << "verify: " << (result.exit_code == 0 ? "PASS" : "FAIL")
                << " (max |EL residual| = "
                << result.report.at("el").at("max_residual").dump() << ")\n";
      print_scan_summary(result.report);
      return result.exit_code;
    }
    if (solve->parsed()) {
      const auto config = tsvar::ProblemConfig::load(config_path);
      const auto result = tsvar::run_solve(config);
      write_report(out_dir, "report.json", result.report);
      if (result.report.contains("coefficients")) {
        std::cout << "solve: coefficients = "
                  << result.report.at("coefficients").dump()
                  << ", family_dim = "
                  << result.report.at("family_dim").get<int>() << "\n";
        print_scan_summary(result.report);
      } else {
        std::cout << "solve: FAIL ("
                  << result.report.at("error").get<std::string>() << ")\n";
      }
      return result.exit_code;
    }
    if (scan->parsed()) {
      const auto config = tsvar::ProblemConfig::load(config_path);
      tsvar::TruncationScan truncation;
      const auto result = tsvar::run_scan(config, k, &truncation);
      const std::string stem = "scan_k" + std::to_string(k);
      if (format == "csv") {
        std::ostringstream csv;
        truncation.write_csv(csv);
        fs::create_directories(out_dir);
        tsvar::atomic_write_file(fs::path(out_dir) / (stem + ".csv"),
                                 csv.str());
      } else {
        write_report(out_dir, stem + ".json", result.report);
      }
      std::cout << "scan k=" << k << ": "
                << result.report.at("scan").at("verdict").get<std::string>()
                << "\n";
      return result.exit_code;
    }
    if (ibp->parsed()) {
      const auto config = tsvar::ProblemConfig::load(config_path);
      const auto result = tsvar::run_ibp_check(config);
      write_report(out_dir, "report.json", result.report);
      std::cout << "ibp-check: " << (result.exit_code == 0 ? "PASS" : "FAIL")
                << " (max relative residual = "
                << result.report.at("max_residual_rel").dump() << ")\n";
      return result.exit_code;
    }
    if (examples->parsed()) {
      const auto result = tsvar::run_examples(data_dir, write_golden);
      write_report(out_dir, "report.json", result.report);
      for (const auto& item : result.report.at("diffs").items())
        std::cout << item.key() << ": "
                  << (item.value().empty()
                          ? "golden match"
                          : "golden diff at " + item.value().dump())
                  << "\n";
      return result.exit_code;
    }
  } catch (const tsvar::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tsvar::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
