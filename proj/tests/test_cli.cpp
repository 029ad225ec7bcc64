// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the tsvar binary: exit codes, report files, and
// byte-stable output. TSVAR_CLI_PATH and TSVAR_DATA_DIR come from the build.
#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <sys/wait.h>

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(TSVAR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path unique_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() /
             ("tsvar_cli_" + tag + "_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json load_json(const fs::path& path) {
  return nlohmann::json::parse(slurp(path));
}

const std::string kExample1 =
    std::string(TSVAR_DATA_DIR) + "/example1.json";
const std::string kExample2 =
    std::string(TSVAR_DATA_DIR) + "/example2.json";

fs::path write_config(const fs::path& dir, const std::string& name,
                      nlohmann::json config) {
  const auto path = dir / name;
  std::ofstream out(path);
  out << config.dump(2);
  return path;
}

}  // namespace

TEST_CASE("verify passes the bundled candidates") {
  auto out = unique_dir("verify");
  CHECK(run_cli("verify --config " + kExample1 + " --out " + out.string()) == 0);
  auto report = load_json(out / "report.json");
  CHECK(report.at("pass").get<bool>());
  CHECK(report.at("el").at("max_residual").get<double>() <= 1e-12);
  CHECK(run_cli("verify --config " + kExample2 + " --out " + out.string()) == 0);
  fs::remove_all(out);
}

TEST_CASE("verify rejects an equation-null but divergent candidate") {
  auto out = unique_dir("verify_bad");
  auto config = load_json(kExample1);
  config["candidate"] = "t^3";
  auto path = write_config(out, "bad.json", config);
  CHECK(run_cli("verify --config " + path.string() + " --out " + out.string()) ==
        1);
  auto report = load_json(out / "report.json");
  CHECK_FALSE(report.at("pass").get<bool>());
  fs::remove_all(out);
}

TEST_CASE("usage and config errors exit with code 2") {
  auto out = unique_dir("usage");
  auto config = load_json(kExample1);
  config.erase("candidate");
  auto no_candidate = write_config(out, "no_candidate.json", config);
  CHECK(run_cli("verify --config " + no_candidate.string() + " --out " +
                out.string()) == 2);

  config = load_json(kExample1);
  config["surprise"] = true;
  auto unknown_field = write_config(out, "unknown.json", config);
  CHECK(run_cli("verify --config " + unknown_field.string() + " --out " +
                out.string()) == 2);

  CHECK(run_cli("verify --config /nonexistent.json") == 2);
  CHECK(run_cli("verify") == 2);          // missing --config
  CHECK(run_cli("") == 2);                // missing subcommand
  CHECK(run_cli("frobnicate") == 2);      // unknown subcommand
  CHECK(run_cli("scan --config " + kExample1 + " --k 7") == 2);
  fs::remove_all(out);
}

TEST_CASE("solve writes the expected coefficients") {
  auto out = unique_dir("solve");
  REQUIRE(run_cli("solve --config " + kExample1 + " --out " + out.string()) ==
          0);
  auto report = load_json(out / "report.json");
  const auto coeffs = report.at("coefficients").get<std::vector<double>>();
  REQUIRE(coeffs.size() == 4);
  CHECK(std::abs(coeffs[0]) <= 1e-8);
  CHECK(std::abs(coeffs[1]) <= 1e-8);
  CHECK(std::abs(coeffs[2] - 1.0) <= 1e-8);
  CHECK(std::abs(coeffs[3]) <= 1e-8);
  CHECK(report.at("family_dim").get<int>() == 2);
  fs::remove_all(out);
}

TEST_CASE("solve surfaces basis errors with exit code 1 and a partial report") {
  auto out = unique_dir("solve_bad");
  auto config = load_json(kExample1);
  config["solver"]["basis"] = {"t", "2*t"};
  auto path = write_config(out, "dependent.json", config);
  CHECK(run_cli("solve --config " + path.string() + " --out " + out.string()) ==
        1);
  auto report = load_json(out / "report.json");
  CHECK(report.contains("error"));
  CHECK_FALSE(report.at("pass").get<bool>());
  fs::remove_all(out);
}

TEST_CASE("scan emits the CSV surface") {
  auto out = unique_dir("scan");
  REQUIRE(run_cli("scan --config " + kExample1 + " --k 2 --out " +
                  out.string()) == 0);
  auto csv = slurp(out / "scan_k2.csv");
  CHECK(csv.rfind("T,inf_value,argmin_Tprime\n", 0) == 0);
  // All-zero column for the vanishing-factor condition.
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(line.find(",0,") != std::string::npos);
    ++rows;
  }
  CHECK(rows == 20);

  REQUIRE(run_cli("scan --config " + kExample1 + " --k 1 --format json --out " +
                  out.string()) == 0);
  auto report = load_json(out / "scan_k1.json");
  CHECK(report.at("scan").at("verdict") == "ConvergesToZero");
  fs::remove_all(out);
}

TEST_CASE("ibp-check passes on the bundled scales") {
  auto out = unique_dir("ibp");
  for (const auto& config : {kExample1, kExample2}) {
    CHECK(run_cli("ibp-check --config " + config + " --out " + out.string()) ==
          0);
    auto report = load_json(out / "report.json");
    CHECK(report.at("max_residual_rel").get<double>() <= 1e-9);
  }
  fs::remove_all(out);
}

TEST_CASE("examples reproduce the golden reports") {
  auto out = unique_dir("examples");
  REQUIRE(run_cli("examples --data " + std::string(TSVAR_DATA_DIR) +
                  " --out " + out.string()) == 0);
  auto report = load_json(out / "report.json");
  CHECK(report.at("diffs").at("example1").empty());
  CHECK(report.at("diffs").at("example2").empty());
  fs::remove_all(out);
}

TEST_CASE("reports are byte-stable across runs") {
  auto out1 = unique_dir("stable1");
  auto out2 = unique_dir("stable2");
  REQUIRE(run_cli("solve --config " + kExample2 + " --out " + out1.string()) ==
          0);
  REQUIRE(run_cli("solve --config " + kExample2 + " --out " + out2.string()) ==
          0);
  CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));
  fs::remove_all(out1);
  fs::remove_all(out2);
}
