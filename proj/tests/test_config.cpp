// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "tsvar/config.hpp"
#include "tsvar/report.hpp"

using nlohmann::json;
using tsvar::config_error;
using tsvar::ProblemConfig;

namespace {

json minimal_config() {
  return json{{"schema_version", 1},
              {"timescale", {{"kind", "integer"}, {"anchor", 0.0}}},
              {"order", 2},
              {"initial_conditions", {0.0, 1.0}},
              {"lagrangian", "-(u2)^2"}};
}

}  // namespace

TEST_CASE("a minimal config parses with defaults") {
  auto config = ProblemConfig::from_json(minimal_config());
  CHECK(config.scale_kind == "integer");
  CHECK(config.order == 2);
  CHECK(config.initial_conditions == std::vector<double>{0.0, 1.0});
  CHECK(config.seed == 20120415);
  CHECK(config.tolerances.el_residual == 1e-8);
  CHECK(config.tolerances.admissibility == 1e-9);
  CHECK_FALSE(config.candidate.has_value());

  auto problem = config.make_problem();
  CHECK(problem.order() == 2);
  CHECK(problem.horizon().t_max_index == 200);  // unit-jump default
  CHECK(problem.horizon().t_grid_stride == 10);
}

TEST_CASE("q-scale configs carry their parameters and defaults") {
  json j = minimal_config();
  j["timescale"] = {{"kind", "q"}, {"q", 2.0}, {"anchor", 1.0}};
  auto config = ProblemConfig::from_json(j);
  auto problem = config.make_problem();
  CHECK(problem.a1() == 2.0);
  CHECK(problem.horizon().t_max_index == 40);  // geometric default
  CHECK(problem.scale().point(3) == 8.0);
}

TEST_CASE("unknown fields are errors, not warnings") {
  auto j = minimal_config();
  j["extra"] = 1;
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["timescale"]["h"] = 0.5;  // not a field of an integer scale
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["solver"] = {{"basis", {"t"}}, {"sede", 3}};
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["solver"] = {{"tolerances", {{"el", 1.0}}}};
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);
}

TEST_CASE("schema violations are rejected") {
  auto j = minimal_config();
  j.erase("schema_version");
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["schema_version"] = 2;
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["initial_conditions"] = {0.0};
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["order"] = 0;
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["timescale"]["kind"] = "real";
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["horizon"] = {{"T_max_index", 0}};
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);
}

TEST_CASE("expressions are validated at config time") {
  auto j = minimal_config();
  j["lagrangian"] = "-(u3)^2";  // slot beyond the order
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["solver"] = {{"basis", {"t", "u0"}}};  // basis must be functions of t
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);

  j = minimal_config();
  j["candidate"] = "2t";
  CHECK_THROWS_AS(ProblemConfig::from_json(j), config_error);
}

TEST_CASE("config round-trips through its JSON form") {
  auto j = minimal_config();
  j["horizon"] = {{"T_max_index", 64}, {"T_grid_stride", 4}};
  j["solver"] = {{"basis", {"t^3", "t", "1"}}, {"seed", 99}};
  j["candidate"] = "t";
  auto config = ProblemConfig::from_json(j);
  auto config2 = ProblemConfig::from_json(config.to_json());
  CHECK(config2.basis == config.basis);
  CHECK(config2.seed == 99);
  CHECK(config2.horizon.t_max_index == 64);
  CHECK(config2.candidate == config.candidate);
}

TEST_CASE("verify requires a candidate") {
  auto config = ProblemConfig::from_json(minimal_config());
  CHECK_THROWS_AS(tsvar::run_verify(config), config_error);
}

TEST_CASE("solve requires a basis") {
  auto config = ProblemConfig::from_json(minimal_config());
  CHECK_THROWS_AS(tsvar::run_solve(config), config_error);
}

TEST_CASE("scan validates the condition index") {
  auto j = minimal_config();
  j["candidate"] = "t";
  auto config = ProblemConfig::from_json(j);
  CHECK_THROWS_AS(tsvar::run_scan(config, 0), config_error);
  CHECK_THROWS_AS(tsvar::run_scan(config, 3), config_error);
  CHECK(tsvar::run_scan(config, 2).exit_code == 0);
}

TEST_CASE("verify report content for the straight-line candidate") {
  auto j = minimal_config();
  j["candidate"] = "t";
  j["horizon"] = {{"T_max_index", 60}, {"T_grid_stride", 6}};
  auto result = tsvar::run_verify(ProblemConfig::from_json(j));
  CHECK(result.exit_code == 0);
  CHECK(result.report.at("pass").get<bool>());
  CHECK(result.report.at("admissibility").at("pass").get<bool>());
  CHECK(result.report.at("el").at("max_residual").get<double>() <= 1e-12);
  CHECK(result.report.at("transversality").size() == 2);
}

TEST_CASE("verify flags the divergent cubic with exit code 1") {
  auto j = minimal_config();
  j["candidate"] = "t^3";
  auto result = tsvar::run_verify(ProblemConfig::from_json(j));
  CHECK(result.exit_code == 1);
  CHECK_FALSE(result.report.at("pass").get<bool>());
  bool some_diverges = false;
  for (const auto& scan : result.report.at("transversality"))
    if (scan.at("verdict") == "Diverges") some_diverges = true;
  CHECK(some_diverges);
}

TEST_CASE("battery report on the straight-line candidate") {
  auto j = minimal_config();
  j["candidate"] = "t";
  j["horizon"] = {{"T_max_index", 40}, {"T_grid_stride", 4}};
  auto result = tsvar::run_verify(ProblemConfig::from_json(j), true);
  CHECK(result.exit_code == 0);
  CHECK(result.report.at("battery").at("overall") == "NotRejected");
  CHECK(result.report.at("battery").at("competitors").size() == 24);
}

TEST_CASE("numeric JSON diff tolerates rounding but not structure changes") {
  json a = {{"x", 1.0}, {"arr", {1.0, 2.0}}, {"s", "v"}};
  json b = {{"x", 1.0 + 1e-12}, {"arr", {1.0, 2.0}}, {"s", "v"}};
  std::vector<std::string> diffs;
  tsvar::json_numeric_diff(a, b, "", diffs);
  CHECK(diffs.empty());

  b["x"] = 1.1;
  b["arr"][1] = 3.0;
  b["s"] = "w";
  diffs.clear();
  tsvar::json_numeric_diff(a, b, "", diffs);
  CHECK(diffs.size() == 3);

  json c = b;
  c.erase("s");
  diffs.clear();
  tsvar::json_numeric_diff(a, c, "", diffs);
  CHECK_FALSE(diffs.empty());
}
