// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsvar/errors.hpp"
#include "tsvar/exprlang.hpp"
#include "tsvar/problem.hpp"
#include "tsvar/solver.hpp"
#include "tsvar/trajectory.hpp"

namespace tsvar {

/// Batch problem description. The schema is strict: unknown fields are
/// configuration errors, not warnings, so a typo cannot masquerade as a
/// mathematical failure.
struct ProblemConfig {
  struct Tolerances {
    double el_residual = 1e-8;
    double admissibility = 1e-9;
  };

  std::string scale_kind;  // "integer" | "h" | "q" | "affine"
  double anchor = 0.0;
  double h = 0.0;
  double q = 0.0;
  double a1 = 0.0;
  double a0 = 0.0;

  int order = 0;
  std::vector<double> initial_conditions;
  std::string lagrangian;
  Horizon horizon;  // zero fields mean scale-dependent defaults
  std::vector<std::string> basis;
  std::uint64_t seed = 20120415;
  Tolerances tolerances;
  std::optional<std::string> candidate;

  static ProblemConfig from_json(const nlohmann::json& j);
  static ProblemConfig load(const std::string& path);

  std::shared_ptr<const TimeScale> make_scale() const {
    if (scale_kind == "integer")
      return std::make_shared<const TimeScale>(TimeScale::integers(anchor));
    if (scale_kind == "h")
      return std::make_shared<const TimeScale>(TimeScale::h_step(h, anchor));
    if (scale_kind == "q")
      return std::make_shared<const TimeScale>(TimeScale::q_scale(q, anchor));
    return std::make_shared<const TimeScale>(TimeScale::affine(a1, a0, anchor));
  }

  Problem make_problem() const {
    try {
      return Problem(make_scale(), order, anchor, initial_conditions,
                     Lagrangian::from_expression(lagrangian, order), horizon);
    } catch (const std::invalid_argument& e) {
      throw config_error(std::string("invalid problem: ") + e.what());
    } catch (const parse_error& e) {
      throw config_error(std::string("lagrangian: ") + e.what());
    }
  }

  std::vector<BasisFunction> make_basis() const {
    try {
      return parse_basis(basis);
    } catch (const parse_error& e) {
      throw config_error(std::string("basis: ") + e.what());
    }
  }

  Trajectory make_candidate(std::shared_ptr<const TimeScale> scale) const {
    if (!candidate) throw config_error("config has no candidate expression");
    try {
      Expr e = Expr::parse_time_function(*candidate);
      return Trajectory(
          std::move(scale), [e](double t) { return e.evaluate(t); },
          *candidate);
    } catch (const parse_error& e) {
      throw config_error(std::string("candidate: ") + e.what());
    }
  }

  nlohmann::json to_json() const;
};

namespace detail {

inline void require_keys(const nlohmann::json& j,
                         std::initializer_list<const char*> allowed,
                         const char* context) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) known = true;
    if (!known)
      throw config_error(std::string("unknown field \"") + item.key() +
                         "\" in " + context);
  }
}

inline const nlohmann::json& require_field(const nlohmann::json& j,
                                           const char* key,
                                           const char* context) {
  auto it = j.find(key);
  if (it == j.end())
    throw config_error(std::string("missing field \"") + key + "\" in " +
                       context);
  return *it;
}

inline double require_number(const nlohmann::json& j, const char* key,
                             const char* context) {
  const auto& v = require_field(j, key, context);
  if (!v.is_number())
    throw config_error(std::string("field \"") + key + "\" in " + context +
                       " must be a number");
  return v.get<double>();
}

}  // namespace detail

inline ProblemConfig ProblemConfig::from_json(const nlohmann::json& j) {
  using detail::require_field;
  using detail::require_keys;
  using detail::require_number;

  if (!j.is_object()) throw config_error("config root must be an object");
  require_keys(j,
               {"schema_version", "timescale", "order", "initial_conditions",
                "lagrangian", "horizon", "solver", "candidate"},
               "config");
  const auto& version = require_field(j, "schema_version", "config");
  if (!version.is_number_integer() || version.get<int>() != 1)
    throw config_error("schema_version must be the integer 1");

  ProblemConfig config;

  const auto& ts = require_field(j, "timescale", "config");
  if (!ts.is_object()) throw config_error("timescale must be an object");
  const auto& kind = require_field(ts, "kind", "timescale");
  if (!kind.is_string()) throw config_error("timescale.kind must be a string");
  config.scale_kind = kind.get<std::string>();
  if (config.scale_kind == "integer") {
    require_keys(ts, {"kind", "anchor"}, "timescale");
  } else if (config.scale_kind == "h") {
    require_keys(ts, {"kind", "h", "anchor"}, "timescale");
    config.h = require_number(ts, "h", "timescale");
  } else if (config.scale_kind == "q") {
    require_keys(ts, {"kind", "q", "anchor"}, "timescale");
    config.q = require_number(ts, "q", "timescale");
  } else if (config.scale_kind == "affine") {
    require_keys(ts, {"kind", "a1", "a0", "anchor"}, "timescale");
    config.a1 = require_number(ts, "a1", "timescale");
    config.a0 = require_number(ts, "a0", "timescale");
  } else {
    throw config_error("timescale.kind must be one of integer, h, q, affine");
  }
  config.anchor = require_number(ts, "anchor", "timescale");

  const auto& order = require_field(j, "order", "config");
  if (!order.is_number_integer() || order.get<int>() < 1)
    throw config_error("order must be an integer >= 1");
  config.order = order.get<int>();

  const auto& ic = require_field(j, "initial_conditions", "config");
  if (!ic.is_array())
    throw config_error("initial_conditions must be an array of numbers");
  for (const auto& v : ic) {
    if (!v.is_number())
      throw config_error("initial_conditions must be an array of numbers");
    config.initial_conditions.push_back(v.get<double>());
  }
  if (static_cast<int>(config.initial_conditions.size()) != config.order)
    throw config_error(
        "initial_conditions length must equal the problem order");

  const auto& lagrangian = require_field(j, "lagrangian", "config");
  if (!lagrangian.is_string())
    throw config_error("lagrangian must be an expression string");
  config.lagrangian = lagrangian.get<std::string>();

  if (auto it = j.find("horizon"); it != j.end()) {
    if (!it->is_object()) throw config_error("horizon must be an object");
    require_keys(*it, {"T_max_index", "T_grid_stride"}, "horizon");
    if (auto f = it->find("T_max_index"); f != it->end()) {
      if (!f->is_number_integer() || f->get<std::int64_t>() < 1)
        throw config_error("horizon.T_max_index must be an integer >= 1");
      config.horizon.t_max_index = f->get<std::int64_t>();
    }
    if (auto f = it->find("T_grid_stride"); f != it->end()) {
      if (!f->is_number_integer() || f->get<std::int64_t>() < 1)
        throw config_error("horizon.T_grid_stride must be an integer >= 1");
      config.horizon.t_grid_stride = f->get<std::int64_t>();
    }
  }

  if (auto it = j.find("solver"); it != j.end()) {
    if (!it->is_object()) throw config_error("solver must be an object");
    require_keys(*it, {"basis", "seed", "tolerances"}, "solver");
    if (auto f = it->find("basis"); f != it->end()) {
      if (!f->is_array()) throw config_error("solver.basis must be an array");
      for (const auto& v : *f) {
        if (!v.is_string())
          throw config_error("solver.basis entries must be strings");
        config.basis.push_back(v.get<std::string>());
      }
    }
    if (auto f = it->find("seed"); f != it->end()) {
      if (!f->is_number_integer())
        throw config_error("solver.seed must be an integer");
      config.seed = f->get<std::uint64_t>();
    }
    if (auto f = it->find("tolerances"); f != it->end()) {
      if (!f->is_object())
        throw config_error("solver.tolerances must be an object");
      require_keys(*f, {"el_residual", "admissibility"}, "tolerances");
      if (auto t = f->find("el_residual"); t != f->end())
        config.tolerances.el_residual = t->get<double>();
      if (auto t = f->find("admissibility"); t != f->end())
        config.tolerances.admissibility = t->get<double>();
    }
  }

  if (auto it = j.find("candidate"); it != j.end()) {
    if (!it->is_string())
      throw config_error("candidate must be an expression string");
    config.candidate = it->get<std::string>();
  }

  // Surface expression problems at validation time, before any computation.
  try {
    Expr::parse(config.lagrangian, config.order);
    for (const auto& src : config.basis) Expr::parse_time_function(src);
    if (config.candidate) Expr::parse_time_function(*config.candidate);
  } catch (const parse_error& e) {
    throw config_error(std::string("expression: ") + e.what());
  }
  return config;
}

inline ProblemConfig ProblemConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline nlohmann::json ProblemConfig::to_json() const {
  nlohmann::json ts{{"kind", scale_kind}, {"anchor", anchor}};
  if (scale_kind == "h") ts["h"] = h;
  if (scale_kind == "q") ts["q"] = q;
  if (scale_kind == "affine") {
    ts["a1"] = a1;
    ts["a0"] = a0;
  }
  nlohmann::json j{{"schema_version", 1},
                   {"timescale", ts},
                   {"order", order},
                   {"initial_conditions", initial_conditions},
                   {"lagrangian", lagrangian}};
  if (horizon.t_max_index > 0 || horizon.t_grid_stride > 0) {
    nlohmann::json h_json;
    if (horizon.t_max_index > 0) h_json["T_max_index"] = horizon.t_max_index;
    if (horizon.t_grid_stride > 0)
      h_json["T_grid_stride"] = horizon.t_grid_stride;
    j["horizon"] = h_json;
  }
  nlohmann::json solver{{"seed", seed}};
  if (!basis.empty()) solver["basis"] = basis;
  j["solver"] = solver;
  if (candidate) j["candidate"] = *candidate;
  return j;
}

}  // namespace tsvar
