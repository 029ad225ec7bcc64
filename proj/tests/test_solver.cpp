// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "test_problems.hpp"
#include "tsvar/solver.hpp"

using Catch::Approx;
using tsvar::BasisFunction;
using tsvar::Lagrangian;
using tsvar::Problem;
using tsvar::ScanVerdict;
using tsvar::SolverOptions;
using namespace tsvar_test;

namespace {

const std::vector<std::string> kCubicBasis = {"t^3", "t^2", "t", "1"};
const std::vector<std::string> kQArcBasis = {"t^2", "t", "t*ln(t)", "1"};

}  // namespace

TEST_CASE("bending problem: solver recovers the straight line") {
  auto p = bending_problem();
  auto result = tsvar::solve_candidate(p, tsvar::parse_basis(kCubicBasis));

  REQUIRE(result.ansatz.coefficients.size() == 4);
  CHECK(std::abs(result.ansatz.coefficients[0]) <= 1e-8);
  CHECK(std::abs(result.ansatz.coefficients[1]) <= 1e-8);
  CHECK(result.ansatz.coefficients[2] == Approx(1.0).margin(1e-8));
  CHECK(std::abs(result.ansatz.coefficients[3]) <= 1e-8);

  CHECK(result.family_dim == 2);
  CHECK(result.linear_stage1);
  CHECK(result.el_residual_norm <= 1e-10);
  CHECK(result.gram_condition > 1.0);
  REQUIRE(result.transversality.size() == 2);
  for (const auto& scan : result.transversality)
    CHECK(scan.verdict == ScanVerdict::ConvergesToZero);

  // Solver output is admissible and stationary on its collocation grid.
  auto x = result.ansatz.trajectory(p.scale_ptr());
  for (double res : tsvar::admissibility_check(p, x))
    CHECK(std::abs(res) <= 1e-9);
  for (double t : result.collocation_points)
    CHECK(std::abs(tsvar::el_residual(p, x, t)) <= 1e-8);
}

TEST_CASE("bending problem on h-step scales") {
  for (double h : {0.5, 0.1}) {
    auto p = bending_problem(h_step(h, 0.0));
    auto result = tsvar::solve_candidate(p, tsvar::parse_basis(kCubicBasis));
    CHECK(std::abs(result.ansatz.coefficients[0]) <= 1e-8);
    CHECK(std::abs(result.ansatz.coefficients[1]) <= 1e-8);
    CHECK(result.ansatz.coefficients[2] == Approx(1.0).margin(1e-8));
    CHECK(std::abs(result.ansatz.coefficients[3]) <= 1e-8);
    CHECK(result.family_dim == 2);
  }
}

TEST_CASE("q-scale problem: solver recovers beta*t - beta + alpha") {
  auto p = q_arc_problem(1.0, 2.0);
  auto result = tsvar::solve_candidate(p, tsvar::parse_basis(kQArcBasis));

  REQUIRE(result.ansatz.coefficients.size() == 4);
  CHECK(std::abs(result.ansatz.coefficients[0]) <= 1e-6);   // k1
  CHECK(result.ansatz.coefficients[1] == Approx(2.0).margin(1e-6));
  CHECK(std::abs(result.ansatz.coefficients[2]) <= 1e-6);   // k3
  CHECK(result.ansatz.coefficients[3] == Approx(-1.0).margin(1e-6));
  CHECK(result.family_dim == 2);
  for (const auto& scan : result.transversality)
    CHECK(scan.verdict == ScanVerdict::ConvergesToZero);
}

TEST_CASE("a basis pinned by the initial conditions alone") {
  auto p = bending_problem();
  auto result = tsvar::solve_candidate(p, tsvar::parse_basis({"t", "1"}));
  CHECK(result.ansatz.coefficients[0] == Approx(1.0).margin(1e-12));
  CHECK(std::abs(result.ansatz.coefficients[1]) <= 1e-12);
  CHECK(result.family_dim == 0);
  CHECK(result.el_residual_norm <= 1e-12);
}

TEST_CASE("family analysis dimensions") {
  auto p1 = bending_problem();
  CHECK(tsvar::family_analysis(p1, tsvar::parse_basis(kCubicBasis)).family_dim ==
        2);
  CHECK(tsvar::family_analysis(p1, tsvar::parse_basis({"t", "1"})).family_dim ==
        0);
  auto p2 = q_arc_problem(1.0, 2.0);
  auto fam = tsvar::family_analysis(p2, tsvar::parse_basis(kQArcBasis));
  CHECK(fam.family_dim == 2);
  // Orthonormal directions.
  for (const auto& dir : fam.null_basis) {
    double norm = 0.0;
    for (double v : dir) norm += v * v;
    CHECK(norm == Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("rank-deficient bases are rejected") {
  auto p = bending_problem();
  CHECK_THROWS_AS(tsvar::solve_candidate(p, tsvar::parse_basis({"t", "2*t"})),
                  tsvar::basis_error);
  CHECK_THROWS_AS(tsvar::solve_candidate(p, tsvar::parse_basis({"t"})),
                  tsvar::basis_error);
}

TEST_CASE("infeasible initial conditions are reported") {
  auto ts = integers(0.0);
  Problem p(ts, 2, 0.0, {5.0, 1.0},
            Lagrangian::from_expression("-(u2)^2", 2));
  // Both basis functions vanish at the start point, so x(0) = 5 is out of
  // reach.
  CHECK_THROWS_AS(tsvar::solve_candidate(p, tsvar::parse_basis({"t", "t^2"})),
                  tsvar::infeasibility_error);
}

TEST_CASE("basis rescaling halves the coefficients, not the trajectory") {
  auto p = bending_problem();
  auto base = tsvar::solve_candidate(p, tsvar::parse_basis(kCubicBasis));
  auto scaled = tsvar::solve_candidate(
      p, tsvar::parse_basis({"2*t^3", "2*t^2", "2*t", "2"}));
  auto x1 = base.ansatz.trajectory(p.scale_ptr());
  auto x2 = scaled.ansatz.trajectory(p.scale_ptr());
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(scaled.ansatz.coefficients[j] ==
          Approx(base.ansatz.coefficients[j] / 2.0).margin(1e-10));
  for (double t : p.scale().grid(0.0, 12))
    CHECK(x1(t) == Approx(x2(t)).margin(1e-10));
}

TEST_CASE("pinning is independent of the random restarts") {
  auto p1 = bending_problem();
  auto p2 = q_arc_problem(1.0, 2.0);
  SolverOptions a;
  a.seed = 1;
  SolverOptions b;
  b.seed = 987654321;
  b.stage2_starts = 9;
  for (int which : {1, 2}) {
    const auto& p = which == 1 ? p1 : p2;
    const auto basis = tsvar::parse_basis(which == 1 ? kCubicBasis : kQArcBasis);
    auto ra = tsvar::solve_candidate(p, basis, a);
    auto rb = tsvar::solve_candidate(p, basis, b);
    for (std::size_t j = 0; j < basis.size(); ++j)
      CHECK(ra.ansatz.coefficients[j] ==
            Approx(rb.ansatz.coefficients[j]).margin(1e-6));
  }
}

TEST_CASE("nonlinear stationarity systems take the iterative path") {
  auto ts = integers(0.0);
  // d_{u0} L = 3 u0^2 makes the residual quadratic in the coefficients;
  // the only stationary member of the x(0) = 0 line family is x = 0.
  Problem p(ts, 1, 0.0, {0.0},
            Lagrangian::from_expression("u0^3 - u1^2", 1));
  auto result = tsvar::solve_candidate(p, tsvar::parse_basis({"t", "1"}));
  CHECK_FALSE(result.linear_stage1);
  CHECK(std::abs(result.ansatz.coefficients[0]) <= 1e-6);
  CHECK(std::abs(result.ansatz.coefficients[1]) <= 1e-6);
  CHECK(result.el_residual_norm <= 1e-8);
}

TEST_CASE("unreachable stationarity raises a convergence error with the best iterate") {
  auto ts = integers(0.0);
  // With x(0) = 1 the residual 3 (x^sigma)^2 + 2 x^{Delta^2} cannot vanish
  // on the whole collocation grid over a line basis.
  Problem p(ts, 1, 0.0, {1.0},
            Lagrangian::from_expression("u0^3 - u1^2", 1));
  try {
    tsvar::solve_candidate(p, tsvar::parse_basis({"t", "1"}));
    FAIL("expected convergence_error");
  } catch (const tsvar::convergence_error& e) {
    CHECK(e.best_iterate().size() == 2);
    CHECK(e.objective() > 0.0);
  }
}
