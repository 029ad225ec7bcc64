// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "tsvar/errors.hpp"
#include "tsvar/exprlang.hpp"
#include "tsvar/problem.hpp"
#include "tsvar/trajectory.hpp"
#include "tsvar/variational.hpp"

namespace tsvar {

/// Compiles expression strings over t into named basis functions.
inline std::vector<BasisFunction> parse_basis(
    const std::vector<std::string>& sources) {
  std::vector<BasisFunction> basis;
  basis.reserve(sources.size());
  for (const auto& src : sources) {
    Expr e = Expr::parse_time_function(src);
    basis.push_back(BasisFunction{src, [e](double t) { return e.evaluate(t); }});
  }
  return basis;
}

/// A trajectory ansatz x(t) = sum_j c_j phi_j(t) over a user-supplied basis.
struct BasisAnsatz {
  std::vector<BasisFunction> basis;
  std::vector<double> coefficients;

  Trajectory trajectory(std::shared_ptr<const TimeScale> scale,
                        std::string label = "ansatz") const {
    return Trajectory::from_basis(std::move(scale), basis, coefficients,
                                  std::move(label));
  }
};

struct SolverOptions {
  std::uint64_t seed = 20120415;
  /// Number of collocation points; 0 means max(3 * basis size, 20).
  int collocation_count = 0;
  int max_iterations = 60;
  /// Random restarts for the transversality pinning stage (besides w = 0).
  int stage2_starts = 6;
  /// Override for the transversality scan grid (empty: problem default).
  std::vector<double> t_grid;
};

struct SolveResult {
  BasisAnsatz ansatz;
  /// max |stationarity residual| over the collocation points.
  double el_residual_norm = 0.0;
  /// Transversality scans of the pinned ansatz, index k-1 for condition k.
  std::vector<TruncationScan> transversality;
  int family_dim = 0;
  std::vector<std::vector<double>> null_basis;
  double gram_condition = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> collocation_points;
  bool linear_stage1 = true;
  double stage2_objective = 0.0;
};

namespace detail {

constexpr double kNullSpaceRel = 1e-10;
// Affinity probe threshold. Exactly linear residual maps still show
// second differences at the rounding-noise floor of the nested quotients
// (well above 1e-10 of an all-cancelling residual), while genuinely
// quadratic maps produce defects at the scale of the residuals themselves.
constexpr double kLinearProbeTol = 1e-7;

struct Stage1System {
  Eigen::MatrixXd ic_matrix;   // r x n, exact initial-condition rows
  Eigen::VectorXd ic_rhs;      // alpha
  Eigen::MatrixXd el_matrix;   // m x n: E for the linear case, Jacobian else
  Eigen::VectorXd el_offset;   // residual at c = 0 (linear case)
  bool linear = true;
  std::vector<double> collocation_points;
  double gram_condition = 0.0;
  /// Measured cancellation noise of the residual pipeline (the linearity
  /// probe's second differences, which vanish exactly for affine maps).
  double noise_floor = 0.0;
};

inline Eigen::VectorXd el_residual_vector(const Problem& p,
                                          const std::vector<BasisFunction>& basis,
                                          const Eigen::VectorXd& c,
                                          const std::vector<double>& points) {
  std::vector<double> coeffs(c.data(), c.data() + c.size());
  Trajectory x = Trajectory::from_basis(p.scale_ptr(), basis, coeffs);
  Eigen::VectorXd residual(static_cast<Eigen::Index>(points.size()));
  for (std::size_t m = 0; m < points.size(); ++m)
    residual(static_cast<Eigen::Index>(m)) = el_residual(p, x, points[m]);
  return residual;
}

inline Stage1System assemble_stage1(const Problem& p,
                                    const std::vector<BasisFunction>& basis,
                                    const SolverOptions& options,
                                    std::mt19937_64& rng) {
  const int r = p.order();
  const int n = static_cast<int>(basis.size());
  if (n < r)
    throw basis_error("solver: basis smaller than the problem order");

  Stage1System sys;
  const int m = options.collocation_count > 0 ? options.collocation_count
                                              : std::max(3 * n, 20);
  sys.collocation_points = p.scale().grid(p.start(), static_cast<std::size_t>(m));

  // Basis values on the collocation grid; rank below r cannot carry the
  // initial conditions and flags dependent basis functions like {t, 2t}.
  Eigen::MatrixXd phi(m, n);
  for (int row = 0; row < m; ++row)
    for (int col = 0; col < n; ++col)
      phi(row, col) =
          basis[static_cast<std::size_t>(col)](sys.collocation_points[static_cast<std::size_t>(row)]);
  Eigen::JacobiSVD<Eigen::MatrixXd> phi_svd(phi);
  const auto& sv = phi_svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-12 * sv(0)) ++rank;
  sys.gram_condition = sv(sv.size() - 1) > 0
                           ? sv(0) / sv(sv.size() - 1)
                           : std::numeric_limits<double>::infinity();
  if (rank < r)
    throw basis_error(
        "solver: basis functions are rank-deficient on the collocation grid");

  sys.ic_matrix.resize(r, n);
  for (int i = 0; i < r; ++i)
    for (int col = 0; col < n; ++col)
      sys.ic_matrix(i, col) = delta_derivative(
          p.scale(), basis[static_cast<std::size_t>(col)].fn, p.start(), i);
  sys.ic_rhs = Eigen::Map<const Eigen::VectorXd>(p.initial_conditions().data(), r);

  // Probe affinity of the residual map in the coefficients: exact second
  // differences along random directions vanish for linear systems.
  auto residual_at = [&](const Eigen::VectorXd& c) {
    return el_residual_vector(p, basis, c, sys.collocation_points);
  };
  std::normal_distribution<double> gauss(0.0, 1.0);
  sys.linear = true;
  for (int probe = 0; probe < 3; ++probe) {
    Eigen::VectorXd c0(n), d(n);
    for (int j = 0; j < n; ++j) {
      c0(j) = gauss(rng);
      d(j) = gauss(rng);
    }
    const Eigen::VectorXd plus = residual_at(c0 + d);
    const Eigen::VectorXd minus = residual_at(c0 - d);
    const Eigen::VectorXd center = residual_at(c0);
    const double scale = std::max(
        {1.0, plus.cwiseAbs().maxCoeff(), minus.cwiseAbs().maxCoeff(),
         center.cwiseAbs().maxCoeff()});
    const double defect = (plus + minus - 2.0 * center).cwiseAbs().maxCoeff();
    if (defect > kLinearProbeTol * scale) sys.linear = false;
    sys.noise_floor = std::max(sys.noise_floor, defect);
  }
  if (!sys.linear) sys.noise_floor = 0.0;

  if (sys.linear) {
    sys.el_offset = residual_at(Eigen::VectorXd::Zero(n));
    sys.el_matrix.resize(m, n);
    for (int j = 0; j < n; ++j)
      sys.el_matrix.col(j) =
          residual_at(Eigen::VectorXd::Unit(n, j)) - sys.el_offset;
  }
  return sys;
}

/// Minimal-norm least-squares solve with singular values at or below
/// `cutoff` treated as zero.
inline Eigen::VectorXd truncated_solve(const Eigen::MatrixXd& a,
                                       const Eigen::VectorXd& b,
                                       double cutoff) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * b;
}

struct GaussNewtonResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Levenberg-damped Gauss-Newton with central-difference Jacobians.
inline GaussNewtonResult damped_gauss_newton(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    Eigen::VectorXd x, int max_iterations) {
  GaussNewtonResult result;
  Eigen::VectorXd rho = residual(x);
  double objective = rho.squaredNorm();
  double lambda = 1e-3;
  const Eigen::Index n = x.size();

  bool done = false;
  for (int iter = 0; iter < max_iterations && !done; ++iter) {
    result.iterations = iter + 1;
    Eigen::MatrixXd jac(rho.size(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(x(j)));
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
    }
    const Eigen::VectorXd gradient = jac.transpose() * rho;
    if (gradient.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + objective)) break;

    bool stepped = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::MatrixXd normal = jac.transpose() * jac;
      normal.diagonal().array() += lambda * (normal.diagonal().array() + 1e-12);
      const Eigen::VectorXd step = normal.ldlt().solve(-gradient);
      const Eigen::VectorXd candidate = x + step;
      const Eigen::VectorXd rho_new = residual(candidate);
      const double objective_new = rho_new.squaredNorm();
      if (objective_new < objective) {
        if (step.cwiseAbs().maxCoeff() <=
            1e-14 * (1.0 + x.cwiseAbs().maxCoeff()))
          done = true;
        x = candidate;
        rho = rho_new;
        objective = objective_new;
        lambda = std::max(lambda / 3.0, 1e-14);
        stepped = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e14) break;
    }
    if (!stepped || objective <= 1e-28) done = true;
  }
  result.x = std::move(x);
  result.objective = objective;
  result.converged = true;
  return result;
}

}  // namespace detail

struct FamilyAnalysis {
  int family_dim = 0;
  /// Orthonormal coefficient directions spanning the joint null space of the
  /// initial-condition and stationarity rows.
  std::vector<std::vector<double>> null_basis;
};

inline FamilyAnalysis family_analysis(const Eigen::MatrixXd& ic_matrix,
                                      const Eigen::MatrixXd& el_matrix,
                                      double noise_floor = 0.0);

/// Assembles the stage-1 system for a basis and reports the dimension and an
/// orthonormal basis of the coefficient null space of the combined
/// stationarity + initial-condition linear system (the Jacobian at the
/// initial-condition solution when the residual is not affine).
inline FamilyAnalysis family_analysis(const Problem& p,
                                      const std::vector<BasisFunction>& basis,
                                      const SolverOptions& options = {}) {
  std::mt19937_64 rng(options.seed);
  auto sys = detail::assemble_stage1(p, basis, options, rng);
  Eigen::MatrixXd el_block;
  if (sys.linear) {
    el_block = sys.el_matrix;
  } else {
    const int n = static_cast<int>(basis.size());
    Eigen::JacobiSVD<Eigen::MatrixXd> ic_svd(
        sys.ic_matrix, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const auto& sv = ic_svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > detail::kNullSpaceRel * sv(0)) inv(i) = 1.0 / sv(i);
    const Eigen::VectorXd c0 = ic_svd.matrixV().leftCols(sv.size()) *
                               inv.asDiagonal() * ic_svd.matrixU().transpose() *
                               sys.ic_rhs;
    el_block.resize(static_cast<Eigen::Index>(sys.collocation_points.size()), n);
    for (int j = 0; j < n; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(c0(j)));
      Eigen::VectorXd cp = c0, cm = c0;
      cp(j) += h;
      cm(j) -= h;
      el_block.col(j) =
          (detail::el_residual_vector(p, basis, cp, sys.collocation_points) -
           detail::el_residual_vector(p, basis, cm, sys.collocation_points)) /
          (2.0 * h);
    }
  }
  return family_analysis(sys.ic_matrix, el_block, sys.noise_floor);
}

/// Null-space analysis of the combined stationarity + initial-condition
/// linear system: singular values below 1e-10 * sigma_max count as null.
/// noise_floor, when provided, lifts the cutoff to the measured cancellation
/// noise of the residual pipeline (the quotients of Delta^{2r} amplify value
/// rounding by 1/mu^{2r}, which on sub-unit-step scales exceeds a purely
/// relative threshold).
inline FamilyAnalysis family_analysis(const Eigen::MatrixXd& ic_matrix,
                                      const Eigen::MatrixXd& el_matrix,
                                      double noise_floor) {
  const Eigen::Index n = ic_matrix.cols();
  Eigen::MatrixXd combined(ic_matrix.rows() + el_matrix.rows(), n);
  combined.topRows(ic_matrix.rows()) = ic_matrix;
  combined.bottomRows(el_matrix.rows()) = el_matrix;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(combined, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  const double cutoff =
      std::max(detail::kNullSpaceRel * sigma_max,
               4.0 * noise_floor * std::sqrt(static_cast<double>(combined.rows())));

  FamilyAnalysis analysis;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sigma = i < sv.size() ? sv(i) : 0.0;
    if (sigma <= cutoff) {
      std::vector<double> direction(static_cast<std::size_t>(n));
      for (Eigen::Index row = 0; row < n; ++row)
        direction[static_cast<std::size_t>(row)] = svd.matrixV()(row, i);
      analysis.null_basis.push_back(std::move(direction));
    }
  }
  analysis.family_dim = static_cast<int>(analysis.null_basis.size());
  return analysis;
}

/// Produces a candidate extremal over the basis: stage 1 solves the
/// collocated stationarity system subject to exact initial conditions
/// (a direct elimination when the residual is affine in the coefficients,
/// damped Gauss-Newton otherwise); stage 2 pins any remaining null-space
/// freedom by minimizing weighted squared transversality values over the
/// sampled horizon. Deterministic for a fixed options.seed.
inline SolveResult solve_candidate(const Problem& p,
                                   const std::vector<BasisFunction>& basis,
                                   const SolverOptions& options = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int r = p.order();
  const int n = static_cast<int>(basis.size());
  std::mt19937_64 rng(options.seed);

  auto sys = detail::assemble_stage1(p, basis, options, rng);

  // Exact initial conditions: parametrize c = c_p + N z over the IC null
  // space; infeasible conditions surface before any stationarity work.
  Eigen::JacobiSVD<MatrixXd> ic_svd(
      sys.ic_matrix, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& ic_sv = ic_svd.singularValues();
  const double ic_sigma_max = ic_sv.size() > 0 ? ic_sv(0) : 0.0;
  int ic_rank = 0;
  for (Eigen::Index i = 0; i < ic_sv.size(); ++i)
    if (ic_sv(i) > detail::kNullSpaceRel * ic_sigma_max) ++ic_rank;

  VectorXd inv = VectorXd::Zero(ic_sv.size());
  for (Eigen::Index i = 0; i < ic_rank; ++i) inv(i) = 1.0 / ic_sv(i);
  const VectorXd c_particular = ic_svd.matrixV().leftCols(ic_sv.size()) *
                                inv.asDiagonal() *
                                ic_svd.matrixU().transpose() * sys.ic_rhs;
  const double ic_defect =
      (sys.ic_matrix * c_particular - sys.ic_rhs).cwiseAbs().maxCoeff();
  if (ic_defect > 1e-9 * (1.0 + sys.ic_rhs.cwiseAbs().maxCoeff()))
    throw infeasibility_error(
        "solver: initial conditions are not attainable over this basis");
  const MatrixXd null_ic = ic_svd.matrixV().rightCols(n - ic_rank);

  auto residual_at = [&](const VectorXd& c) {
    return detail::el_residual_vector(p, basis, c, sys.collocation_points);
  };

  VectorXd c_stage1 = c_particular;
  if (null_ic.cols() > 0) {
    if (sys.linear) {
      // sigma_ref couples the truncation to the scale of the combined
      // system, so an all-noise stationarity block collapses to z = 0.
      MatrixXd combined(sys.ic_matrix.rows() + sys.el_matrix.rows(), n);
      combined.topRows(sys.ic_matrix.rows()) = sys.ic_matrix;
      combined.bottomRows(sys.el_matrix.rows()) = sys.el_matrix;
      Eigen::JacobiSVD<MatrixXd> combined_svd(combined);
      const double cutoff = std::max(
          detail::kNullSpaceRel * combined_svd.singularValues()(0),
          4.0 * sys.noise_floor * std::sqrt(static_cast<double>(combined.rows())));
      const VectorXd rhs = -(sys.el_offset + sys.el_matrix * c_particular);
      const VectorXd z =
          detail::truncated_solve(sys.el_matrix * null_ic, rhs, cutoff);
      c_stage1 = c_particular + null_ic * z;
    } else {
      auto stage1_residual = [&](const VectorXd& z) {
        return residual_at(c_particular + null_ic * z);
      };
      auto gn = detail::damped_gauss_newton(
          stage1_residual, VectorXd::Zero(null_ic.cols()),
          options.max_iterations);
      c_stage1 = c_particular + null_ic * gn.x;
      const VectorXd rho = residual_at(c_stage1);

      // Convergence is judged against the Lagrangian's magnitude on the
      // collocation grid at the returned iterate.
      std::vector<double> coeffs(c_stage1.data(), c_stage1.data() + n);
      Trajectory x = Trajectory::from_basis(p.scale_ptr(), basis, coeffs);
      double lagrangian_scale = 0.0;
      for (double t : sys.collocation_points) {
        const auto tuple = mixed_eval(x, t, r);
        lagrangian_scale = std::max(
            lagrangian_scale, std::abs(p.lagrangian().value_on(tuple)));
      }
      if (rho.cwiseAbs().maxCoeff() > 1e-8 * (1.0 + lagrangian_scale))
        throw convergence_error(
            "solver: stage-1 iteration did not reach a stationary ansatz",
            std::vector<double>(c_stage1.data(), c_stage1.data() + n),
            gn.objective);
    }
  }

  // Family analysis on the combined system; for the nonlinear path the
  // stationarity block is the Jacobian at the stage-1 solution.
  MatrixXd el_block;
  if (sys.linear) {
    el_block = sys.el_matrix;
  } else {
    el_block.resize(static_cast<Eigen::Index>(sys.collocation_points.size()), n);
    const VectorXd base = residual_at(c_stage1);
    for (int j = 0; j < n; ++j) {
      const double h = 1e-6 * (1.0 + std::abs(c_stage1(j)));
      VectorXd cp = c_stage1, cm = c_stage1;
      cp(j) += h;
      cm(j) -= h;
      el_block.col(j) = (residual_at(cp) - residual_at(cm)) / (2.0 * h);
    }
  }
  const FamilyAnalysis family =
      family_analysis(sys.ic_matrix, el_block, sys.noise_floor);

  SolveResult result;
  result.seed = options.seed;
  result.family_dim = family.family_dim;
  result.null_basis = family.null_basis;
  result.gram_condition = sys.gram_condition;
  result.collocation_points = sys.collocation_points;
  result.linear_stage1 = sys.linear;

  VectorXd c_final = c_stage1;
  if (family.family_dim > 0) {
    // Stage 2: pin the residual-null freedom with transversality values,
    // weighted by 1/(1 + |T'|^{2r}) so polynomially divergent branches stay
    // finite yet dominate the zero branch.
    MatrixXd null_dirs(n, family.family_dim);
    for (int j = 0; j < family.family_dim; ++j)
      for (int row = 0; row < n; ++row)
        null_dirs(row, j) = family.null_basis[static_cast<std::size_t>(j)]
                                             [static_cast<std::size_t>(row)];

    std::vector<std::int64_t> tail_indices;
    for (std::int64_t j = 1; j <= p.horizon().t_max_index; ++j)
      tail_indices.push_back(p.start_index() + j);
    std::vector<double> weights(tail_indices.size());
    for (std::size_t i = 0; i < tail_indices.size(); ++i) {
      const double tp = p.scale().point(tail_indices[i]);
      weights[i] = 1.0 / (1.0 + std::pow(std::abs(tp), 2.0 * r));
    }

    auto pinning_residual = [&](const VectorXd& w) {
      const VectorXd c = c_stage1 + null_dirs * w;
      std::vector<double> coeffs(c.data(), c.data() + n);
      Trajectory x = Trajectory::from_basis(p.scale_ptr(), basis, coeffs);
      VectorXd rho(static_cast<Eigen::Index>(r * tail_indices.size()));
      Eigen::Index row = 0;
      for (int k = 1; k <= r; ++k)
        for (std::size_t i = 0; i < tail_indices.size(); ++i)
          rho(row++) = std::sqrt(weights[i]) *
                       transversality_value(
                           p, x, k, p.scale().point(tail_indices[i]));
      return rho;
    };

    std::normal_distribution<double> gauss(0.0, 1.0);
    detail::GaussNewtonResult best;
    best.objective = std::numeric_limits<double>::infinity();
    for (int start = 0; start <= options.stage2_starts; ++start) {
      VectorXd w0 = VectorXd::Zero(family.family_dim);
      if (start > 0)
        for (int j = 0; j < family.family_dim; ++j) w0(j) = gauss(rng);
      auto gn = detail::damped_gauss_newton(pinning_residual, w0,
                                            options.max_iterations);
      if (gn.objective < best.objective) best = gn;
    }
    result.stage2_objective = best.objective;
    c_final = c_stage1 + null_dirs * best.x;
  }

  result.ansatz.basis = basis;
  result.ansatz.coefficients.assign(c_final.data(), c_final.data() + n);
  result.el_residual_norm = residual_at(c_final).cwiseAbs().maxCoeff();

  Trajectory pinned = result.ansatz.trajectory(p.scale_ptr());
  const std::vector<double> grid =
      options.t_grid.empty() ? p.default_t_grid() : options.t_grid;
  for (int k = 1; k <= r; ++k)
    result.transversality.push_back(transversality_scan(p, pinned, k, grid));
  return result;
}

}  // namespace tsvar
