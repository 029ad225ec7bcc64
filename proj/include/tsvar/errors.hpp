// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsvar {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A time point is not a member of the scale (within tolerance).
class off_scale_error : public error {
public:
  using error::error;
};

/// The scale generator cannot produce the requested forward point.
class horizon_error : public error {
public:
  using error::error;
};

/// A documented precondition was violated (e.g. affine scale required).
class precondition_error : public error {
public:
  using error::error;
};

/// Expression source could not be parsed.
class parse_error : public error {
public:
  parse_error(const std::string& message, std::size_t offset)
      : error(message + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Expression evaluation hit a domain violation (ln of non-positive,
/// division by zero, fractional power of a negative base, unbound variable).
class eval_error : public error {
public:
  using error::error;
};

/// Basis functions are rank-deficient on the collocation grid.
class basis_error : public error {
public:
  using error::error;
};

/// The initial conditions cannot be satisfied by the given basis.
class infeasibility_error : public error {
public:
  using error::error;
};

/// Iterative solve did not converge; carries the best iterate found.
class convergence_error : public error {
public:
  convergence_error(const std::string& message, std::vector<double> best,
                    double objective)
      : error(message), best_iterate_(std::move(best)), objective_(objective) {}

  const std::vector<double>& best_iterate() const noexcept {
    return best_iterate_;
  }
  double objective() const noexcept { return objective_; }

private:
  std::vector<double> best_iterate_;
  double objective_;
};

/// Problem configuration is malformed (schema violation, unknown field, ...).
class config_error : public error {
public:
  using error::error;
};

}  // namespace tsvar
