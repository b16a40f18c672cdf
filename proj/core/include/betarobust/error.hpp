#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace betarobust {

enum class ErrorCategory {
  domain,       // argument outside the mathematical domain of a function
  input,        // malformed user data or configuration
  infeasible,   // a q-transform or powered density is undefined for some rows
  convergence,  // optimizer did not reach its stopping rule
  numerical,    // singular or ill-conditioned linear algebra
};

const char* to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message) : Error(ErrorCategory::domain, message) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error(ErrorCategory::input, message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message)
      : Error(ErrorCategory::numerical, message) {}
};

/// Raised when the transformed or powered beta parameters leave the valid
/// region for some observations. `rows()` lists the offending (0-based) rows.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::vector<std::size_t> rows);

  const std::vector<std::size_t>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::size_t> rows_;
};

/// Optimizer failure. Carries the best parameter vector seen so callers can
/// inspect or warm-start from it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, Eigen::VectorXd best, int iterations)
      : Error(ErrorCategory::convergence, message), best_(std::move(best)), iterations_(iterations) {}

  const Eigen::VectorXd& best() const noexcept { return best_; }
  int iterations() const noexcept { return iterations_; }

 private:
  Eigen::VectorXd best_;
  int iterations_;
};

}  // namespace betarobust
