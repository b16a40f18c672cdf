#pragma once

#include <Eigen/Core>

#include <functional>

namespace betarobust {

/// Objective for minimization. Writes the gradient into `grad` and returns the
/// value; returning +inf (or any non-finite value) rejects the point.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct OptimizerOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-6;       // sup-norm of gradient <= tol * (1 + |f|)
  double decrement_tol = 1e-14;     // g' H g <= tol * (1 + |f|), H the inverse Hessian estimate
  double armijo_slope = 1e-4;
  double contraction = 0.5;
  int max_backtracks = 60;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
};

/// BFGS descent with Armijo backtracking. `inverse_hessian0` seeds the
/// inverse Hessian approximation and is reused whenever the update loses
/// descent. Throws ConvergenceError when the starting point is rejected.
OptimizerResult minimize_bfgs(const Objective& objective, const Eigen::VectorXd& x0,
                              const Eigen::MatrixXd& inverse_hessian0,
                              const OptimizerOptions& options = {});

}  // namespace betarobust
