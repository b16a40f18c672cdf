#include "betarobust/optimizer.hpp"

#include "betarobust/error.hpp"

#include <cmath>

namespace betarobust {

namespace {

bool gradient_small(const Eigen::VectorXd& g, double f, const OptimizerOptions& o) {
  return g.lpNorm<Eigen::Infinity>() <= o.gradient_tol * (1.0 + std::abs(f));
}

}  // namespace

OptimizerResult minimize_bfgs(const Objective& objective, const Eigen::VectorXd& x0,
                              const Eigen::MatrixXd& inverse_hessian0,
                              const OptimizerOptions& options) {
  const Eigen::Index dim = x0.size();
  OptimizerResult res;
  res.x = x0;
  res.gradient.resize(dim);
  res.value = objective(res.x, res.gradient);
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    throw ConvergenceError("objective is not finite at the starting point", x0, 0);
  }
  if (dim == 0 || gradient_small(res.gradient, res.value, options)) {
    res.converged = true;
    return res;
  }

  Eigen::MatrixXd H = inverse_hessian0;
  bool fresh = true;  // H equals the seed matrix
  double decrement = HUGE_VAL;
  Eigen::VectorXd trial(dim), trial_grad(dim);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    res.iterations = iter;
    Eigen::VectorXd dir = -H * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0)) {
      H = inverse_hessian0;
      fresh = true;
      dir = -H * res.gradient;
      slope = res.gradient.dot(dir);
      if (!(slope < 0.0)) break;
    }
    decrement = -slope;
    if (decrement <= options.decrement_tol * (1.0 + std::abs(res.value))) {
      res.converged = true;
      return res;
    }

    double step = 1.0;
    double trial_value = 0.0;
    bool accepted = false;
    for (int k = 0; k < options.max_backtracks; ++k) {
      trial = res.x + step * dir;
      trial_value = objective(trial, trial_grad);
      if (std::isfinite(trial_value) && trial_grad.allFinite() &&
          trial_value <= res.value + options.armijo_slope * step * slope) {
        accepted = true;
        break;
      }
      step *= options.contraction;
    }
    if (!accepted) {
      if (!fresh) {
        H = inverse_hessian0;
        fresh = true;
        continue;
      }
      break;
    }

    const Eigen::VectorXd s = trial - res.x;
    const Eigen::VectorXd yv = trial_grad - res.gradient;
    res.x = trial;
    res.value = trial_value;
    res.gradient = trial_grad;

    if (gradient_small(res.gradient, res.value, options)) {
      res.converged = true;
      return res;
    }

    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const Eigen::VectorXd Hy = H * yv;
      const double yHy = yv.dot(Hy);
      H += ((sy + yHy) / (sy * sy)) * (s * s.transpose()) - (Hy * s.transpose() + s * Hy.transpose()) / sy;
      fresh = false;
    }
  }
  // Line search failures this close to the optimum come from rounding in f.
  res.converged = gradient_small(res.gradient, res.value, options) ||
                  decrement <= 1e4 * options.decrement_tol * (1.0 + std::abs(res.value));
  return res;
}

}  // namespace betarobust
