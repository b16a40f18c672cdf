#pragma once

#include "betarobust/model.hpp"
#include "betarobust/optimizer.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>

namespace betarobust {

/// Which estimating equation to solve. q = 1 makes every kind equal to MLE.
struct EstimatorKind {
  enum class Family { mle, smle, mdpde };

  Family family = Family::mle;
  double q = 1.0;

  static EstimatorKind mle() { return {Family::mle, 1.0}; }
  static EstimatorKind smle(double q);
  static EstimatorKind mdpde(double q);

  std::string name() const;
};

std::string_view to_string(EstimatorKind::Family family) noexcept;
EstimatorKind::Family parse_family(std::string_view name);

struct FitResult {
  EstimatorKind estimator;
  double q_used = 1.0;
  Theta theta_hat;
  Eigen::MatrixXd covariance;   // NaN-filled when the sandwich is undefined
  Eigen::VectorXd std_errors;
  Eigen::VectorXd weights;      // raw weights divided by their maximum
  Eigen::VectorXd raw_weights;  // f*(y)^(1-q) for SMLE, f(y)^(1-q) for MDPDE
  double objective_value = 0.0; // value of the loss minimized by the optimizer
  bool converged = false;
  int iterations = 0;

  Eigen::VectorXd estimates() const { return theta_hat.stacked(); }
  bool has_covariance() const { return covariance.size() > 0 && covariance.allFinite(); }
};

/// Sum of beta log densities at the link-level parameters.
double loglik(const ModelSpec& spec, const Theta& theta);

/// Reparameterized L_q likelihood: sum of L_q(f*(y_i)) where f* is the beta
/// density at the working parameters T_{1/q}(mu_i, phi_i).
double lq_objective(const ModelSpec& spec, const Theta& theta, double q);

/// Gradient of lq_objective: sum of U*(y_i) f*(y_i)^(1-q).
Eigen::VectorXd lq_gradient(const ModelSpec& spec, const Theta& theta, double q);

/// Empirical density power divergence,
///   sum_i [ int f_i^(2-q) - (1 + 1/(1-q)) f_i(y_i)^(1-q) ],
/// reducing to -loglik at q = 1.
double mdpde_objective(const ModelSpec& spec, const Theta& theta, double q);
Eigen::VectorXd mdpde_gradient(const ModelSpec& spec, const Theta& theta, double q);

/// Least-squares start for beta and a moment-based precision start for gamma.
Theta initial_theta(const ModelSpec& spec);

struct FitOptions {
  OptimizerOptions optimizer;
  bool compute_covariance = true;
  /// Pin one stacked coefficient at a value (null-constrained fits).
  std::optional<std::pair<Eigen::Index, double>> fixed;
};

/// Solve the estimating equation of `estimator`. Throws ConvergenceError
/// after max iterations and InfeasibleError when the surrogate likelihood is
/// undefined along the whole warm-start path.
FitResult fit(const ModelSpec& spec, const EstimatorKind& estimator,
              const std::optional<Theta>& init = std::nullopt, const FitOptions& options = {});

/// Loss minimized by `fit` together with its gradient, for a stacked
/// parameter vector. Infeasible points evaluate to +inf. Exposed for
/// benchmarks and tests.
double estimator_loss(const ModelSpec& spec, const EstimatorKind& estimator,
                      const Eigen::VectorXd& stacked, Eigen::VectorXd* gradient);

}  // namespace betarobust
