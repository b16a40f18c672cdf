#pragma once

#include "betarobust/estimation.hpp"
#include "betarobust/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>

namespace betarobust {

/// Diagonal elements of the matrices entering J_q and K_q. Symbols follow
/// the closed-form derivation with (mu_i, phi_i) read as the working
/// parameters of f*, (mu_{i,q}, phi_{i,q}) as the link-level parameters and
/// the "2-q" quantities at T_{2-q}(working).
struct AppendixDiagonals {
  Eigen::VectorXd b1, b2;
  Eigen::VectorXd t_mu, t_phi;
  Eigen::VectorXd phi_q;
  Eigen::VectorXd v, v_2q;
  Eigen::VectorXd c_star, c_star_2q;
  Eigen::VectorXd d_star, d_star_2q;
  Eigen::VectorXd m1, m2, m3;
};

AppendixDiagonals appendix_diagonals(const ModelSpec& spec, const Theta& theta, double q);

/// M-estimator sandwich: J (expected derivative of the estimating function),
/// K (its second moment) and V = J^-1 K J^-T.
struct SandwichParts {
  Eigen::MatrixXd J;
  Eigen::MatrixXd K;
  Eigen::MatrixXd V;
};

SandwichParts sandwich(const ModelSpec& spec, const Theta& theta, double q);

/// Sandwich for the density power divergence estimating equation with
/// tuning constant q (exponent 1 - q).
SandwichParts mdpde_sandwich(const ModelSpec& spec, const Theta& theta, double q);

/// Expected Fisher information K_1.
Eigen::MatrixXd fisher_information(const ModelSpec& spec, const Theta& theta);

/// Asymptotic covariance for the given estimator at theta.
Eigen::MatrixXd covariance_matrix(const ModelSpec& spec, const Theta& theta, const EstimatorKind& estimator);

/// Per-observation score U(y) of the beta log-likelihood.
Eigen::VectorXd mle_score(double y, const Eigen::VectorXd& x_row, const Eigen::VectorXd& z_row,
                          const Theta& theta, LinkKind mean_link = LinkKind::logit,
                          LinkKind precision_link = LinkKind::log);

/// Per-observation weighted modified score U*(y) f*(y)^(1-q).
Eigen::VectorXd smle_weighted_score(double y, const Eigen::VectorXd& x_row, const Eigen::VectorXd& z_row,
                                    const Theta& theta, double q, LinkKind mean_link = LinkKind::logit,
                                    LinkKind precision_link = LinkKind::log);

/// SMLE weight f*(y)^(1-q) at link-level (mu, phi).
double smle_weight(double y, double mu, double phi, double q);

struct WaldResult {
  double z;
  double statistic;
  double p_asymptotic;
};

WaldResult wald_test(const FitResult& fit, Eigen::Index index, double null_value = 0.0);

struct BootstrapResult {
  double p_value;
  double statistic_observed;
  int replicates_used;
  int failures;
};

/// Parametric bootstrap p-value of the Wald-type statistic. Responses are
/// simulated from the null-constrained fit (tested coefficient pinned at
/// `null_value`); each replicate is refitted with the same estimator and q.
BootstrapResult bootstrap_pvalue(const ModelSpec& spec, const EstimatorKind& estimator, Eigen::Index index,
                                 int replicates, std::uint64_t seed, double null_value = 0.0,
                                 unsigned threads = 1);

struct InfluenceCurves {
  Eigen::VectorXd y;
  Eigen::MatrixXd mle;   // |grid| x p, K_1^-1 U(y)
  Eigen::MatrixXd smle;  // |grid| x p, -J_q^-1 U*(y) f*(y)^(1-q)
};

/// Influence functions of the MLE and SMLE for a single covariate pattern,
/// using per-observation information matrices of that pattern (i.i.d. case).
InfluenceCurves influence_curve(const Theta& theta, double q, const Eigen::VectorXd& x_row,
                                const Eigen::VectorXd& z_row, std::span<const double> y_grid,
                                LinkKind mean_link = LinkKind::logit, LinkKind precision_link = LinkKind::log);

/// Same, with J_q and K_1 averaged over the rows of `design`.
InfluenceCurves influence_curve(const ModelSpec& design, const Theta& theta, double q,
                                const Eigen::VectorXd& x_row, const Eigen::VectorXd& z_row,
                                std::span<const double> y_grid);

}  // namespace betarobust
