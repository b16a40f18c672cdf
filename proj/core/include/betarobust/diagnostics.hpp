#pragma once

#include "betarobust/estimation.hpp"
#include "betarobust/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace betarobust {

/// Residuals with their leverages.
struct ResidualSet {
  Eigen::VectorXd residuals;
  Eigen::VectorXd leverage;  // diagonal of W^1/2 X (X'WX)^-1 X' W^1/2
};

/// Standardized weighted residual 2,
///   r_i = (y*_i - mu*_i) / sqrt(v_i (1 - h_ii)),
/// with mu*, v and the weights w_i = phi_i v_i / g'(mu_i)^2 at the fitted
/// link-level parameters.
ResidualSet residuals_swr2(const ModelSpec& spec, const Theta& theta);

/// Pointwise simulated bands for the sorted residuals.
struct Envelope {
  Eigen::VectorXd theoretical;  // normal scores (i - 3/8) / (n + 1/4)
  Eigen::VectorXd observed;     // sorted residuals of the data
  std::vector<Eigen::Index> order;  // observation index for each sorted position
  Eigen::VectorXd lower, median, upper;
  std::vector<bool> outside;    // per sorted position
  int simulations_used = 0;
  int failures = 0;
  double band = 0.95;
};

struct EnvelopeOptions {
  int n_sims = 100;
  double band = 0.95;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Simulates responses from the fitted link-level parameters, refits with the
/// same estimator and q and collects sorted residuals. Failed refits are
/// skipped; more than 20% failures raise an error.
Envelope simulated_envelope(const ModelSpec& spec, const FitResult& fit, const EnvelopeOptions& options = {});

/// Normalized robust weights in (0, 1]; all ones for q = 1.
Eigen::VectorXd weight_report(const FitResult& fit);

struct DiagnosticsReport {
  Eigen::VectorXd residuals;
  Eigen::VectorXd leverage;
  Eigen::VectorXd weights;
  Envelope envelope;
  std::vector<Eigen::Index> flagged;  // observations outside the envelope, ascending
};

DiagnosticsReport diagnose(const ModelSpec& spec, const FitResult& fit, const EnvelopeOptions& options = {});

/// Columns theoretical_quantile,residual,lower,median,upper,flagged; one row per sorted position.
void write_envelope_csv(std::ostream& out, const Envelope& envelope);

/// Columns observation,residual,leverage,weight,flagged; observations are 1-based.
void write_observation_csv(std::ostream& out, const DiagnosticsReport& report);

/// Type-7 sample quantile of an unsorted sample.
double empirical_quantile(std::vector<double> sample, double prob);

}  // namespace betarobust
