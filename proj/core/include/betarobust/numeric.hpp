#pragma once

// Special functions and beta-law primitives shared by every estimator.

#include <cstdint>
#include <random>

namespace betarobust {

/// Shape parameters of a beta law, a = mu * phi and b = (1 - mu) * phi.
struct ShapePair {
  double a;
  double b;

  static ShapePair from_mean_precision(double mu, double phi) noexcept {
    return {mu * phi, (1.0 - mu) * phi};
  }
};

/// Random stream used throughout the library. Reproducible per seed on a
/// given standard library; not guaranteed identical across toolchains.
using Rng = std::mt19937_64;

/// Independent stream for (seed, index) pairs. Used to make parallel
/// replications independent of scheduling order.
Rng substream(std::uint64_t seed, std::uint64_t index);

double digamma(double x);
double trigamma(double x);
double log_gamma(double x);

double log_beta_fn(ShapePair s);

/// log f(y; mu, phi) for the mean/precision parameterized beta density.
double beta_logpdf(double y, double mu, double phi);

/// log of the integral of f(y; mu, phi)^c over (0, 1). The powered density is
/// proportional to Beta(c(a-1)+1, c(b-1)+1); throws InfeasibleError when one
/// of those shapes is nonpositive.
double powered_density_log_integral(double mu, double phi, double c);

/// Shapes of the density proportional to f(y; mu, phi)^c.
ShapePair powered_shapes(double mu, double phi, double c) noexcept;

/// Draw from Beta(mu * phi, (1 - mu) * phi) via a ratio of gamma variates.
double sample_beta(double mu, double phi, Rng& rng);

/// Moments of the sufficient statistics y* = log(y / (1 - y)) and
/// y† = log(1 - y) under Beta(a, b).
struct LogitMoments {
  double mean_star;     // psi(a) - psi(b)
  double mean_dagger;   // psi(b) - psi(a + b)
  double var_star;      // psi'(a) + psi'(b)
  double var_dagger;    // psi'(b) - psi'(a + b)
  double cov;           // -psi'(b)
};

LogitMoments logit_moments(ShapePair s);

/// Standard normal helpers.
double normal_cdf(double x);
double normal_quantile(double p);

/// Upper tail of the chi-square law with one degree of freedom.
double chi2_1_upper_tail(double statistic);

}  // namespace betarobust
