#include "betarobust/diagnostics.hpp"

#include "betarobust/error.hpp"
#include "betarobust/numeric.hpp"
#include "betarobust/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

namespace betarobust {

ResidualSet residuals_swr2(const ModelSpec& spec, const Theta& theta) {
  const LinkLevel ll = predict_link_level(spec, theta);
  const Eigen::Index n = spec.n();
  Eigen::VectorXd centered(n), v(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ShapePair s = ShapePair::from_mean_precision(ll.mu[i], ll.phi[i]);
    const double y = spec.y[i];
    centered[i] = std::log(y) - std::log1p(-y) - (digamma(s.a) - digamma(s.b));
    v[i] = trigamma(s.a) + trigamma(s.b);
    const double gp = link_deriv(spec.mean_link, ll.mu[i]);
    w[i] = ll.phi[i] * v[i] / (gp * gp);
  }
  const Eigen::MatrixXd xtwx = spec.X.transpose() * w.asDiagonal() * spec.X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw NumericalError("X'WX is singular");
  }
  const Eigen::MatrixXd solved = ldlt.solve(spec.X.transpose());  // p1 x n
  ResidualSet out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = w[i] * spec.X.row(i).dot(solved.col(i));
    out.leverage[i] = h;
    out.residuals[i] = centered[i] / std::sqrt(v[i] * (1.0 - h));
  }
  return out;
}

double empirical_quantile(std::vector<double> sample, double prob) {
  if (sample.empty()) throw InputError("quantile of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double h = (static_cast<double>(sample.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sample.size() - 1);
  return sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
}

Envelope simulated_envelope(const ModelSpec& spec, const FitResult& fit_result, const EnvelopeOptions& options) {
  if (options.n_sims < 19) throw InputError("envelope needs at least 19 simulations");
  if (!(options.band > 0.0 && options.band < 1.0)) throw InputError("envelope band must lie in (0, 1)");
  const Eigen::Index n = spec.n();
  const LinkLevel ll = predict_link_level(spec, fit_result.theta_hat);
  const EstimatorKind est = fit_result.estimator;

  FitOptions refit_options;
  refit_options.compute_covariance = false;

  std::vector<std::optional<std::vector<double>>> sims(static_cast<std::size_t>(options.n_sims));
  parallel_for(sims.size(), options.threads, [&](std::size_t s) {
    Rng rng = substream(options.seed, s);
    ModelSpec sim = spec;
    for (Eigen::Index i = 0; i < n; ++i) sim.y[i] = sample_beta(ll.mu[i], ll.phi[i], rng);
    try {
      const FitResult refit = fit(sim, est, fit_result.theta_hat, refit_options);
      const ResidualSet r = residuals_swr2(sim, refit.theta_hat);
      if (!r.residuals.allFinite()) return;
      std::vector<double> sorted(r.residuals.data(), r.residuals.data() + n);
      std::sort(sorted.begin(), sorted.end());
      sims[s] = std::move(sorted);
    } catch (const Error&) {
    }
  });

  Envelope env;
  env.band = options.band;
  for (const auto& s : sims) {
    if (s) ++env.simulations_used;
  }
  env.failures = options.n_sims - env.simulations_used;
  if (env.failures * 5 > options.n_sims) {
    std::ostringstream os;
    os << "envelope: " << env.failures << " of " << options.n_sims << " refits failed";
    throw Error(ErrorCategory::convergence, os.str());
  }

  const ResidualSet observed = residuals_swr2(spec, fit_result.theta_hat);
  env.order.resize(static_cast<std::size_t>(n));
  std::iota(env.order.begin(), env.order.end(), Eigen::Index{0});
  std::stable_sort(env.order.begin(), env.order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return observed.residuals[a] < observed.residuals[b];
  });

  const double tail = (1.0 - options.band) / 2.0;
  env.theoretical.resize(n);
  env.observed.resize(n);
  env.lower.resize(n);
  env.median.resize(n);
  env.upper.resize(n);
  env.outside.assign(static_cast<std::size_t>(n), false);
  std::vector<double> column;
  column.reserve(sims.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    column.clear();
    for (const auto& s : sims) {
      if (s) column.push_back((*s)[static_cast<std::size_t>(k)]);
    }
    env.theoretical[k] = normal_quantile((static_cast<double>(k) + 1.0 - 0.375) / (static_cast<double>(n) + 0.25));
    env.observed[k] = observed.residuals[env.order[static_cast<std::size_t>(k)]];
    env.lower[k] = empirical_quantile(column, tail);
    env.median[k] = empirical_quantile(column, 0.5);
    env.upper[k] = empirical_quantile(column, 1.0 - tail);
    env.outside[static_cast<std::size_t>(k)] = env.observed[k] < env.lower[k] || env.observed[k] > env.upper[k];
  }
  return env;
}

Eigen::VectorXd weight_report(const FitResult& fit) {
  const Eigen::Index n = fit.weights.size();
  if (fit.q_used == 1.0 || n == 0) return Eigen::VectorXd::Ones(std::max<Eigen::Index>(n, fit.raw_weights.size()));
  return fit.weights;
}

DiagnosticsReport diagnose(const ModelSpec& spec, const FitResult& fit, const EnvelopeOptions& options) {
  DiagnosticsReport report;
  const ResidualSet r = residuals_swr2(spec, fit.theta_hat);
  report.residuals = r.residuals;
  report.leverage = r.leverage;
  report.weights = weight_report(fit);
  if (report.weights.size() != spec.n()) report.weights = Eigen::VectorXd::Ones(spec.n());
  report.envelope = simulated_envelope(spec, fit, options);
  for (std::size_t k = 0; k < report.envelope.outside.size(); ++k) {
    if (report.envelope.outside[k]) report.flagged.push_back(report.envelope.order[k]);
  }
  std::sort(report.flagged.begin(), report.flagged.end());
  return report;
}

void write_envelope_csv(std::ostream& out, const Envelope& env) {
  out << "theoretical_quantile,residual,lower,median,upper,flagged\n";
  out << std::setprecision(17);
  for (Eigen::Index k = 0; k < env.observed.size(); ++k) {
    out << env.theoretical[k] << ',' << env.observed[k] << ',' << env.lower[k] << ',' << env.median[k] << ','
        << env.upper[k] << ',' << (env.outside[static_cast<std::size_t>(k)] ? 1 : 0) << '\n';
  }
}

void write_observation_csv(std::ostream& out, const DiagnosticsReport& report) {
  std::vector<bool> flagged(static_cast<std::size_t>(report.residuals.size()), false);
  for (Eigen::Index i : report.flagged) flagged[static_cast<std::size_t>(i)] = true;
  out << "observation,residual,leverage,weight,flagged\n";
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < report.residuals.size(); ++i) {
    out << (i + 1) << ',' << report.residuals[i] << ',' << report.leverage[i] << ',' << report.weights[i] << ','
        << (flagged[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
  }
}

}  // namespace betarobust
