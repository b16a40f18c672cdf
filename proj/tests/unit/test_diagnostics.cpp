#include "betarobust/diagnostics.hpp"
#include "betarobust/error.hpp"
#include "betarobust/numeric.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

using namespace betarobust;

namespace {

std::vector<Eigen::Index> top_two(const Eigen::VectorXd& v) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::partial_sort(idx.begin(), idx.begin() + 2, idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  std::vector<Eigen::Index> out{idx[0], idx[1]};
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Residuals, LeverageTraceEqualsMeanColumns) {
  const ModelSpec spec = oracle::ais();
  for (EstimatorKind est : {EstimatorKind::mle(), EstimatorKind::smle(0.82)}) {
    const ResidualSet r = residuals_swr2(spec, fit(spec, est).theta_hat);
    EXPECT_NEAR(r.leverage.sum(), 2.0, 1e-8);
    EXPECT_GE(r.leverage.minCoeff(), 0.0);
    EXPECT_LT(r.leverage.maxCoeff(), 1.0);
  }
}

TEST(Residuals, ZeroWhenResponseMatchesExpectation) {
  ModelSpec spec = oracle::ais();
  const Theta theta{Eigen::Vector2d(0.1, -0.027), Eigen::VectorXd::Constant(1, 4.57)};
  const LinkLevel ll = predict_link_level(spec, theta);
  const double target = digamma(ll.mu[4] * ll.phi[4]) - digamma((1 - ll.mu[4]) * ll.phi[4]);
  spec.y[4] = 1.0 / (1.0 + std::exp(-target));
  EXPECT_NEAR(residuals_swr2(spec, theta).residuals[4], 0.0, 1e-12);
}

TEST(Residuals, PermutationEquivariant) {
  const ModelSpec spec = oracle::ais();
  const Theta theta{Eigen::Vector2d(0.1, -0.027), Eigen::VectorXd::Constant(1, 4.57)};
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(spec.n());
  perm.setIdentity();
  std::mt19937 gen(8);
  std::shuffle(perm.indices().data(), perm.indices().data() + spec.n(), gen);
  ModelSpec moved = spec;
  moved.y = perm * spec.y;
  moved.X = perm * spec.X;
  moved.Z = perm * spec.Z;
  const Eigen::VectorXd a = perm * residuals_swr2(spec, theta).residuals;
  const Eigen::VectorXd b = residuals_swr2(moved, theta).residuals;
  EXPECT_LT((a - b).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Residuals, AisRobustFitHighlightsSixteenAndThirty) {
  const ModelSpec spec = oracle::ais();
  const FitResult r = fit(spec, EstimatorKind::smle(0.82));
  const ResidualSet res = residuals_swr2(spec, r.theta_hat);
  EXPECT_EQ(top_two(res.residuals.cwiseAbs()), (std::vector<Eigen::Index>{15, 29}));
  EXPECT_EQ(top_two(-weight_report(r)), (std::vector<Eigen::Index>{15, 29}));
}

TEST(Weights, AllOneAtQOne) {
  const FitResult r = fit(oracle::ais(), EstimatorKind::mle());
  EXPECT_TRUE((weight_report(r).array() == 1.0).all());
}

TEST(Weights, NegativelyRankCorrelatedWithResiduals) {
  const ModelSpec spec = oracle::ais();
  const FitResult r = fit(spec, EstimatorKind::smle(0.82));
  const Eigen::VectorXd res = residuals_swr2(spec, r.theta_hat).residuals.cwiseAbs();
  const Eigen::VectorXd w = weight_report(r);
  auto ranks = [](const Eigen::VectorXd& v) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    Eigen::VectorXd rk(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) rk[idx[k]] = static_cast<double>(k);
    return rk;
  };
  const Eigen::VectorXd a = ranks(res).array() - ranks(res).mean();
  const Eigen::VectorXd b = ranks(w).array() - ranks(w).mean();
  EXPECT_LT(a.dot(b) / (a.norm() * b.norm()), -0.5);
}

TEST(Quantile, TypeSeven) {
  EXPECT_DOUBLE_EQ(empirical_quantile({3.0, 1.0, 2.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({7.0}, 0.9), 7.0);
  EXPECT_THROW(empirical_quantile({}, 0.5), InputError);
}

TEST(Envelope, DeterministicAndOrdered) {
  const ModelSpec spec = oracle::ais();
  const FitResult r = fit(spec, EstimatorKind::mle());
  EnvelopeOptions o;
  o.seed = 21;
  const Envelope a = simulated_envelope(spec, r, o);
  o.threads = 2;
  const Envelope b = simulated_envelope(spec, r, o);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_EQ(a.simulations_used, 100);
  for (Eigen::Index k = 0; k < spec.n(); ++k) {
    EXPECT_LE(a.lower[k], a.median[k]);
    EXPECT_LE(a.median[k], a.upper[k]);
    if (k > 0) EXPECT_LE(a.observed[k - 1], a.observed[k]);
  }
  EXPECT_NEAR(a.theoretical.sum(), 0.0, 1e-12);
}

TEST(Envelope, WidensWithBand) {
  const ModelSpec spec = oracle::ais();
  const FitResult r = fit(spec, EstimatorKind::mle());
  EnvelopeOptions o;
  o.seed = 5;
  o.band = 0.8;
  const Envelope narrow = simulated_envelope(spec, r, o);
  o.band = 0.95;
  const Envelope wide = simulated_envelope(spec, r, o);
  EXPECT_TRUE((wide.lower.array() <= narrow.lower.array()).all());
  EXPECT_TRUE((wide.upper.array() >= narrow.upper.array()).all());
}

TEST(Envelope, OutliersFarOutsideRobustEnvelope) {
  const ModelSpec spec = oracle::ais();
  EnvelopeOptions o;
  o.seed = 9;
  auto excess = [&](const FitResult& r) {
    const Envelope e = simulated_envelope(spec, r, o);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < spec.n(); ++k) worst = std::max(worst, e.lower[k] - e.observed[k]);
    return worst;
  };
  const double mle_gap = excess(fit(spec, EstimatorKind::mle()));
  const double smle_gap = excess(fit(spec, EstimatorKind::smle(0.82)));
  EXPECT_GT(smle_gap, 3.0 * mle_gap);
}

TEST(Envelope, RejectsTooFewSimulations) {
  const ModelSpec spec = oracle::ais();
  EnvelopeOptions o;
  o.n_sims = 10;
  EXPECT_THROW(simulated_envelope(spec, fit(spec, EstimatorKind::mle()), o), InputError);
}

TEST(Report, CsvColumns) {
  const ModelSpec spec = oracle::ais();
  EnvelopeOptions o;
  o.n_sims = 19;
  const DiagnosticsReport rep = diagnose(spec, fit(spec, EstimatorKind::smle(0.82)), o);
  std::ostringstream env, obs;
  write_envelope_csv(env, rep.envelope);
  write_observation_csv(obs, rep);
  const std::string env_text = env.str(), obs_text = obs.str();
  EXPECT_EQ(env_text.substr(0, env_text.find('\n')), "theoretical_quantile,residual,lower,median,upper,flagged");
  EXPECT_EQ(obs_text.substr(0, obs_text.find('\n')), "observation,residual,leverage,weight,flagged");
  EXPECT_EQ(std::count(env_text.begin(), env_text.end(), '\n'), spec.n() + 1);
  EXPECT_TRUE(std::find(rep.flagged.begin(), rep.flagged.end(), 15) != rep.flagged.end());
  EXPECT_TRUE(std::find(rep.flagged.begin(), rep.flagged.end(), 29) != rep.flagged.end());
}
