#include "betarobust/error.hpp"
#include "betarobust/estimation.hpp"
#include "betarobust/inference.hpp"
#include "betarobust/numeric.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace betarobust;

namespace {

const Eigen::VectorXd kOne = Eigen::VectorXd::Ones(1);

// Per-observation weighted modified score for the intercept-only model.
Eigen::VectorXd psi_smle(double y, const Eigen::VectorXd& stacked, double q) {
  return smle_weighted_score(y, kOne, kOne, Theta::split(stacked, 1), q);
}

// Per-observation density power divergence estimating function U f^a - int U f^(1+a).
Eigen::VectorXd psi_mdpde(double y, const Eigen::VectorXd& stacked, double q) {
  const double a = 1.0 - q;
  const double mu = 1.0 / (1.0 + std::exp(-stacked[0]));
  const double phi = std::exp(stacked[1]);
  const double sa = mu * phi, sb = (1 - mu) * phi;
  auto score = [&](double t) {
    const double ys = std::log(t / (1 - t)), yd = std::log1p(-t);
    const double ms = digamma(sa) - digamma(sb), md = digamma(sb) - digamma(phi);
    return Eigen::Vector2d(phi * (ys - ms) * mu * (1 - mu), (mu * (ys - ms) + yd - md) * phi);
  };
  Eigen::Vector2d bias;
  for (int k = 0; k < 2; ++k) {
    bias[k] = oracle::integrate01([&](double t) { return score(t)[k] * std::pow(oracle::beta_pdf(t, sa, sb), 1 + a); });
  }
  return score(y) * std::pow(oracle::beta_pdf(y, sa, sb), a) - bias;
}

struct Fig2 {
  double mu = 0.5;
  double phi = 90.0;
  double q = 0.9;
  double a() const { return mu * phi; }
  double b() const { return (1 - mu) * phi; }
};

}  // namespace

TEST(AppendixDiagonals, CollapseAtOne) {
  const ModelSpec spec = oracle::ais();
  const Theta theta{Eigen::Vector2d(0.1, -0.027), Eigen::VectorXd::Constant(1, 4.57)};
  const AppendixDiagonals d = appendix_diagonals(spec, theta, 1.0);
  const LinkLevel ll = predict_link_level(spec, theta);
  for (Eigen::Index i = 0; i < spec.n(); ++i) {
    EXPECT_NEAR(d.b1[i], 1.0, 1e-12);
    EXPECT_NEAR(d.b2[i], 1.0, 1e-12);
    EXPECT_EQ(d.m1[i], 0.0);
    EXPECT_EQ(d.m2[i], 0.0);
    EXPECT_EQ(d.m3[i], 0.0);
    EXPECT_EQ(d.v_2q[i], d.v[i]);
    EXPECT_EQ(d.c_star_2q[i], d.c_star[i]);
    EXPECT_EQ(d.d_star_2q[i], d.d_star[i]);
    const double mu = ll.mu[i], phi = ll.phi[i];
    const double c = phi * (mu * trigamma(mu * phi) - (1 - mu) * trigamma((1 - mu) * phi));
    EXPECT_NEAR(d.c_star[i], c, 1e-12 * std::abs(c));
  }
}

TEST(AppendixDiagonals, MatchDefiningExpectations) {
  const Fig2 c;
  const ModelSpec spec = oracle::intercept_only();
  const AppendixDiagonals d = appendix_diagonals(spec, oracle::intercept_theta(c.mu, c.phi), c.q);
  const ParamTriple t = param_triple(c.mu, c.phi, c.q);
  const double wa = t.working.mu * t.working.phi, wb = (1 - t.working.mu) * t.working.phi;
  const double sa = t.shifted.mu * t.shifted.phi, sb = (1 - t.shifted.mu) * t.shifted.phi;
  const double ms = digamma(wa) - digamma(wb);
  const double md = digamma(wb) - digamma(t.working.phi);
  auto ystar = [&](double y) { return std::log(y / (1 - y)) - ms; };
  auto ycomb = [&](double y) { return c.mu * ystar(y) + std::log1p(-y) - md; };
  auto fstar = [&](double y) { return oracle::beta_pdf(y, wa, wb); };

  EXPECT_NEAR(d.b1[0], oracle::expect([&](double y) { return std::pow(fstar(y), 1 - c.q); }, c.a(), c.b()), 1e-6);
  EXPECT_NEAR(d.b2[0], oracle::expect([&](double y) { return std::pow(fstar(y), 2 * (1 - c.q)); }, c.a(), c.b()),
              1e-6);
  EXPECT_NEAR(d.v[0], oracle::expect([&](double y) { return ystar(y) * ystar(y); }, wa, wb), 1e-6);
  EXPECT_NEAR(d.c_star[0], c.phi * oracle::expect([&](double y) { return ystar(y) * ycomb(y); }, wa, wb), 1e-6);
  EXPECT_NEAR(d.d_star[0], oracle::expect([&](double y) { return ycomb(y) * ycomb(y); }, wa, wb), 1e-6);
  EXPECT_NEAR(d.v_2q[0] + d.m1[0] * d.m1[0], oracle::expect([&](double y) { return ystar(y) * ystar(y); }, sa, sb),
              1e-6);
  EXPECT_NEAR(d.c_star_2q[0] + d.m3[0],
              c.phi * oracle::expect([&](double y) { return ystar(y) * ycomb(y); }, sa, sb), 1e-6);
  EXPECT_NEAR(d.d_star_2q[0] + d.m2[0] * d.m2[0],
              oracle::expect([&](double y) { return ycomb(y) * ycomb(y); }, sa, sb), 1e-6);
}

TEST(AppendixDiagonals, MatchAtAsymmetricMean) {
  // mu away from 1/2 so that the shifted means differ from the working ones.
  const double mu = 0.2, phi = 35.0, q = 0.8;
  const ModelSpec spec = oracle::intercept_only();
  const AppendixDiagonals d = appendix_diagonals(spec, oracle::intercept_theta(mu, phi), q);
  const ParamTriple t = param_triple(mu, phi, q);
  const double wa = t.working.mu * t.working.phi, wb = (1 - t.working.mu) * t.working.phi;
  const double sa = t.shifted.mu * t.shifted.phi, sb = (1 - t.shifted.mu) * t.shifted.phi;
  const double ms = digamma(wa) - digamma(wb);
  const double md = digamma(wb) - digamma(t.working.phi);
  EXPECT_NEAR(d.m1[0], oracle::expect([](double y) { return std::log(y / (1 - y)); }, sa, sb) - ms, 1e-8);
  EXPECT_NEAR(d.m2[0],
              oracle::expect([&](double y) { return mu * (std::log(y / (1 - y)) - ms) + std::log1p(-y) - md; }, sa,
                             sb),
              1e-8);
  EXPECT_NEAR(d.b1[0],
              oracle::expect([&](double y) { return std::pow(oracle::beta_pdf(y, wa, wb), 1 - q); }, mu * phi,
                             (1 - mu) * phi),
              1e-8);
}

TEST(AppendixDiagonals, InfeasibleRowsReported) {
  const ModelSpec spec = oracle::intercept_only();
  EXPECT_THROW(appendix_diagonals(spec, oracle::intercept_theta(0.01, 30.0), 0.2), InfeasibleError);
}

TEST(Sandwich, JMatchesDerivativeOfExpectedEstimatingFunction) {
  for (auto [mu, phi, q] : {std::tuple{0.5, 90.0, 0.9}, std::tuple{0.25, 40.0, 0.8}}) {
    const ModelSpec spec = oracle::intercept_only();
    const Theta theta = oracle::intercept_theta(mu, phi);
    const SandwichParts parts = sandwich(spec, theta, q);
    const Eigen::VectorXd x0 = theta.stacked();
    const double a = mu * phi, b = (1 - mu) * phi;
    auto expected_psi = [&](const Eigen::VectorXd& x) {
      return oracle::expect_vector([&](double y) { return psi_smle(y, x, q); }, 2, a, b);
    };
    const Eigen::MatrixXd fd = oracle::jacobian(expected_psi, x0, 1e-3);
    EXPECT_LT((parts.J - fd).lpNorm<Eigen::Infinity>(), 1e-4) << "mu " << mu;
  }
}

TEST(Sandwich, KMatchesSecondMomentByQuadrature) {
  for (auto [mu, phi, q] : {std::tuple{0.5, 90.0, 0.9}, std::tuple{0.25, 40.0, 0.8}, std::tuple{0.7, 12.0, 0.6}}) {
    const ModelSpec spec = oracle::intercept_only();
    const Theta theta = oracle::intercept_theta(mu, phi);
    const SandwichParts parts = sandwich(spec, theta, q);
    Eigen::Matrix2d k;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        k(r, c) = oracle::expect(
            [&](double y) {
              const Eigen::VectorXd s = psi_smle(y, theta.stacked(), q);
              return s[r] * s[c];
            },
            mu * phi, (1 - mu) * phi);
      }
    }
    EXPECT_LT((parts.K - k).lpNorm<Eigen::Infinity>(), 1e-7 * k.lpNorm<Eigen::Infinity>()) << "mu " << mu;
  }
}

TEST(Sandwich, CollapsesToInverseFisherAtOne) {
  const ModelSpec spec = oracle::ais();
  const FitResult mle = fit(spec, EstimatorKind::mle());
  const SandwichParts parts = sandwich(spec, mle.theta_hat, 1.0);
  const Eigen::MatrixXd k1 = fisher_information(spec, mle.theta_hat);
  EXPECT_LT((-parts.J - k1).lpNorm<Eigen::Infinity>(), 1e-10 * k1.lpNorm<Eigen::Infinity>());
  EXPECT_LT((parts.V - k1.inverse()).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Fisher, MatchesScoreOuterProduct) {
  const double mu = 0.3, phi = 20.0;
  const ModelSpec spec = oracle::intercept_only();
  const Theta theta = oracle::intercept_theta(mu, phi);
  const Eigen::MatrixXd k1 = fisher_information(spec, theta);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double ref = oracle::expect(
          [&](double y) {
            const Eigen::VectorXd u = mle_score(y, kOne, kOne, theta);
            return u[r] * u[c];
          },
          mu * phi, (1 - mu) * phi);
      EXPECT_NEAR(k1(r, c), ref, 1e-8 * std::abs(k1(0, 0)));
    }
  }
}

TEST(Sandwich, SymmetricPositiveSemidefinite) {
  const ModelSpec spec = oracle::ais();
  const FitResult r = fit(spec, EstimatorKind::smle(0.82));
  const SandwichParts parts = sandwich(spec, r.theta_hat, 0.82);
  EXPECT_LT((parts.V - parts.V.transpose()).lpNorm<Eigen::Infinity>(), 1e-12 * parts.V.lpNorm<Eigen::Infinity>());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(parts.V);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
}

TEST(Sandwich, ScalesInverselyWithReplication) {
  const ModelSpec spec = oracle::ais();
  ModelSpec doubled;
  doubled.y.resize(2 * spec.n());
  doubled.y << spec.y, spec.y;
  doubled.X.resize(2 * spec.n(), spec.p1());
  doubled.X << spec.X, spec.X;
  doubled.Z.resize(2 * spec.n(), spec.p2());
  doubled.Z << spec.Z, spec.Z;
  const Theta theta{Eigen::Vector2d(0.78, -0.037), Eigen::VectorXd::Constant(1, 5.37)};
  const Eigen::MatrixXd v1 = sandwich(spec, theta, 0.82).V;
  const Eigen::MatrixXd v2 = sandwich(doubled, theta, 0.82).V;
  for (Eigen::Index j = 0; j < v1.rows(); ++j) EXPECT_NEAR(v2(j, j), v1(j, j) / 2.0, 1e-10 * v1(j, j));
}

TEST(Sandwich, SingularDesignIsReported) {
  ModelSpec spec = oracle::intercept_only();
  spec.X = Eigen::MatrixXd::Ones(1, 2);
  const Theta theta{Eigen::Vector2d(0.0, 0.0), Eigen::VectorXd::Constant(1, std::log(50.0))};
  EXPECT_THROW(sandwich(spec, theta, 0.9), NumericalError);
}

TEST(MdpdeSandwich, MatchesQuadratureOracles) {
  const double mu = 0.35, phi = 30.0, q = 0.8;
  const ModelSpec spec = oracle::intercept_only();
  const Theta theta = oracle::intercept_theta(mu, phi);
  const SandwichParts parts = mdpde_sandwich(spec, theta, q);
  const double a = mu * phi, b = (1 - mu) * phi;
  auto expected_psi = [&](const Eigen::VectorXd& x) {
    return oracle::expect_vector([&](double y) { return psi_mdpde(y, x, q); }, 2, a, b);
  };
  const Eigen::MatrixXd fd = oracle::jacobian(expected_psi, theta.stacked(), 1e-3);
  EXPECT_LT((parts.J - fd).lpNorm<Eigen::Infinity>(), 1e-5 * fd.lpNorm<Eigen::Infinity>());
  Eigen::Matrix2d k;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      k(r, c) = oracle::expect(
          [&](double y) {
            const Eigen::VectorXd s = psi_mdpde(y, theta.stacked(), q);
            return s[r] * s[c];
          },
          a, b);
    }
  }
  EXPECT_LT((parts.K - k).lpNorm<Eigen::Infinity>(), 1e-7 * k.lpNorm<Eigen::Infinity>());
}

TEST(MdpdeSandwich, CollapsesAtOne) {
  const ModelSpec spec = oracle::ais();
  const Theta theta{Eigen::Vector2d(0.1, -0.027), Eigen::VectorXd::Constant(1, 4.57)};
  const Eigen::MatrixXd v = mdpde_sandwich(spec, theta, 1.0).V;
  const Eigen::MatrixXd ref = fisher_information(spec, theta).inverse();
  EXPECT_LT((v - ref).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(FisherConsistency, WeightedScoreHasZeroMean) {
  for (double mu : {0.3, 0.5, 0.7}) {
    for (double phi : {20.0, 50.0, 90.0}) {
      const Theta theta = oracle::intercept_theta(mu, phi);
      const Eigen::VectorXd e = oracle::expect_vector(
          [&](double y) { return psi_smle(y, theta.stacked(), 0.85); }, 2, mu * phi, (1 - mu) * phi);
      EXPECT_LT(e.lpNorm<Eigen::Infinity>(), 1e-8) << mu << " " << phi;
    }
  }
}

TEST(Wald, AisSlope) {
  const FitResult r = fit(oracle::ais(), EstimatorKind::mle());
  const WaldResult w = wald_test(r, 1);
  EXPECT_NEAR(w.z, -7.029, 0.01);
  EXPECT_NEAR(w.statistic, w.z * w.z, 1e-12);
  EXPECT_LT(w.p_asymptotic, 1e-10);

  const WaldResult self = wald_test(r, 1, r.theta_hat.beta[1]);
  EXPECT_EQ(self.statistic, 0.0);
  EXPECT_EQ(self.p_asymptotic, 1.0);
  EXPECT_THROW(wald_test(r, 7), InputError);
}

TEST(Wald, TailAtNominalLevel) {
  FitResult r;
  r.theta_hat = Theta{Eigen::VectorXd::Constant(1, 1.96), Eigen::VectorXd::Constant(1, 0.0)};
  r.std_errors = Eigen::Vector2d(1.0, 1.0);
  EXPECT_NEAR(wald_test(r, 0).p_asymptotic, 0.05, 1e-3);
}

TEST(Bootstrap, AisSlopeIsHighlySignificant) {
  const ModelSpec spec = oracle::ais();
  const BootstrapResult b = bootstrap_pvalue(spec, EstimatorKind::mle(), 1, 500, 2024);
  EXPECT_EQ(b.replicates_used + b.failures, 500);
  EXPECT_LE(b.p_value, 1.0 / (b.replicates_used + 1.0) + 1e-12);
}

TEST(Bootstrap, NullAtEstimateGivesOne) {
  const ModelSpec spec = oracle::ais();
  const FitResult r = fit(spec, EstimatorKind::mle());
  const BootstrapResult b = bootstrap_pvalue(spec, EstimatorKind::mle(), 1, 40, 3, r.theta_hat.beta[1]);
  EXPECT_LT(b.statistic_observed, 1e-12);
  EXPECT_EQ(b.p_value, 1.0);
}

TEST(Bootstrap, IndependentOfThreadCount) {
  const ModelSpec spec = oracle::ais();
  const BootstrapResult a = bootstrap_pvalue(spec, EstimatorKind::smle(0.9), 1, 30, 17, -0.03, 1);
  const BootstrapResult b = bootstrap_pvalue(spec, EstimatorKind::smle(0.9), 1, 30, 17, -0.03, 3);
  EXPECT_EQ(a.p_value, b.p_value);
  EXPECT_EQ(a.replicates_used, b.replicates_used);
}

TEST(Bootstrap, PValuesRoughlyUniformUnderNull) {
  // Intercept-only mean model with a covariate whose true slope is zero.
  const int n = 40, repeats = 100, reps = 99;
  Rng design = substream(404, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ModelSpec spec;
  spec.X.resize(n, 2);
  spec.Z = Eigen::MatrixXd::Ones(n, 1);
  for (int i = 0; i < n; ++i) spec.X.row(i) << 1.0, u(design);
  spec.y.resize(n);
  std::vector<double> pvals;
  for (int r = 0; r < repeats; ++r) {
    Rng rng = substream(405, static_cast<std::uint64_t>(r));
    for (int i = 0; i < n; ++i) spec.y[i] = sample_beta(0.3, 40.0, rng);
    pvals.push_back(bootstrap_pvalue(spec, EstimatorKind::mle(), 1, reps, 1000 + r).p_value);
  }
  std::sort(pvals.begin(), pvals.end());
  double d = 0.0;
  for (int k = 0; k < repeats; ++k) {
    d = std::max({d, std::abs((k + 1.0) / repeats - pvals[k]), std::abs(pvals[k] - k / double(repeats))});
  }
  // Asymptotic Kolmogorov tail with the discreteness of the p-value grid added.
  const double lambda = (std::sqrt(repeats) + 0.12 + 0.11 / std::sqrt(repeats)) * std::max(0.0, d - 1.0 / (reps + 1));
  double tail = 0.0;
  for (int k = 1; k <= 100; ++k) tail += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  if (lambda < 0.3) tail = 1.0;
  EXPECT_GT(tail, 0.01) << "D = " << d;
}

TEST(Influence, MleUnboundedSmleRedescending) {
  const Theta theta = oracle::intercept_theta(0.5, 90.0);
  std::vector<double> grid;
  for (int k = 0; k <= 1000; ++k) grid.push_back(1e-6 + (1.0 - 2e-6) * k / 1000.0);
  const InfluenceCurves ic = influence_curve(theta, 0.9, kOne, kOne, grid);
  Eigen::VectorXd mle_norm(ic.y.size()), smle_norm(ic.y.size());
  for (Eigen::Index r = 0; r < ic.y.size(); ++r) {
    mle_norm[r] = ic.mle.row(r).norm();
    smle_norm[r] = ic.smle.row(r).norm();
  }
  for (int r = 0; r < 10; ++r) EXPECT_GT(mle_norm[r], mle_norm[r + 1]);
  EXPECT_LT(smle_norm[0], 1e-3 * smle_norm.maxCoeff());
  EXPECT_LT(smle_norm[ic.y.size() - 1], 1e-3 * smle_norm.maxCoeff());
}

TEST(Influence, QOneMatchesMle) {
  const Theta theta = oracle::intercept_theta(0.3, 25.0);
  const std::vector<double> grid{0.01, 0.2, 0.5, 0.93};
  const InfluenceCurves ic = influence_curve(theta, 1.0, kOne, kOne, grid);
  EXPECT_LT((ic.smle - ic.mle).lpNorm<Eigen::Infinity>(), 1e-12 * ic.mle.lpNorm<Eigen::Infinity>());
}

TEST(Influence, DesignAveragedVersion) {
  const ModelSpec spec = oracle::ais();
  const FitResult r = fit(spec, EstimatorKind::smle(0.82));
  const std::vector<double> grid{1e-5, 0.15, 0.9};
  const InfluenceCurves ic = influence_curve(spec, r.theta_hat, 0.82, spec.X.row(0).transpose(),
                                             spec.Z.row(0).transpose(), grid);
  EXPECT_EQ(ic.mle.cols(), 3);
  EXPECT_LT(ic.smle.row(0).norm(), ic.mle.row(0).norm());
}

TEST(BRobustness, SupremumFiniteAndInterior) {
  const Theta theta = oracle::intercept_theta(0.3, 40.0);
  const int points = 100000;
  double best = 0.0;
  int arg = -1;
  for (int k = 1; k < points; ++k) {
    const double y = static_cast<double>(k) / points;
    const double v = smle_weighted_score(y, kOne, kOne, theta, 0.85).norm();
    ASSERT_TRUE(std::isfinite(v));
    if (v > best) {
      best = v;
      arg = k;
    }
  }
  EXPECT_GT(arg, 1);
  EXPECT_LT(arg, points - 1);
}
