#include "betarobust/error.hpp"
#include "betarobust/model.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace betarobust;

TEST(Links, SymmetryPointAndRoundTrip) {
  EXPECT_DOUBLE_EQ(link_eval(LinkKind::logit, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(link_deriv(LinkKind::logit, 0.5), 4.0);
  EXPECT_NEAR(link_inverse(LinkKind::logit, link_eval(LinkKind::logit, 0.06)), 0.06, 1e-14);
  EXPECT_NEAR(link_inverse(LinkKind::log, 4.5), 90.0171313005218, 1e-10);
  EXPECT_NEAR(link_eval(LinkKind::log, 7.0), std::log(7.0), 1e-15);
}

TEST(Links, InverseAndDerivativeAreConsistent) {
  for (LinkKind link : {LinkKind::logit, LinkKind::probit, LinkKind::cloglog}) {
    for (double eta : {-4.0, -1.3, 0.0, 0.7, 2.5}) {
      const double mu = link_inverse(link, eta);
      EXPECT_NEAR(link_eval(link, mu), eta, 1e-12) << to_string(link);
      const double h = 1e-5;
      const double dmu = (link_inverse(link, eta + h) - link_inverse(link, eta - h)) / (2 * h);
      EXPECT_NEAR(link_deriv(link, mu) * dmu, 1.0, 1e-7) << to_string(link);
    }
  }
  for (double phi : {0.3, 5.0, 900.0}) EXPECT_NEAR(link_deriv(LinkKind::log, phi), 1.0 / phi, 1e-15);
}

TEST(Links, DomainErrorsAndParsing) {
  EXPECT_THROW(link_eval(LinkKind::logit, 1.0), DomainError);
  EXPECT_THROW(link_eval(LinkKind::log, -1.0), DomainError);
  EXPECT_EQ(parse_link("cloglog"), LinkKind::cloglog);
  EXPECT_THROW(parse_link("identity"), InputError);
  EXPECT_TRUE(is_mean_link(LinkKind::probit));
  EXPECT_FALSE(is_mean_link(LinkKind::log));
}

TEST(PredictLinkLevel, InterceptOnlyAndScenarioRange) {
  ModelSpec spec = oracle::intercept_only();
  LinkLevel ll = predict_link_level(spec, Theta{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)});
  EXPECT_DOUBLE_EQ(ll.mu[0], 0.5);
  EXPECT_DOUBLE_EQ(ll.phi[0], 1.0);

  ModelSpec s1;
  const int n = 101;
  s1.y = Eigen::VectorXd::Constant(n, 0.5);
  s1.X.resize(n, 2);
  s1.Z = Eigen::MatrixXd::Ones(n, 1);
  for (int i = 0; i < n; ++i) {
    s1.X(i, 0) = 1.0;
    s1.X(i, 1) = i / 100.0;
  }
  ll = predict_link_level(s1, Theta{Eigen::Vector2d(-1.8, -2.0), Eigen::VectorXd::Constant(1, 4.5)});
  EXPECT_NEAR(ll.mu.minCoeff(), 0.0219, 5e-4);
  EXPECT_NEAR(ll.mu.maxCoeff(), 0.1419, 5e-4);
  EXPECT_NEAR(ll.phi.minCoeff(), 90.017, 1e-3);
}

TEST(PredictLinkLevel, SaturatesExtremePredictors) {
  ModelSpec spec = oracle::intercept_only();
  LinkLevel ll = predict_link_level(spec, Theta{Eigen::VectorXd::Constant(1, 80.0), Eigen::VectorXd::Constant(1, 90.0)});
  EXPECT_LE(ll.mu[0], 1.0 - kMeanFloor);
  EXPECT_LE(ll.phi[0], kPrecisionCeiling);
}

TEST(PredictLinkLevel, RowPermutationEquivariant) {
  ModelSpec spec = oracle::ais();
  const Theta theta{Eigen::Vector2d(0.1, -0.03), Eigen::VectorXd::Constant(1, 4.6)};
  const LinkLevel base = predict_link_level(spec, theta);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(spec.n());
  perm.setIdentity();
  std::mt19937 gen(3);
  std::shuffle(perm.indices().data(), perm.indices().data() + spec.n(), gen);
  ModelSpec shuffled = spec;
  shuffled.y = perm * spec.y;
  shuffled.X = perm * spec.X;
  shuffled.Z = perm * spec.Z;
  const LinkLevel moved = predict_link_level(shuffled, theta);
  EXPECT_TRUE(moved.mu.isApprox(perm * base.mu, 1e-15));
}

TEST(QTransform, IdentityAndHandValues) {
  auto id = q_transform(0.3, 12.0, 1.0);
  ASSERT_TRUE(id);
  EXPECT_EQ(id->mu, 0.3);
  EXPECT_EQ(id->phi, 12.0);

  auto half = q_transform(0.5, 90.0, 0.9);
  ASSERT_TRUE(half);
  EXPECT_NEAR(half->mu, 0.5, 1e-15);
  EXPECT_NEAR(half->phi, 81.2, 1e-12);

  auto work = q_transform(0.06, 90.0, 1.0 / 0.9);
  ASSERT_TRUE(work);
  EXPECT_NEAR(work->phi, 88.0 / 0.9 + 2.0, 1e-12);
  EXPECT_NEAR(work->mu, (4.4 / 0.9 + 1.0) / (88.0 / 0.9 + 2.0), 1e-14);
  EXPECT_NEAR(work->mu, 0.059020, 1e-6);
}

TEST(QTransform, InverseRoundTrip) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> mu_d(0.05, 0.95), phi_d(2.5, 300.0), alpha_d(0.5, 2.0);
  for (int k = 0; k < 500; ++k) {
    const double mu = mu_d(gen), phi = phi_d(gen), alpha = alpha_d(gen);
    auto t = q_transform(mu, phi, alpha);
    if (!t) continue;
    auto back = q_transform(t->mu, t->phi, 1.0 / alpha);
    ASSERT_TRUE(back);
    EXPECT_NEAR(back->mu, mu, 1e-12);
    EXPECT_NEAR(back->phi, phi, 1e-12 * phi);
  }
}

TEST(QTransform, SignalsInvalidResult) {
  // phi_a = 3 (1 - 2) + 2 < 0
  EXPECT_FALSE(q_transform(0.001, 1.0, 3.0));
  EXPECT_THROW(q_transform(0.5, 2.0, 0.0), DomainError);
}

TEST(ParamTriple, MapsWorkingAndShifted) {
  const ParamTriple t = param_triple(0.3, 40.0, 0.8);
  ASSERT_TRUE(t.valid);
  auto w = q_transform(0.3, 40.0, 1.0 / 0.8);
  auto s = q_transform(w->mu, w->phi, 1.2);
  EXPECT_DOUBLE_EQ(t.working.mu, w->mu);
  EXPECT_DOUBLE_EQ(t.shifted.phi, s->phi);
  const ParamTriple one = param_triple(0.3, 40.0, 1.0);
  EXPECT_EQ(one.working.mu, 0.3);
  EXPECT_EQ(one.shifted.phi, 40.0);
}

TEST(Validity, Examples) {
  EXPECT_EQ(validity_check(0.5, 90.0, 0.9), Validity::ok);
  EXPECT_EQ(validity_check(0.005, 10.0, 0.5), Validity::smle_infeasible);
  // 2(1-q)/(2-q) = 2/3 at q = 0.5: mu phi = 0.6 passes the first bound only
  EXPECT_EQ(validity_check(0.06, 10.0, 0.5), Validity::covariance_infeasible);
  EXPECT_EQ(validity_check(1e-6, 0.5, 1.0), Validity::ok);
}

TEST(Validity, BoundedDensitiesAlwaysOk) {
  for (double mu : {0.02, 0.3, 0.5, 0.9}) {
    for (double phi : {1.0 / 0.02, 60.0, 400.0}) {
      if (mu * phi < 1.0 || (1 - mu) * phi < 1.0) continue;
      for (double q : {0.05, 0.5, 0.8, 1.0}) EXPECT_EQ(validity_check(mu, phi, q), Validity::ok);
    }
  }
}

TEST(Validate, RejectsBadSpecs) {
  ModelSpec spec = oracle::ais();
  EXPECT_NO_THROW(validate(spec));

  ModelSpec boundary = spec;
  boundary.y[3] = 1.0;
  EXPECT_THROW(validate(boundary), InputError);

  ModelSpec deficient = spec;
  deficient.X.col(1) = deficient.X.col(0) * 3.0;
  EXPECT_THROW(validate(deficient), InputError);

  ModelSpec mismatch = spec;
  mismatch.Z = Eigen::MatrixXd::Ones(10, 1);
  EXPECT_THROW(validate(mismatch), InputError);

  ModelSpec wrong_link = spec;
  wrong_link.mean_link = LinkKind::log;
  EXPECT_THROW(validate(wrong_link), InputError);

  ModelSpec tiny = oracle::intercept_only();
  EXPECT_THROW(validate(tiny), InputError);
}

TEST(Theta, StackAndSplit) {
  const Theta t{Eigen::Vector2d(1, 2), Eigen::Vector3d(3, 4, 5)};
  const Eigen::VectorXd s = t.stacked();
  ASSERT_EQ(s.size(), 5);
  const Theta back = Theta::split(s, 2);
  EXPECT_EQ(back.beta, t.beta);
  EXPECT_EQ(back.gamma, t.gamma);
}

TEST(ModelSpec, CoefficientNames) {
  const ModelSpec spec = oracle::ais();
  const auto names = spec.coefficient_names();
  ASSERT_EQ(names.size(), 3u);
  EXPECT_EQ(names[1], "mean:LBM");
  EXPECT_EQ(names[2], "precision:(Intercept)");
}
