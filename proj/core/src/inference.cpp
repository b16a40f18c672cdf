#include "betarobust/inference.hpp"

#include "betarobust/error.hpp"
#include "betarobust/numeric.hpp"
#include "betarobust/parallel.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace betarobust {

namespace {

constexpr double kMaxCondition = 1e12;

Eigen::MatrixXd assemble(const ModelSpec& spec, const Eigen::VectorXd& w_bb, const Eigen::VectorXd& w_bg,
                         const Eigen::VectorXd& w_gg) {
  const Eigen::Index p1 = spec.p1();
  const Eigen::Index p2 = spec.p2();
  Eigen::MatrixXd out(p1 + p2, p1 + p2);
  out.topLeftCorner(p1, p1) = spec.X.transpose() * w_bb.asDiagonal() * spec.X;
  out.topRightCorner(p1, p2) = spec.X.transpose() * w_bg.asDiagonal() * spec.Z;
  out.bottomLeftCorner(p2, p1) = out.topRightCorner(p1, p2).transpose();
  out.bottomRightCorner(p2, p2) = spec.Z.transpose() * w_gg.asDiagonal() * spec.Z;
  return out;
}

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& m, const char* what) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv.maxCoeff() : 0.0;
  const double smin = sv.size() ? sv.minCoeff() : 0.0;
  if (!(smin > 0.0) || !std::isfinite(smax) || smax / smin > kMaxCondition) {
    std::ostringstream os;
    os << what << " is singular or ill-conditioned (condition number "
       << (smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity()) << ")";
    throw NumericalError(os.str());
  }
  return m.inverse();
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

SandwichParts finish(Eigen::MatrixXd J, Eigen::MatrixXd K, const char* what) {
  const Eigen::MatrixXd Jinv = checked_inverse(J, what);
  Eigen::MatrixXd V = symmetrized(Jinv * K * Jinv.transpose());
  return {std::move(J), std::move(K), std::move(V)};
}

// E[s s^T] and E[s] where s = (phi (y* - mean_star), mu (y* - mean_star) + y† - mean_dagger),
// with y ~ Beta(shapes) and the centering constants from the model density.
struct ScoreMoments {
  Eigen::Matrix2d second;
  Eigen::Vector2d mean;
};

ScoreMoments score_moments(ShapePair shapes, double mu, double phi, double mean_star, double mean_dagger) {
  const LogitMoments m = logit_moments(shapes);
  const double ds = m.mean_star - mean_star;
  const double dd = m.mean_dagger - mean_dagger;
  ScoreMoments out;
  out.mean << phi * ds, mu * ds + dd;
  const double c11 = phi * phi * m.var_star;
  const double c12 = phi * (mu * m.var_star + m.cov);
  const double c22 = mu * mu * m.var_star + 2.0 * mu * m.cov + m.var_dagger;
  out.second << c11, c12, c12, c22;
  out.second += out.mean * out.mean.transpose();
  return out;
}

Eigen::VectorXd to_parameter_space(const Eigen::Vector2d& s, const Eigen::VectorXd& x_row,
                                   const Eigen::VectorXd& z_row, double t_mu, double t_phi) {
  Eigen::VectorXd out(x_row.size() + z_row.size());
  out << s[0] * t_mu * x_row, s[1] * t_phi * z_row;
  return out;
}

}  // namespace

AppendixDiagonals appendix_diagonals(const ModelSpec& spec, const Theta& theta, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("appendix_diagonals: q outside (0, 1]");
  const LinkLevel ll = predict_link_level(spec, theta);
  const Eigen::Index n = spec.n();
  auto vec = [n] { return Eigen::VectorXd(n); };
  AppendixDiagonals d{vec(), vec(), vec(), vec(), vec(), vec(), vec(), vec(),
                      vec(), vec(), vec(), vec(), vec(), vec()};
  std::vector<std::size_t> bad;
  for (Eigen::Index i = 0; i < n; ++i) {
    const ParamTriple tr = param_triple(ll.mu[i], ll.phi[i], q);
    if (!tr.valid || validity_check(ll.mu[i], ll.phi[i], q) != Validity::ok) {
      bad.push_back(static_cast<std::size_t>(i));
      continue;
    }
    const double mu_l = tr.link_level.mu;
    const double phi_l = tr.link_level.phi;
    const ShapePair link = ShapePair::from_mean_precision(mu_l, phi_l);
    const ShapePair work = ShapePair::from_mean_precision(tr.working.mu, tr.working.phi);
    const ShapePair shift = ShapePair::from_mean_precision(tr.shifted.mu, tr.shifted.phi);
    const double lb_link = log_beta_fn(link);
    const double lb_work = log_beta_fn(work);
    const double lb_shift = log_beta_fn(shift);

    d.b1[i] = std::exp(q * lb_work - lb_link);
    d.b2[i] = std::exp(lb_shift - 2.0 * (1.0 - q) * lb_work - lb_link);
    d.t_mu[i] = 1.0 / link_deriv(spec.mean_link, mu_l);
    d.t_phi[i] = 1.0 / link_deriv(spec.precision_link, phi_l);
    d.phi_q[i] = phi_l;

    const double tw_a = trigamma(work.a);
    const double tw_b = trigamma(work.b);
    const double ts_a = trigamma(shift.a);
    const double ts_b = trigamma(shift.b);
    d.v[i] = tw_a + tw_b;
    d.v_2q[i] = ts_a + ts_b;
    d.c_star[i] = phi_l * (mu_l * tw_a - (1.0 - mu_l) * tw_b);
    d.c_star_2q[i] = phi_l * (mu_l * ts_a - (1.0 - mu_l) * ts_b);
    d.d_star[i] = mu_l * mu_l * tw_a + (1.0 - mu_l) * (1.0 - mu_l) * tw_b - trigamma(tr.working.phi);
    d.d_star_2q[i] = mu_l * mu_l * ts_a + (1.0 - mu_l) * (1.0 - mu_l) * ts_b - trigamma(tr.shifted.phi);

    const double star_w = digamma(work.a) - digamma(work.b);
    const double dagger_w = digamma(work.b) - digamma(tr.working.phi);
    const double star_s = digamma(shift.a) - digamma(shift.b);
    const double dagger_s = digamma(shift.b) - digamma(tr.shifted.phi);
    const double mu_d = mu_l * (star_s - star_w) + dagger_s - dagger_w;
    d.m1[i] = star_s - star_w;
    d.m2[i] = mu_d;
    d.m3[i] = mu_d * phi_l * (star_s - star_w);
  }
  if (!bad.empty()) {
    throw InfeasibleError("asymptotic covariance undefined: mu*phi or (1-mu)*phi <= 2(1-q)/(2-q)", bad);
  }
  return d;
}

SandwichParts sandwich(const ModelSpec& spec, const Theta& theta, double q) {
  const AppendixDiagonals d = appendix_diagonals(spec, theta, q);
  const Eigen::ArrayXd t_mu2 = d.t_mu.array().square();
  const Eigen::ArrayXd t_phi2 = d.t_phi.array().square();
  const Eigen::ArrayXd phi_q2 = d.phi_q.array().square();
  const Eigen::ArrayXd t_cross = d.t_mu.array() * d.t_phi.array();

  const Eigen::VectorXd j_bb = d.b1.array() * t_mu2 * phi_q2 * d.v.array();
  const Eigen::VectorXd j_bg = d.b1.array() * t_cross * d.c_star.array();
  const Eigen::VectorXd j_gg = d.b1.array() * t_phi2 * d.d_star.array();
  Eigen::MatrixXd J = -(1.0 / q) * assemble(spec, j_bb, j_bg, j_gg);

  const Eigen::VectorXd k_bb = d.b2.array() * t_mu2 * phi_q2 * (d.v_2q.array() + d.m1.array().square());
  const Eigen::VectorXd k_bg = d.b2.array() * t_cross * (d.c_star_2q.array() + d.m3.array());
  const Eigen::VectorXd k_gg = d.b2.array() * t_phi2 * (d.d_star_2q.array() + d.m2.array().square());
  Eigen::MatrixXd K = (1.0 / (q * q)) * assemble(spec, k_bb, k_bg, k_gg);

  return finish(std::move(J), std::move(K), "J_q");
}

Eigen::MatrixXd fisher_information(const ModelSpec& spec, const Theta& theta) {
  const AppendixDiagonals d = appendix_diagonals(spec, theta, 1.0);
  const Eigen::ArrayXd t_mu2 = d.t_mu.array().square();
  const Eigen::VectorXd w_bb = t_mu2 * d.phi_q.array().square() * d.v.array();
  const Eigen::VectorXd w_bg = d.t_mu.array() * d.t_phi.array() * d.c_star.array();
  const Eigen::VectorXd w_gg = d.t_phi.array().square() * d.d_star.array();
  return assemble(spec, w_bb, w_bg, w_gg);
}

SandwichParts mdpde_sandwich(const ModelSpec& spec, const Theta& theta, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("mdpde_sandwich: q outside (0, 1]");
  const double alpha = 1.0 - q;
  const LinkLevel ll = predict_link_level(spec, theta);
  const Eigen::Index p = spec.p();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(p, p);
  std::vector<std::size_t> bad;
  for (Eigen::Index i = 0; i < spec.n(); ++i) {
    const double mu = ll.mu[i];
    const double phi = ll.phi[i];
    const ShapePair once = powered_shapes(mu, phi, 1.0 + alpha);
    const ShapePair twice = powered_shapes(mu, phi, 1.0 + 2.0 * alpha);
    if (!(twice.a > 0.0 && twice.b > 0.0 && once.a > 0.0 && once.b > 0.0)) {
      bad.push_back(static_cast<std::size_t>(i));
      continue;
    }
    const ShapePair s = ShapePair::from_mean_precision(mu, phi);
    const double mean_star = digamma(s.a) - digamma(s.b);
    const double mean_dagger = digamma(s.b) - digamma(phi);
    const double mass1 = std::exp(powered_density_log_integral(mu, phi, 1.0 + alpha));
    const double mass2 = std::exp(powered_density_log_integral(mu, phi, 1.0 + 2.0 * alpha));
    const ScoreMoments m1 = score_moments(once, mu, phi, mean_star, mean_dagger);
    const ScoreMoments m2 = score_moments(twice, mu, phi, mean_star, mean_dagger);

    const Eigen::Matrix2d j_local = mass1 * m1.second;
    const Eigen::Vector2d xi = mass1 * m1.mean;
    const Eigen::Matrix2d k_local = mass2 * m2.second - xi * xi.transpose();

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2, p);
    G.block(0, 0, 1, spec.p1()) = spec.X.row(i) / link_deriv(spec.mean_link, mu);
    G.block(1, spec.p1(), 1, spec.p2()) = spec.Z.row(i) / link_deriv(spec.precision_link, phi);
    J.noalias() -= G.transpose() * j_local * G;
    K.noalias() += G.transpose() * k_local * G;
  }
  if (!bad.empty()) {
    throw InfeasibleError("MDPDE covariance undefined: mu*phi or (1-mu)*phi <= 2(1-q)/(3-2q)", bad);
  }
  return finish(std::move(J), std::move(K), "MDPDE J");
}

Eigen::MatrixXd covariance_matrix(const ModelSpec& spec, const Theta& theta, const EstimatorKind& estimator) {
  if (estimator.q == 1.0 || estimator.family == EstimatorKind::Family::mle) {
    return symmetrized(checked_inverse(fisher_information(spec, theta), "Fisher information"));
  }
  if (estimator.family == EstimatorKind::Family::smle) return sandwich(spec, theta, estimator.q).V;
  return mdpde_sandwich(spec, theta, estimator.q).V;
}

Eigen::VectorXd mle_score(double y, const Eigen::VectorXd& x_row, const Eigen::VectorXd& z_row,
                          const Theta& theta, LinkKind mean_link, LinkKind precision_link) {
  return smle_weighted_score(y, x_row, z_row, theta, 1.0, mean_link, precision_link);
}

double smle_weight(double y, double mu, double phi, double q) {
  if (q == 1.0) return 1.0;
  const auto working = q_transform(mu, phi, 1.0 / q);
  if (!working) throw InfeasibleError("working parameters leave the beta family", {});
  return std::exp((1.0 - q) * beta_logpdf(y, working->mu, working->phi));
}

Eigen::VectorXd smle_weighted_score(double y, const Eigen::VectorXd& x_row, const Eigen::VectorXd& z_row,
                                    const Theta& theta, double q, LinkKind mean_link, LinkKind precision_link) {
  const double mu = link_inverse(mean_link, x_row.dot(theta.beta));
  const double phi = link_inverse(precision_link, z_row.dot(theta.gamma));
  const auto working = q_transform(mu, phi, 1.0 / q);
  if (!working) throw InfeasibleError("working parameters leave the beta family", {});
  const ShapePair w = ShapePair::from_mean_precision(working->mu, working->phi);
  const double mean_star = digamma(w.a) - digamma(w.b);
  const double mean_dagger = digamma(w.b) - digamma(working->phi);
  const double y_star = std::log(y) - std::log1p(-y);
  const double y_dagger = std::log1p(-y);
  const double weight = smle_weight(y, mu, phi, q);
  const Eigen::Vector2d s(phi * (y_star - mean_star) / q, (mu * (y_star - mean_star) + y_dagger - mean_dagger) / q);
  return weight * to_parameter_space(s, x_row, z_row, 1.0 / link_deriv(mean_link, mu),
                                     1.0 / link_deriv(precision_link, phi));
}

WaldResult wald_test(const FitResult& fit, Eigen::Index index, double null_value) {
  const Eigen::VectorXd est = fit.estimates();
  if (index < 0 || index >= est.size()) throw InputError("wald_test: coefficient index out of range");
  const double se = fit.std_errors.size() == est.size() ? fit.std_errors[index]
                                                        : std::numeric_limits<double>::quiet_NaN();
  if (!(se > 0.0) || !std::isfinite(se)) throw NumericalError("wald_test: standard error unavailable");
  const double z = (est[index] - null_value) / se;
  const double stat = z * z;
  return {z, stat, chi2_1_upper_tail(stat)};
}

BootstrapResult bootstrap_pvalue(const ModelSpec& spec, const EstimatorKind& estimator, Eigen::Index index,
                                 int replicates, std::uint64_t seed, double null_value, unsigned threads) {
  if (replicates < 1) throw InputError("bootstrap needs at least one replicate");
  const FitResult observed = fit(spec, estimator);
  const double stat_obs = wald_test(observed, index, null_value).statistic;

  FitOptions constrained;
  constrained.compute_covariance = false;
  constrained.fixed = std::make_pair(index, null_value);
  const FitResult null_fit = fit(spec, estimator, observed.theta_hat, constrained);
  const LinkLevel ll = predict_link_level(spec, null_fit.theta_hat);

  std::vector<std::optional<double>> stats(static_cast<std::size_t>(replicates));
  parallel_for(stats.size(), threads, [&](std::size_t b) {
    Rng rng = substream(seed, b);
    ModelSpec sim = spec;
    for (Eigen::Index i = 0; i < spec.n(); ++i) sim.y[i] = sample_beta(ll.mu[i], ll.phi[i], rng);
    try {
      const FitResult refit = fit(sim, estimator, null_fit.theta_hat);
      const WaldResult w = wald_test(refit, index, null_value);
      if (std::isfinite(w.statistic)) stats[b] = w.statistic;
    } catch (const Error&) {
    }
  });

  int used = 0;
  int exceed = 0;
  for (const auto& s : stats) {
    if (!s) continue;
    ++used;
    if (*s >= stat_obs) ++exceed;
  }
  const int failures = replicates - used;
  if (failures * 5 > replicates) {
    std::ostringstream os;
    os << "bootstrap: " << failures << " of " << replicates << " replicate fits failed";
    throw Error(ErrorCategory::convergence, os.str());
  }
  return {(1.0 + exceed) / (used + 1.0), stat_obs, used, failures};
}

namespace {

InfluenceCurves influence_from(const Eigen::MatrixXd& Jq, const Eigen::MatrixXd& K1, const Theta& theta,
                               double q, const Eigen::VectorXd& x_row, const Eigen::VectorXd& z_row,
                               std::span<const double> y_grid, LinkKind mean_link, LinkKind precision_link) {
  const Eigen::MatrixXd Jinv = checked_inverse(Jq, "J_q");
  const Eigen::MatrixXd Kinv = checked_inverse(K1, "K_1");
  const auto rows = static_cast<Eigen::Index>(y_grid.size());
  const Eigen::Index p = x_row.size() + z_row.size();
  InfluenceCurves out{Eigen::VectorXd(rows), Eigen::MatrixXd(rows, p), Eigen::MatrixXd(rows, p)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double y = y_grid[static_cast<std::size_t>(r)];
    out.y[r] = y;
    out.mle.row(r) = (Kinv * mle_score(y, x_row, z_row, theta, mean_link, precision_link)).transpose();
    out.smle.row(r) =
        -(Jinv * smle_weighted_score(y, x_row, z_row, theta, q, mean_link, precision_link)).transpose();
  }
  return out;
}

}  // namespace

InfluenceCurves influence_curve(const Theta& theta, double q, const Eigen::VectorXd& x_row,
                                const Eigen::VectorXd& z_row, std::span<const double> y_grid, LinkKind mean_link,
                                LinkKind precision_link) {
  ModelSpec single;
  single.y = Eigen::VectorXd::Constant(1, 0.5);
  single.X = x_row.transpose();
  single.Z = z_row.transpose();
  single.mean_link = mean_link;
  single.precision_link = precision_link;
  return influence_from(sandwich(single, theta, q).J, fisher_information(single, theta), theta, q, x_row, z_row,
                        y_grid, mean_link, precision_link);
}

InfluenceCurves influence_curve(const ModelSpec& design, const Theta& theta, double q,
                                const Eigen::VectorXd& x_row, const Eigen::VectorXd& z_row,
                                std::span<const double> y_grid) {
  const double n = static_cast<double>(design.n());
  return influence_from(sandwich(design, theta, q).J / n, fisher_information(design, theta) / n, theta, q, x_row,
                        z_row, y_grid, design.mean_link, design.precision_link);
}

}  // namespace betarobust
