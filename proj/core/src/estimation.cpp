#include "betarobust/estimation.hpp"

#include "betarobust/error.hpp"
#include "betarobust/inference.hpp"
#include "betarobust/numeric.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <sstream>

namespace betarobust {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kWarmStartStep = 0.02;

void require_q(double q) {
  if (!(q > 0.0 && q <= 1.0)) {
    std::ostringstream os;
    os << "tuning constant q = " << q << " outside (0, 1]";
    throw DomainError(os.str());
  }
}

// Per-observation loss contributions and derivatives with respect to the
// linear predictors (eta_mu, eta_phi).
struct Terms {
  double value = 0.0;
  Eigen::VectorXd d_eta_mu;
  Eigen::VectorXd d_eta_phi;
  Eigen::VectorXd raw_weights;
  std::vector<std::size_t> infeasible;

  Eigen::VectorXd gradient(const ModelSpec& spec) const {
    Eigen::VectorXd g(spec.p());
    g << spec.X.transpose() * d_eta_mu, spec.Z.transpose() * d_eta_phi;
    return g;
  }
};

// Loss -sum L_q(f*(y_i)); q = 1 gives the negative log-likelihood.
Terms surrogate_terms(const ModelSpec& spec, const Eigen::VectorXd& stacked, double q) {
  const LinkLevel ll = predict_link_level(spec, stacked);
  const Eigen::Index n = spec.n();
  Terms t{0.0, Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), {}};
  const double one_minus_q = 1.0 - q;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = ll.mu[i];
    const double phi = ll.phi[i];
    const auto working = q_transform(mu, phi, 1.0 / q);
    if (!working) {
      t.infeasible.push_back(static_cast<std::size_t>(i));
      continue;
    }
    const double y = spec.y[i];
    const double log_f = beta_logpdf(y, working->mu, working->phi);
    const ShapePair s = ShapePair::from_mean_precision(working->mu, working->phi);
    const double psi_b = digamma(s.b);
    const double mean_star = digamma(s.a) - psi_b;
    const double mean_dagger = psi_b - digamma(working->phi);
    const double y_star = std::log(y) - std::log1p(-y);
    const double y_dagger = std::log1p(-y);

    const double weight = one_minus_q == 0.0 ? 1.0 : std::exp(one_minus_q * log_f);
    const double lq = one_minus_q == 0.0 ? log_f : std::expm1(one_minus_q * log_f) / one_minus_q;
    const double score_mu = phi * (y_star - mean_star) / q;
    const double score_phi = (mu * (y_star - mean_star) + y_dagger - mean_dagger) / q;

    t.value -= lq;
    t.raw_weights[i] = weight;
    t.d_eta_mu[i] = -weight * score_mu / link_deriv(spec.mean_link, mu);
    t.d_eta_phi[i] = -weight * score_phi / link_deriv(spec.precision_link, phi);
  }
  if (!t.infeasible.empty()) t.value = kInf;
  return t;
}

// Shifted density power divergence
//   sum_i { [int f_i^(1+a) - 1] - (1 + 1/a) [f_i(y_i)^a - 1] },  a = 1 - q,
// which has the same stationary points as the textbook form and tends to the
// negative log-likelihood as a -> 0.
Terms divergence_terms(const ModelSpec& spec, const Eigen::VectorXd& stacked, double q) {
  const LinkLevel ll = predict_link_level(spec, stacked);
  const Eigen::Index n = spec.n();
  Terms t{0.0, Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), {}};
  const double alpha = 1.0 - q;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = ll.mu[i];
    const double phi = ll.phi[i];
    const double y = spec.y[i];
    const ShapePair s = ShapePair::from_mean_precision(mu, phi);
    const double psi_b = digamma(s.b);
    const double mean_star = digamma(s.a) - psi_b;
    const double mean_dagger = psi_b - digamma(phi);
    const double y_star = std::log(y) - std::log1p(-y);
    const double y_dagger = std::log1p(-y);
    const double score_mu = phi * (y_star - mean_star);
    const double score_phi = mu * (y_star - mean_star) + y_dagger - mean_dagger;
    const double log_f = beta_logpdf(y, mu, phi);

    double g_mu = 0.0;
    double g_phi = 0.0;
    if (alpha == 0.0) {
      t.value -= log_f;
      t.raw_weights[i] = 1.0;
      g_mu = -score_mu;
      g_phi = -score_phi;
    } else {
      const ShapePair powered = powered_shapes(mu, phi, 1.0 + alpha);
      if (!(powered.a > 0.0) || !(powered.b > 0.0)) {
        t.infeasible.push_back(static_cast<std::size_t>(i));
        continue;
      }
      const double log_int = powered_density_log_integral(mu, phi, 1.0 + alpha);
      const double mass = std::exp(log_int);
      const double psi_pb = digamma(powered.b);
      const double pw_star = digamma(powered.a) - psi_pb;
      const double pw_dagger = psi_pb - digamma(powered.a + powered.b);
      const double xi_mu = mass * phi * (pw_star - mean_star);
      const double xi_phi = mass * (mu * (pw_star - mean_star) + pw_dagger - mean_dagger);
      const double f_alpha = std::exp(alpha * log_f);

      t.value += std::expm1(log_int) - (1.0 + 1.0 / alpha) * std::expm1(alpha * log_f);
      t.raw_weights[i] = f_alpha;
      g_mu = (1.0 + alpha) * (xi_mu - f_alpha * score_mu);
      g_phi = (1.0 + alpha) * (xi_phi - f_alpha * score_phi);
    }
    t.d_eta_mu[i] = g_mu / link_deriv(spec.mean_link, mu);
    t.d_eta_phi[i] = g_phi / link_deriv(spec.precision_link, phi);
  }
  if (!t.infeasible.empty()) t.value = kInf;
  return t;
}

Terms loss_terms(const ModelSpec& spec, const EstimatorKind& est, const Eigen::VectorXd& stacked) {
  switch (est.family) {
    case EstimatorKind::Family::mle: return surrogate_terms(spec, stacked, 1.0);
    case EstimatorKind::Family::smle: return surrogate_terms(spec, stacked, est.q);
    case EstimatorKind::Family::mdpde: return divergence_terms(spec, stacked, est.q);
  }
  throw DomainError("unknown estimator family");
}

void throw_if_infeasible(const Terms& t, const char* what) {
  if (!t.infeasible.empty()) throw InfeasibleError(what, t.infeasible);
}

Eigen::MatrixXd seed_inverse_hessian(const ModelSpec& spec, const Eigen::VectorXd& x,
                                     const std::vector<Eigen::Index>& free) {
  const auto dim = static_cast<Eigen::Index>(free.size());
  try {
    const Eigen::MatrixXd info = fisher_information(spec, Theta::split(x, spec.p1()));
    Eigen::MatrixXd sub(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) sub(r, c) = info(free[r], free[c]);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sub);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
      Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(dim, dim));
      if (inv.allFinite()) return inv;
    }
  } catch (const Error&) {
  }
  return Eigen::MatrixXd::Identity(dim, dim) * 1e-2;
}

struct Solved {
  Eigen::VectorXd x;
  OptimizerResult opt;
};

Solved solve(const ModelSpec& spec, const EstimatorKind& est, const Eigen::VectorXd& x0,
             const FitOptions& options) {
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < spec.p(); ++j) {
    if (!options.fixed || options.fixed->first != j) free.push_back(j);
  }
  const auto dim = static_cast<Eigen::Index>(free.size());
  Eigen::VectorXd full = x0;
  if (options.fixed) full[options.fixed->first] = options.fixed->second;

  auto embed = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd x = full;
    for (Eigen::Index k = 0; k < dim; ++k) x[free[k]] = z[k];
    return x;
  };
  Objective objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
    const Terms t = loss_terms(spec, est, embed(z));
    grad.resize(dim);
    if (!std::isfinite(t.value)) {
      grad.setConstant(std::numeric_limits<double>::quiet_NaN());
      return kInf;
    }
    const Eigen::VectorXd g = t.gradient(spec);
    for (Eigen::Index k = 0; k < dim; ++k) grad[k] = g[free[k]];
    return t.value;
  };

  Eigen::VectorXd z0(dim);
  for (Eigen::Index k = 0; k < dim; ++k) z0[k] = full[free[k]];
  const Eigen::MatrixXd h0 = seed_inverse_hessian(spec, full, free);

  OptimizerResult best;
  bool have_best = false;
  std::string failure;
  for (int attempt = 0; attempt < 2; ++attempt) {
    Eigen::VectorXd start = z0;
    if (attempt == 1) {
      // Deterministic perturbation scaled by the seed curvature.
      for (Eigen::Index k = 0; k < dim; ++k) {
        start[k] += (k % 2 == 0 ? 0.1 : -0.1) * std::sqrt(std::max(h0(k, k), 1e-12));
      }
    }
    try {
      OptimizerResult r = minimize_bfgs(objective, start, h0, options.optimizer);
      if (r.converged) return {embed(r.x), r};
      if (!have_best || r.value < best.value) {
        best = r;
        have_best = true;
      }
    } catch (const ConvergenceError& e) {
      failure = e.what();
    }
  }
  if (have_best) {
    std::ostringstream os;
    os << est.name() << " did not converge in " << best.iterations << " iterations";
    throw ConvergenceError(os.str(), embed(best.x), best.iterations);
  }
  throw ConvergenceError(est.name() + ": " + failure, embed(z0), 0);
}

}  // namespace

EstimatorKind EstimatorKind::smle(double q) {
  require_q(q);
  return {Family::smle, q};
}

EstimatorKind EstimatorKind::mdpde(double q) {
  require_q(q);
  return {Family::mdpde, q};
}

std::string EstimatorKind::name() const {
  if (family == Family::mle) return "mle";
  std::ostringstream os;
  os << to_string(family) << "(q=" << q << ")";
  return os.str();
}

std::string_view to_string(EstimatorKind::Family family) noexcept {
  switch (family) {
    case EstimatorKind::Family::mle: return "mle";
    case EstimatorKind::Family::smle: return "smle";
    case EstimatorKind::Family::mdpde: return "mdpde";
  }
  return "unknown";
}

EstimatorKind::Family parse_family(std::string_view name) {
  if (name == "mle") return EstimatorKind::Family::mle;
  if (name == "smle") return EstimatorKind::Family::smle;
  if (name == "mdpde") return EstimatorKind::Family::mdpde;
  throw InputError("unknown estimator '" + std::string(name) + "'");
}

double loglik(const ModelSpec& spec, const Theta& theta) {
  const LinkLevel ll = predict_link_level(spec, theta);
  double total = 0.0;
  for (Eigen::Index i = 0; i < spec.n(); ++i) total += beta_logpdf(spec.y[i], ll.mu[i], ll.phi[i]);
  return total;
}

double lq_objective(const ModelSpec& spec, const Theta& theta, double q) {
  require_q(q);
  const Terms t = surrogate_terms(spec, theta.stacked(), q);
  throw_if_infeasible(t, "surrogate likelihood undefined: working parameters leave the beta family");
  return -t.value;
}

Eigen::VectorXd lq_gradient(const ModelSpec& spec, const Theta& theta, double q) {
  require_q(q);
  const Terms t = surrogate_terms(spec, theta.stacked(), q);
  throw_if_infeasible(t, "surrogate likelihood undefined: working parameters leave the beta family");
  return -t.gradient(spec);
}

double mdpde_objective(const ModelSpec& spec, const Theta& theta, double q) {
  require_q(q);
  if (q == 1.0) return -loglik(spec, theta);
  const Terms t = divergence_terms(spec, theta.stacked(), q);
  throw_if_infeasible(t, "powered beta density is not integrable");
  return t.value - static_cast<double>(spec.n()) / (1.0 - q);
}

Eigen::VectorXd mdpde_gradient(const ModelSpec& spec, const Theta& theta, double q) {
  require_q(q);
  const Terms t = divergence_terms(spec, theta.stacked(), q);
  throw_if_infeasible(t, "powered beta density is not integrable");
  return t.gradient(spec);
}

double estimator_loss(const ModelSpec& spec, const EstimatorKind& estimator,
                      const Eigen::VectorXd& stacked, Eigen::VectorXd* gradient) {
  const Terms t = loss_terms(spec, estimator, stacked);
  if (gradient) *gradient = std::isfinite(t.value) ? t.gradient(spec) : Eigen::VectorXd();
  return t.value;
}

Theta initial_theta(const ModelSpec& spec) {
  const Eigen::Index n = spec.n();
  const double nd = static_cast<double>(n);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double shrunk = (spec.y[i] * (nd - 1.0) + 0.5) / nd;
    z[i] = link_eval(spec.mean_link, shrunk);
  }
  const Eigen::VectorXd beta = spec.X.colPivHouseholderQr().solve(z);
  const Eigen::VectorXd resid = z - spec.X * beta;
  const double denom = std::max<double>(1.0, static_cast<double>(n - spec.p1()));
  const double sigma2 = std::max(resid.squaredNorm() / denom, 1e-12);

  double phi_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = std::clamp(link_inverse(spec.mean_link, spec.X.row(i).dot(beta)), 1e-6, 1.0 - 1e-6);
    const double gp = link_deriv(spec.mean_link, mu);
    const double var = sigma2 / (gp * gp);
    phi_sum += mu * (1.0 - mu) / var - 1.0;
  }
  const double phi0 = std::max(phi_sum / nd, 0.5);
  const Eigen::VectorXd target = Eigen::VectorXd::Constant(n, link_eval(spec.precision_link, phi0));
  const Eigen::VectorXd gamma = spec.Z.colPivHouseholderQr().solve(target);
  return {beta, gamma};
}

FitResult fit(const ModelSpec& spec, const EstimatorKind& estimator, const std::optional<Theta>& init,
              const FitOptions& options) {
  validate(spec);
  require_q(estimator.q);
  if (estimator.family == EstimatorKind::Family::mle && estimator.q != 1.0) {
    throw DomainError("mle is defined at q = 1 only");
  }
  Eigen::VectorXd x0 = init ? init->stacked() : initial_theta(spec).stacked();
  if (x0.size() != spec.p()) throw InputError("initial parameter vector has the wrong length");
  if (options.fixed) {
    if (options.fixed->first < 0 || options.fixed->first >= spec.p()) {
      throw InputError("fixed coefficient index out of range");
    }
    x0[options.fixed->first] = options.fixed->second;
  }

  auto feasible = [&](const EstimatorKind& est, const Eigen::VectorXd& x) {
    return std::isfinite(estimator_loss(spec, est, x, nullptr));
  };

  // An infeasible start for q < 1: walk q down from 1 warm-starting each fit.
  if (estimator.q < 1.0 && !feasible(estimator, x0)) {
    Eigen::VectorXd current = x0;
    bool reached = false;
    for (int k = 0;; ++k) {
      const double qk = 1.0 - kWarmStartStep * k;
      if (qk <= estimator.q + 1e-12) break;
      EstimatorKind step = estimator;
      step.q = qk;
      if (!feasible(step, current)) continue;
      try {
        current = solve(spec, step, current, options).x;
      } catch (const ConvergenceError& e) {
        current = e.best();
      }
      if (feasible(estimator, current)) {
        reached = true;
        break;
      }
    }
    if (!reached) {
      const Terms t = loss_terms(spec, estimator, current);
      throw InfeasibleError(estimator.name() + " is undefined along the whole warm-start path; "
                            "the data look like an unbounded beta density, use mle",
                            t.infeasible);
    }
    x0 = current;
  }

  const Solved solved = solve(spec, estimator, x0, options);
  const Terms terms = loss_terms(spec, estimator, solved.x);

  FitResult out;
  out.estimator = estimator;
  out.q_used = estimator.q;
  out.theta_hat = Theta::split(solved.x, spec.p1());
  out.objective_value = solved.opt.value;
  out.converged = solved.opt.converged;
  out.iterations = solved.opt.iterations;
  out.raw_weights = terms.raw_weights;
  const double wmax = terms.raw_weights.maxCoeff();
  out.weights = (wmax > 0.0 && std::isfinite(wmax)) ? Eigen::VectorXd(terms.raw_weights / wmax)
                                                    : Eigen::VectorXd::Ones(spec.n());
  if (estimator.q == 1.0) {
    out.weights.setOnes();
    out.raw_weights.setOnes();
  }

  const Eigen::Index p = spec.p();
  out.covariance = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  if (options.compute_covariance) {
    try {
      out.covariance = covariance_matrix(spec, out.theta_hat, estimator);
    } catch (const Error&) {
    }
  }
  out.std_errors = out.covariance.diagonal().array().sqrt();
  return out;
}

}  // namespace betarobust
