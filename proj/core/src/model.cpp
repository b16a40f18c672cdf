#include "betarobust/model.hpp"

#include "betarobust/error.hpp"
#include "betarobust/numeric.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace betarobust {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void require_mean_domain(const char* fn, double mu) {
  if (!(mu > 0.0 && mu < 1.0)) {
    std::ostringstream os;
    os << fn << ": " << mu << " outside (0, 1)";
    throw DomainError(os.str());
  }
}

}  // namespace

std::string_view to_string(LinkKind link) noexcept {
  switch (link) {
    case LinkKind::logit: return "logit";
    case LinkKind::probit: return "probit";
    case LinkKind::cloglog: return "cloglog";
    case LinkKind::log: return "log";
  }
  return "unknown";
}

LinkKind parse_link(std::string_view name) {
  if (name == "logit") return LinkKind::logit;
  if (name == "probit") return LinkKind::probit;
  if (name == "cloglog") return LinkKind::cloglog;
  if (name == "log") return LinkKind::log;
  throw InputError("unknown link '" + std::string(name) + "'");
}

bool is_mean_link(LinkKind link) noexcept { return link != LinkKind::log; }

double link_eval(LinkKind link, double value) {
  switch (link) {
    case LinkKind::logit:
      require_mean_domain("logit", value);
      return std::log(value) - std::log1p(-value);
    case LinkKind::probit:
      require_mean_domain("probit", value);
      return normal_quantile(value);
    case LinkKind::cloglog:
      require_mean_domain("cloglog", value);
      return std::log(-std::log1p(-value));
    case LinkKind::log:
      if (!(value > 0.0)) throw DomainError("log link: nonpositive argument");
      return std::log(value);
  }
  throw DomainError("link_eval: unknown link");
}

double link_inverse(LinkKind link, double eta) {
  switch (link) {
    case LinkKind::logit:
      return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case LinkKind::probit:
      return normal_cdf(eta);
    case LinkKind::cloglog:
      return -std::expm1(-std::exp(eta));
    case LinkKind::log:
      return std::exp(eta);
  }
  throw DomainError("link_inverse: unknown link");
}

double link_deriv(LinkKind link, double value) {
  switch (link) {
    case LinkKind::logit:
      require_mean_domain("logit'", value);
      return 1.0 / (value * (1.0 - value));
    case LinkKind::probit: {
      require_mean_domain("probit'", value);
      const double z = normal_quantile(value);
      return 1.0 / (kInvSqrt2Pi * std::exp(-0.5 * z * z));
    }
    case LinkKind::cloglog:
      require_mean_domain("cloglog'", value);
      return -1.0 / ((1.0 - value) * std::log1p(-value));
    case LinkKind::log:
      if (!(value > 0.0)) throw DomainError("log link': nonpositive argument");
      return 1.0 / value;
  }
  throw DomainError("link_deriv: unknown link");
}

std::vector<std::string> ModelSpec::coefficient_names() const {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p()));
  for (Eigen::Index j = 0; j < p1(); ++j) {
    const bool named = mean_names.size() == static_cast<std::size_t>(p1());
    names.push_back("mean:" + (named ? mean_names[j] : "x" + std::to_string(j + 1)));
  }
  for (Eigen::Index j = 0; j < p2(); ++j) {
    const bool named = precision_names.size() == static_cast<std::size_t>(p2());
    names.push_back("precision:" + (named ? precision_names[j] : "z" + std::to_string(j + 1)));
  }
  return names;
}

void validate(const ModelSpec& spec) {
  const Eigen::Index n = spec.n();
  if (n == 0) throw InputError("model has no observations");
  if (spec.X.rows() != n || spec.Z.rows() != n) {
    throw InputError("design matrices must have one row per response");
  }
  if (spec.p1() == 0 || spec.p2() == 0) {
    throw InputError("mean and precision submodels need at least one column each");
  }
  if (spec.p() >= n) throw InputError("p1 + p2 must be smaller than n");
  if (!is_mean_link(spec.mean_link)) throw InputError("mean link must map (0, 1) to the real line");
  if (spec.precision_link != LinkKind::log) throw InputError("precision link must be log");
  std::vector<std::size_t> bad;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(spec.y[i] > 0.0 && spec.y[i] < 1.0)) bad.push_back(static_cast<std::size_t>(i));
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "responses must lie strictly inside (0, 1); first offending row " << bad.front() + 1;
    throw InputError(os.str());
  }
  if (!spec.X.allFinite() || !spec.Z.allFinite()) throw InputError("design contains non-finite values");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qx(spec.X);
  if (qx.rank() < spec.p1()) throw InputError("mean design X is not of full column rank");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qz(spec.Z);
  if (qz.rank() < spec.p2()) throw InputError("precision design Z is not of full column rank");
}

Eigen::VectorXd Theta::stacked() const {
  Eigen::VectorXd out(beta.size() + gamma.size());
  out << beta, gamma;
  return out;
}

Theta Theta::split(const Eigen::VectorXd& stacked, Eigen::Index p1) {
  return {stacked.head(p1), stacked.tail(stacked.size() - p1)};
}

LinkLevel predict_link_level(const ModelSpec& spec, const Eigen::VectorXd& stacked) {
  if (stacked.size() != spec.p()) throw InputError("parameter vector has the wrong length");
  const Eigen::VectorXd eta_mu = spec.X * stacked.head(spec.p1());
  const Eigen::VectorXd eta_phi = spec.Z * stacked.tail(spec.p2());
  if (spec.Z.rows() != spec.X.rows()) throw InputError("mean and precision designs differ in row count");
  const Eigen::Index rows = spec.X.rows();
  LinkLevel out{Eigen::VectorXd(rows), Eigen::VectorXd(rows)};
  for (Eigen::Index i = 0; i < rows; ++i) {
    out.mu[i] = std::clamp(link_inverse(spec.mean_link, eta_mu[i]), kMeanFloor, 1.0 - kMeanFloor);
    out.phi[i] = std::clamp(link_inverse(spec.precision_link, eta_phi[i]), kPrecisionFloor,
                            kPrecisionCeiling);
  }
  return out;
}

LinkLevel predict_link_level(const ModelSpec& spec, const Theta& theta) {
  return predict_link_level(spec, theta.stacked());
}

std::optional<MeanPrecision> q_transform(double mu, double phi, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("q_transform: alpha must be positive");
  if (alpha == 1.0) return MeanPrecision{mu, phi};
  const double phi_a = alpha * (phi - 2.0) + 2.0;
  if (!(phi_a > 0.0)) return std::nullopt;
  const double mu_a = (alpha * (mu * phi - 1.0) + 1.0) / phi_a;
  if (!(mu_a > 0.0 && mu_a < 1.0)) return std::nullopt;
  return MeanPrecision{mu_a, phi_a};
}

ParamTriple param_triple(double mu, double phi, double q) {
  ParamTriple out{{mu, phi}, {mu, phi}, {mu, phi}, true};
  const auto working = q_transform(mu, phi, 1.0 / q);
  if (!working) {
    out.valid = false;
    return out;
  }
  out.working = *working;
  const auto shifted = q_transform(working->mu, working->phi, 2.0 - q);
  if (!shifted) {
    out.valid = false;
    return out;
  }
  out.shifted = *shifted;
  return out;
}

std::string_view to_string(Validity v) noexcept {
  switch (v) {
    case Validity::ok: return "ok";
    case Validity::smle_infeasible: return "smle_infeasible";
    case Validity::covariance_infeasible: return "covariance_infeasible";
  }
  return "unknown";
}

Validity validity_check(double mu, double phi, double q) {
  const double a = mu * phi;
  const double b = (1.0 - mu) * phi;
  const double smle_bound = 1.0 - q;
  if (a <= smle_bound || b <= smle_bound) return Validity::smle_infeasible;
  const double cov_bound = 2.0 * (1.0 - q) / (2.0 - q);
  if (a <= cov_bound || b <= cov_bound) return Validity::covariance_infeasible;
  return Validity::ok;
}

}  // namespace betarobust
