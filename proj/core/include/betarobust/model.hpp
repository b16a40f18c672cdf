#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace betarobust {

enum class LinkKind { logit, probit, cloglog, log };

std::string_view to_string(LinkKind link) noexcept;
LinkKind parse_link(std::string_view name);

/// True for links mapping (0, 1) onto the real line.
bool is_mean_link(LinkKind link) noexcept;

double link_eval(LinkKind link, double value);
double link_inverse(LinkKind link, double eta);
/// g'(value).
double link_deriv(LinkKind link, double value);

// Saturation bounds applied by predict_link_level.
inline constexpr double kMeanFloor = 1e-12;
inline constexpr double kPrecisionFloor = 1e-12;
inline constexpr double kPrecisionCeiling = 1e12;

/// Beta regression design: responses in (0, 1), mean design X (n x p1) and
/// precision design Z (n x p2).
struct ModelSpec {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  Eigen::MatrixXd Z;
  LinkKind mean_link = LinkKind::logit;
  LinkKind precision_link = LinkKind::log;
  std::vector<std::string> mean_names;       // optional, size p1 when set
  std::vector<std::string> precision_names;  // optional, size p2 when set

  Eigen::Index n() const noexcept { return y.size(); }
  Eigen::Index p1() const noexcept { return X.cols(); }
  Eigen::Index p2() const noexcept { return Z.cols(); }
  Eigen::Index p() const noexcept { return X.cols() + Z.cols(); }

  /// Coefficient labels, "mean:<name>" then "precision:<name>".
  std::vector<std::string> coefficient_names() const;
};

/// Throws InputError unless the model satisfies its invariants (responses
/// strictly inside (0, 1), full column rank designs, p1 + p2 < n, matching
/// row counts, mean/precision link domains).
void validate(const ModelSpec& spec);

/// Regression coefficients for the mean (beta) and precision (gamma) submodels.
struct Theta {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;

  Eigen::VectorXd stacked() const;
  static Theta split(const Eigen::VectorXd& stacked, Eigen::Index p1);
};

struct MeanPrecision {
  double mu;
  double phi;
};

struct LinkLevel {
  Eigen::VectorXd mu;
  Eigen::VectorXd phi;
};

LinkLevel predict_link_level(const ModelSpec& spec, const Theta& theta);
LinkLevel predict_link_level(const ModelSpec& spec, const Eigen::VectorXd& stacked);

/// Power-transform map: phi_a = a(phi - 2) + 2, mu_a = [a(mu phi - 1) + 1] / phi_a.
/// Empty when the result leaves mu in (0, 1), phi > 0.
std::optional<MeanPrecision> q_transform(double mu, double phi, double alpha);

/// Link-level parameters, the working parameters T_{1/q}(link-level) that
/// index the density evaluated by the surrogate likelihood, and the shifted
/// parameters T_{2-q}(working) that appear in its second-moment matrix.
struct ParamTriple {
  MeanPrecision link_level;
  MeanPrecision working;
  MeanPrecision shifted;
  bool valid;
};

ParamTriple param_triple(double mu, double phi, double q);

enum class Validity { ok, smle_infeasible, covariance_infeasible };

std::string_view to_string(Validity v) noexcept;

Validity validity_check(double mu, double phi, double q);

}  // namespace betarobust
