#pragma once

#include "betarobust/estimation.hpp"
#include "betarobust/model.hpp"
#include "betarobust/numeric.hpp"
#include "betarobust/tuning.hpp"

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace betarobust {

enum class ContaminationRule {
  none,
  /// Smallest-mean observations redrawn with mean (1 + mu) / 2.
  shift_smallest,
  /// Largest-mean observations redrawn with odds scaled by a1, smallest-mean
  /// observations with odds scaled by a2 (half the fraction each).
  flip_extremes,
};

std::string_view to_string(ContaminationRule rule) noexcept;
ContaminationRule parse_contamination_rule(std::string_view name);

struct ScenarioConfig {
  int scenario = 0;  // 1, 2 or 0 for user-defined
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  int n_base = 40;
  int replication_factor = 1;
  double contamination = 0.0;
  ContaminationRule rule = ContaminationRule::none;
  double a1 = 0.01;
  double a2 = 6.0;
  LinkKind mean_link = LinkKind::logit;
  LinkKind precision_link = LinkKind::log;
  int replications = 200;
  std::uint64_t seed = 1;
  std::uint64_t design_seed = 20240601;

  int n() const noexcept { return n_base * replication_factor; }
  Theta theta() const { return {beta, gamma}; }
  /// Throws InputError when inconsistent.
  void validate() const;
};

/// Presets for the two built-in scenarios. `n` must be a multiple of 40.
ScenarioConfig scenario_preset(int id, int n, double contamination, std::uint64_t seed);

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& config);

/// Covariates ~ U(0, 1) drawn once for n_base rows from design_seed and
/// block-replicated. X = [1, x_1..x_{p1-1}], Z = [1, x_1..x_{p2-1}].
/// Responses are left at 0.5.
ModelSpec scenario_design(const ScenarioConfig& config);

/// Rows replaced under the contamination rule, ascending.
std::vector<Eigen::Index> contaminated_rows(const ScenarioConfig& config, const Eigen::VectorXd& mu);

struct ScenarioData {
  ModelSpec clean;
  ModelSpec contaminated;
};

ScenarioData generate_scenario(const ScenarioConfig& config, Rng& rng);

struct StudyOptions {
  std::vector<EstimatorKind::Family> families{EstimatorKind::Family::mle, EstimatorKind::Family::smle,
                                              EstimatorKind::Family::mdpde};
  TuningConfig tuning;
  /// Fixed q for the robust estimators instead of running the selector.
  std::optional<double> fixed_q;
  double level = 0.05;
  unsigned threads = 1;
};

struct ReplicationRecord {
  int replication = 0;
  EstimatorKind::Family family = EstimatorKind::Family::mle;
  bool ok = false;
  double q = 1.0;
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  std::vector<int> rejected;  // per coefficient: 1, 0, or -1 when the Wald test was unavailable
};

struct EstimatorSummary {
  EstimatorKind::Family family = EstimatorKind::Family::mle;
  int successes = 0;
  int failures = 0;
  double tmse = 0.0;
  Eigen::VectorXd rejection_rate;  // NaN where no test was available
  std::vector<double> q_selected;
  double median_q = 1.0;
};

struct MCResult {
  ScenarioConfig config;
  std::vector<std::string> coefficient_names;
  std::vector<ReplicationRecord> records;  // replication-major, families in option order
  std::vector<EstimatorSummary> summaries;
  int failed_replications = 0;
};

/// Monte Carlo study. Replication r draws from substream (seed, r); data are
/// contaminated when the configured fraction is positive. Throws when more
/// than 10% of replications fail.
MCResult run_study(const ScenarioConfig& config, const StudyOptions& options = {});

/// tr(K_1^-1) / tr(V_q) at theta on the design of `spec`.
double relative_efficiency(const Theta& theta, const ModelSpec& spec, double q,
                           EstimatorKind::Family family = EstimatorKind::Family::smle);

double tmse_ratio(const MCResult& result, EstimatorKind::Family numerator, EstimatorKind::Family denominator);

void write_replications_csv(std::ostream& out, const MCResult& result);
nlohmann::json study_to_json(const MCResult& result);

}  // namespace betarobust
