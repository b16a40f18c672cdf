#include "betarobust/simulation.hpp"

#include "betarobust/error.hpp"
#include "betarobust/inference.hpp"
#include "betarobust/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace betarobust {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int count_for(double fraction, Eigen::Index n) {
  if (fraction <= 0.0) return 0;
  return static_cast<int>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string_view to_string(ContaminationRule rule) noexcept {
  switch (rule) {
    case ContaminationRule::none: return "none";
    case ContaminationRule::shift_smallest: return "shift_smallest";
    case ContaminationRule::flip_extremes: return "flip_extremes";
  }
  return "none";
}

ContaminationRule parse_contamination_rule(std::string_view name) {
  if (name == "none") return ContaminationRule::none;
  if (name == "shift_smallest") return ContaminationRule::shift_smallest;
  if (name == "flip_extremes") return ContaminationRule::flip_extremes;
  throw InputError("unknown contamination rule '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const {
  if (beta.size() < 1 || gamma.size() < 1) throw InputError("scenario needs at least one beta and one gamma");
  if (n_base < 2 || replication_factor < 1) throw InputError("scenario sample size must be positive");
  if (!(contamination >= 0.0 && contamination < 0.5)) throw InputError("contamination fraction must lie in [0, 0.5)");
  if (contamination > 0.0 && rule == ContaminationRule::none) {
    throw InputError("positive contamination needs a contamination rule");
  }
  if (!(a1 > 0.0 && a2 > 0.0)) throw InputError("odds multipliers must be positive");
  if (!is_mean_link(mean_link) || precision_link != LinkKind::log) throw InputError("unsupported link choice");
  if (replications < 1) throw InputError("replications must be positive");
  if (beta.size() + gamma.size() >= n()) throw InputError("too many coefficients for the sample size");
}

ScenarioConfig scenario_preset(int id, int n, double contamination, std::uint64_t seed) {
  if (n < 40 || n % 40 != 0) throw InputError("scenario sample size must be a positive multiple of 40");
  ScenarioConfig c;
  c.scenario = id;
  c.n_base = 40;
  c.replication_factor = n / 40;
  c.contamination = contamination;
  c.seed = seed;
  if (id == 1) {
    c.beta = Eigen::Vector2d(-1.8, -2.0);
    c.gamma = Eigen::VectorXd::Constant(1, 4.5);
    c.rule = contamination > 0.0 ? ContaminationRule::shift_smallest : ContaminationRule::none;
  } else if (id == 2) {
    c.beta = Eigen::Vector3d(0.8, -1.2, -1.2);
    c.gamma = Eigen::Vector3d(3.8, 0.7, 0.7);
    c.rule = contamination > 0.0 ? ContaminationRule::flip_extremes : ContaminationRule::none;
  } else {
    throw InputError("built-in scenarios are 1 and 2");
  }
  return c;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioConfig c;
    if (j.contains("scenario") && !j.contains("beta")) {
      const int n = j.value("n", 40);
      c = scenario_preset(j.at("scenario").get<int>(), n, j.value("contamination", 0.0),
                          j.value("seed", std::uint64_t{1}));
    } else {
      c.scenario = j.value("scenario", 0);
      c.beta = to_vector(j.at("beta").get<std::vector<double>>());
      c.gamma = to_vector(j.at("gamma").get<std::vector<double>>());
      c.n_base = j.value("n_base", 40);
      c.replication_factor = j.value("replication_factor", 1);
      c.contamination = j.value("contamination", 0.0);
      c.rule = parse_contamination_rule(j.value("rule", std::string("none")));
      c.seed = j.value("seed", std::uint64_t{1});
    }
    c.a1 = j.value("a1", c.a1);
    c.a2 = j.value("a2", c.a2);
    c.mean_link = parse_link(j.value("mean_link", std::string(to_string(c.mean_link))));
    c.precision_link = parse_link(j.value("precision_link", std::string(to_string(c.precision_link))));
    c.replications = j.value("replications", c.replications);
    c.design_seed = j.value("design_seed", c.design_seed);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("scenario config: ") + e.what());
  }
}

nlohmann::json scenario_to_json(const ScenarioConfig& c) {
  return {{"scenario", c.scenario},
          {"beta", to_std(c.beta)},
          {"gamma", to_std(c.gamma)},
          {"n_base", c.n_base},
          {"replication_factor", c.replication_factor},
          {"n", c.n()},
          {"contamination", c.contamination},
          {"rule", std::string(to_string(c.rule))},
          {"a1", c.a1},
          {"a2", c.a2},
          {"mean_link", std::string(to_string(c.mean_link))},
          {"precision_link", std::string(to_string(c.precision_link))},
          {"replications", c.replications},
          {"seed", c.seed},
          {"design_seed", c.design_seed}};
}

ModelSpec scenario_design(const ScenarioConfig& config) {
  config.validate();
  const Eigen::Index p1 = config.beta.size();
  const Eigen::Index p2 = config.gamma.size();
  const Eigen::Index k = std::max(p1, p2) - 1;
  Rng rng = substream(config.design_seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd base(config.n_base, k);
  for (Eigen::Index i = 0; i < config.n_base; ++i) {
    for (Eigen::Index c = 0; c < k; ++c) base(i, c) = unif(rng);
  }
  const Eigen::Index n = config.n();
  ModelSpec spec;
  spec.y = Eigen::VectorXd::Constant(n, 0.5);
  spec.X.resize(n, p1);
  spec.Z.resize(n, p2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index b = i % config.n_base;
    spec.X(i, 0) = 1.0;
    spec.Z(i, 0) = 1.0;
    for (Eigen::Index c = 1; c < p1; ++c) spec.X(i, c) = base(b, c - 1);
    for (Eigen::Index c = 1; c < p2; ++c) spec.Z(i, c) = base(b, c - 1);
  }
  spec.mean_link = config.mean_link;
  spec.precision_link = config.precision_link;
  return spec;
}

std::vector<Eigen::Index> contaminated_rows(const ScenarioConfig& config, const Eigen::VectorXd& mu) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(mu.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return mu[a] < mu[b]; });
  std::vector<Eigen::Index> rows;
  if (config.rule == ContaminationRule::shift_smallest) {
    const int k = count_for(config.contamination, mu.size());
    rows.assign(order.begin(), order.begin() + k);
  } else if (config.rule == ContaminationRule::flip_extremes) {
    const int k = count_for(config.contamination / 2.0, mu.size());
    rows.assign(order.begin(), order.begin() + k);
    rows.insert(rows.end(), order.end() - k, order.end());
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

ScenarioData generate_scenario(const ScenarioConfig& config, Rng& rng) {
  ScenarioData out{scenario_design(config), {}};
  const LinkLevel ll = predict_link_level(out.clean, config.theta());
  for (Eigen::Index i = 0; i < out.clean.n(); ++i) out.clean.y[i] = sample_beta(ll.mu[i], ll.phi[i], rng);
  out.contaminated = out.clean;
  if (config.contamination <= 0.0) return out;

  const std::vector<Eigen::Index> rows = contaminated_rows(config, ll.mu);
  const int k_low = count_for(config.contamination / 2.0, ll.mu.size());
  double mu_lowest_cut = std::numeric_limits<double>::infinity();
  if (config.rule == ContaminationRule::flip_extremes) {
    std::vector<double> sorted = to_std(ll.mu);
    std::sort(sorted.begin(), sorted.end());
    mu_lowest_cut = sorted[static_cast<std::size_t>(k_low - 1)];
  }
  for (Eigen::Index i : rows) {
    const double mu = ll.mu[i];
    double mu_new = mu;
    if (config.rule == ContaminationRule::shift_smallest) {
      mu_new = (1.0 + mu) / 2.0;
    } else {
      const double odds = mu / (1.0 - mu);
      const double a = mu <= mu_lowest_cut ? config.a2 : config.a1;
      mu_new = a * odds / (1.0 + a * odds);
    }
    out.contaminated.y[i] = sample_beta(mu_new, ll.phi[i], rng);
  }
  return out;
}

double relative_efficiency(const Theta& theta, const ModelSpec& spec, double q, EstimatorKind::Family family) {
  const Eigen::MatrixXd v1 = covariance_matrix(spec, theta, EstimatorKind::mle());
  if (q == 1.0) return 1.0;
  const Eigen::MatrixXd vq = covariance_matrix(spec, theta, EstimatorKind{family, q});
  return v1.trace() / vq.trace();
}

MCResult run_study(const ScenarioConfig& config, const StudyOptions& options) {
  config.validate();
  options.tuning.validate();
  if (options.families.empty()) throw InputError("study needs at least one estimator");
  const std::size_t n_fam = options.families.size();
  const auto reps = static_cast<std::size_t>(config.replications);
  const Eigen::VectorXd truth = config.theta().stacked();
  const Eigen::Index p = truth.size();

  MCResult result;
  result.config = config;
  result.coefficient_names = scenario_design(config).coefficient_names();
  result.records.resize(reps * n_fam);

  FitOptions fit_options;
  parallel_for(reps, options.threads, [&](std::size_t r) {
    Rng rng = substream(config.seed, r);
    const ScenarioData data = generate_scenario(config, rng);
    const ModelSpec& spec = config.contamination > 0.0 ? data.contaminated : data.clean;
    for (std::size_t f = 0; f < n_fam; ++f) {
      ReplicationRecord& rec = result.records[r * n_fam + f];
      rec.replication = static_cast<int>(r);
      rec.family = options.families[f];
      try {
        FitResult fitted;
        if (rec.family == EstimatorKind::Family::mle) {
          fitted = fit(spec, EstimatorKind::mle(), std::nullopt, fit_options);
        } else if (options.fixed_q) {
          fitted = fit(spec, EstimatorKind{rec.family, *options.fixed_q}, std::nullopt, fit_options);
        } else {
          fitted = select_q(spec, rec.family, options.tuning, fit_options).fit;
        }
        rec.q = fitted.q_used;
        rec.estimates = fitted.estimates();
        rec.std_errors = fitted.std_errors;
        rec.rejected.assign(static_cast<std::size_t>(p), -1);
        for (Eigen::Index j = 0; j < p; ++j) {
          try {
            rec.rejected[static_cast<std::size_t>(j)] =
                wald_test(fitted, j, truth[j]).p_asymptotic < options.level ? 1 : 0;
          } catch (const Error&) {
          }
        }
        rec.ok = rec.estimates.allFinite();
      } catch (const Error&) {
        rec.ok = false;
      }
    }
  });

  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t f = 0; f < n_fam; ++f) {
      if (!result.records[r * n_fam + f].ok) {
        ++result.failed_replications;
        break;
      }
    }
  }
  if (result.failed_replications * 10 > config.replications) {
    std::ostringstream os;
    os << "study aborted: " << result.failed_replications << " of " << config.replications << " replications failed";
    throw Error(ErrorCategory::convergence, os.str());
  }

  for (std::size_t f = 0; f < n_fam; ++f) {
    EstimatorSummary s;
    s.family = options.families[f];
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd rejections = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd tested = Eigen::VectorXd::Zero(p);
    for (std::size_t r = 0; r < reps; ++r) {
      const ReplicationRecord& rec = result.records[r * n_fam + f];
      if (!rec.ok) {
        ++s.failures;
        continue;
      }
      ++s.successes;
      sq += (rec.estimates - truth).array().square().matrix();
      s.q_selected.push_back(rec.q);
      for (Eigen::Index j = 0; j < p; ++j) {
        const int flag = rec.rejected[static_cast<std::size_t>(j)];
        if (flag < 0) continue;
        tested[j] += 1.0;
        rejections[j] += flag;
      }
    }
    s.tmse = s.successes > 0 ? sq.sum() / s.successes : kNaN;
    s.rejection_rate.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) s.rejection_rate[j] = tested[j] > 0 ? rejections[j] / tested[j] : kNaN;
    s.median_q = median_of(s.q_selected);
    result.summaries.push_back(std::move(s));
  }
  return result;
}

double tmse_ratio(const MCResult& result, EstimatorKind::Family numerator, EstimatorKind::Family denominator) {
  const EstimatorSummary* num = nullptr;
  const EstimatorSummary* den = nullptr;
  for (const auto& s : result.summaries) {
    if (s.family == numerator) num = &s;
    if (s.family == denominator) den = &s;
  }
  if (!num || !den) throw InputError("estimator missing from the study");
  return num->tmse / den->tmse;
}

void write_replications_csv(std::ostream& out, const MCResult& result) {
  out << "replication,estimator,ok,q";
  for (const auto& name : result.coefficient_names) out << ",est:" << name;
  for (const auto& name : result.coefficient_names) out << ",se:" << name;
  for (const auto& name : result.coefficient_names) out << ",reject:" << name;
  out << '\n' << std::setprecision(17);
  const auto p = result.coefficient_names.size();
  for (const auto& rec : result.records) {
    out << rec.replication << ',' << to_string(rec.family) << ',' << (rec.ok ? 1 : 0) << ',' << rec.q;
    for (std::size_t j = 0; j < p; ++j) {
      out << ',';
      if (rec.ok) out << rec.estimates[static_cast<Eigen::Index>(j)];
    }
    for (std::size_t j = 0; j < p; ++j) {
      out << ',';
      if (rec.ok && rec.std_errors.size() == static_cast<Eigen::Index>(p)) {
        out << rec.std_errors[static_cast<Eigen::Index>(j)];
      }
    }
    for (std::size_t j = 0; j < p; ++j) {
      out << ',';
      if (rec.ok && rec.rejected[j] >= 0) out << rec.rejected[j];
    }
    out << '\n';
  }
}

nlohmann::json study_to_json(const MCResult& result) {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json estimators = nlohmann::json::array();
  for (const auto& s : result.summaries) {
    nlohmann::json rates = nlohmann::json::array();
    for (Eigen::Index j = 0; j < s.rejection_rate.size(); ++j) rates.push_back(finite_or_null(s.rejection_rate[j]));
    estimators.push_back({{"estimator", std::string(to_string(s.family))},
                          {"successes", s.successes},
                          {"failures", s.failures},
                          {"tmse", finite_or_null(s.tmse)},
                          {"rejection_rate", rates},
                          {"median_q", finite_or_null(s.median_q)},
                          {"q_selected", s.q_selected}});
  }
  nlohmann::json ratios = nlohmann::json::object();
  for (const auto& a : result.summaries) {
    for (const auto& b : result.summaries) {
      if (a.family == b.family) continue;
      ratios[std::string(to_string(a.family)) + "/" + std::string(to_string(b.family))] =
          finite_or_null(a.tmse / b.tmse);
    }
  }
  return {{"config", scenario_to_json(result.config)},
          {"coefficients", result.coefficient_names},
          {"failed_replications", result.failed_replications},
          {"estimators", estimators},
          {"tmse_ratios", ratios},
          {"seed", result.config.seed}};
}

}  // namespace betarobust
