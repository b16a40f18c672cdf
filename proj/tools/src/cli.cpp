#include "betarobust_cli/cli.hpp"

#include "betarobust/dataset.hpp"
#include "betarobust/diagnostics.hpp"
#include "betarobust/error.hpp"
#include "betarobust/estimation.hpp"
#include "betarobust/inference.hpp"
#include "betarobust/parallel.hpp"
#include "betarobust/serialization.hpp"
#include "betarobust/simulation.hpp"
#include "betarobust/tuning.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

namespace betarobust::cli {

namespace {

struct DataFlags {
  std::string path;
  std::string response;
  std::vector<std::string> mean_cols;
  std::vector<std::string> precision_cols;
  std::optional<double> clamp_eps;
  std::string mean_link = "logit";
};

struct EstimatorFlags {
  std::string family = "mle";
  std::string q = "1";
};

struct TuningFlags {
  TuningConfig config;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--data", d.path, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  cmd->add_option("--response", d.response, "response column, values in (0, 1)")->required();
  cmd->add_option("--mean-cols", d.mean_cols, "mean submodel covariates")->delimiter(',');
  cmd->add_option("--precision-cols", d.precision_cols, "precision submodel covariates")->delimiter(',');
  cmd->add_option("--clamp-eps", d.clamp_eps, "move responses equal to 0 or 1 to eps or 1 - eps");
  cmd->add_option("--mean-link", d.mean_link, "logit, probit or cloglog");
}

void add_estimator_flags(CLI::App* cmd, EstimatorFlags& e) {
  cmd->add_option("--estimator", e.family, "mle, smle or mdpde")
      ->check(CLI::IsMember({"mle", "smle", "mdpde"}));
  cmd->add_option("--q", e.q, "tuning constant in (0, 1] or 'auto'");
}

void add_tuning_flags(CLI::App* cmd, TuningFlags& t) {
  cmd->add_option("--grid-spacing", t.config.grid_spacing, "q grid spacing");
  cmd->add_option("--grid-size", t.config.m, "SQV comparisons per grid");
  cmd->add_option("--q-min", t.config.q_min, "smallest q examined");
  cmd->add_option("--threshold", t.config.threshold, "SQV stability threshold");
}

ModelSpec load(const DataFlags& d) {
  ModelSpec spec = load_csv(d.path, d.response, d.mean_cols, d.precision_cols, d.clamp_eps);
  spec.mean_link = parse_link(d.mean_link);
  validate(spec);
  return spec;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed, std::ostream& err) {
  if (seed) return *seed;
  const std::uint64_t generated = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
  err << "seed: " << generated << '\n';
  return generated;
}

/// Writes text to `path`, or to `out` when the path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
  if (!f) throw InputError("failed writing '" + path + "'");
}

struct FittedModel {
  FitResult fit;
  std::optional<TuningTrace> trace;
};

FittedModel fit_model(const ModelSpec& spec, const EstimatorFlags& e, const TuningConfig& tuning) {
  const EstimatorKind::Family family = parse_family(e.family);
  if (e.q == "auto") {
    if (family == EstimatorKind::Family::mle) throw InputError("--q auto needs --estimator smle or mdpde");
    Selection s = select_q(spec, family, tuning);
    return {std::move(s.fit), std::move(s.trace)};
  }
  double q = 0.0;
  try {
    std::size_t used = 0;
    q = std::stod(e.q, &used);
    if (used != e.q.size()) throw std::invalid_argument(e.q);
  } catch (const std::exception&) {
    throw InputError("--q must be a number in (0, 1] or 'auto', got '" + e.q + "'");
  }
  if (!(q > 0.0 && q <= 1.0)) throw InputError("--q must lie in (0, 1]");
  if (family == EstimatorKind::Family::mle && q != 1.0) throw InputError("--estimator mle needs q = 1");
  return {fit(spec, EstimatorKind{family, q}), std::nullopt};
}

FitReport make_report(const ModelSpec& spec, FittedModel fitted, std::optional<std::uint64_t> seed) {
  FitReport r;
  r.fit = std::move(fitted.fit);
  r.coefficient_names = spec.coefficient_names();
  r.mean_link = spec.mean_link;
  r.precision_link = spec.precision_link;
  r.p1 = spec.p1();
  r.n = spec.n();
  r.seed = seed;
  r.tuning = std::move(fitted.trace);
  return r;
}

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::input: return kInput;
    case ErrorCategory::convergence: return kConvergence;
    case ErrorCategory::domain:
    case ErrorCategory::infeasible:
    case ErrorCategory::numerical: return kNumerical;
  }
  return kUnexpected;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust beta regression: fit, tune, diagnose, simulate"};
  app.name("betarobust");
  app.require_subcommand(1);
  unsigned threads = default_thread_count();
  app.add_option("--threads", threads, "worker threads (default: BETAROBUST_THREADS or all cores)");

  // fit
  DataFlags fit_data;
  EstimatorFlags fit_est;
  TuningFlags fit_tuning;
  std::optional<std::uint64_t> fit_seed;
  std::string fit_out;
  int bootstrap = 0;
  auto* fit_cmd = app.add_subcommand("fit", "fit a beta regression and write JSON");
  add_data_flags(fit_cmd, fit_data);
  add_estimator_flags(fit_cmd, fit_est);
  add_tuning_flags(fit_cmd, fit_tuning);
  fit_cmd->add_option("--seed", fit_seed, "seed for bootstrap replicates");
  fit_cmd->add_option("--out", fit_out, "output JSON file (default stdout)");
  fit_cmd->add_option("--bootstrap", bootstrap, "parametric bootstrap replicates per coefficient")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--threads", threads, "worker threads");

  // tune
  DataFlags tune_data;
  std::string tune_family = "smle";
  TuningFlags tune_tuning;
  std::string tune_out;
  auto* tune_cmd = app.add_subcommand("tune", "select q and write the selection trace as JSON");
  add_data_flags(tune_cmd, tune_data);
  tune_cmd->add_option("--estimator", tune_family, "smle or mdpde")->check(CLI::IsMember({"smle", "mdpde"}));
  add_tuning_flags(tune_cmd, tune_tuning);
  tune_cmd->add_option("--out", tune_out, "output JSON file (default stdout)");

  // diagnose
  DataFlags diag_data;
  EstimatorFlags diag_est;
  TuningFlags diag_tuning;
  std::string diag_fit;
  std::optional<std::uint64_t> diag_seed;
  std::string diag_out = "diagnostics";
  EnvelopeOptions envelope;
  auto* diag_cmd = app.add_subcommand("diagnose", "residuals, leverages, weights and simulated envelope CSVs");
  add_data_flags(diag_cmd, diag_data);
  add_estimator_flags(diag_cmd, diag_est);
  add_tuning_flags(diag_cmd, diag_tuning);
  diag_cmd->add_option("--fit", diag_fit, "reuse a fit JSON written by 'fit' instead of refitting")
      ->check(CLI::ExistingFile);
  diag_cmd->add_option("--seed", diag_seed, "seed for envelope simulations");
  diag_cmd->add_option("--sims", envelope.n_sims, "envelope simulations (>= 19)");
  diag_cmd->add_option("--band", envelope.band, "envelope coverage in (0, 1)");
  diag_cmd->add_option("--out", diag_out, "output prefix: <prefix>.envelope.csv and <prefix>.observations.csv");
  diag_cmd->add_option("--threads", threads, "worker threads");

  // simulate
  int scenario = 1;
  int sim_n = 40;
  std::optional<int> reps;
  double contaminate = 0.0;
  std::optional<std::uint64_t> sim_seed;
  std::string config_path;
  std::vector<std::string> sim_estimators{"mle", "smle", "mdpde"};
  std::string sim_q = "auto";
  TuningFlags sim_tuning;
  std::string sim_out = "study";
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study; writes per-replication CSV and summary JSON");
  sim_cmd->add_option("--scenario", scenario, "built-in scenario 1 or 2")->check(CLI::IsMember({1, 2}));
  sim_cmd->add_option("--n", sim_n, "sample size, a multiple of 40");
  sim_cmd->add_option("--reps", reps, "replications (default 200)");
  sim_cmd->add_option("--contaminate", contaminate, "contamination fraction");
  sim_cmd->add_option("--seed", sim_seed, "replication seed");
  sim_cmd->add_option("--config", config_path, "JSON scenario file (overrides --scenario/--n/--contaminate)")
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--estimators", sim_estimators, "estimators to run")->delimiter(',');
  sim_cmd->add_option("--q", sim_q, "fixed q for robust estimators or 'auto'");
  add_tuning_flags(sim_cmd, sim_tuning);
  sim_cmd->add_option("--out", sim_out, "output prefix: <prefix>.replications.csv and <prefix>.summary.json");
  sim_cmd->add_option("--threads", threads, "worker threads");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (threads == 0) threads = 1;
    if (*fit_cmd) {
      const ModelSpec spec = load(fit_data);
      FitReport report = make_report(spec, fit_model(spec, fit_est, fit_tuning.config), fit_seed);
      if (bootstrap > 0) {
        const std::uint64_t seed = resolve_seed(fit_seed, err);
        report.seed = seed;
        const EstimatorKind est = report.fit.estimator;
        for (Eigen::Index j = 0; j < spec.p(); ++j) {
          const BootstrapResult b = bootstrap_pvalue(spec, est, j, bootstrap, seed + static_cast<std::uint64_t>(j),
                                                     0.0, threads);
          report.bootstrap_p.push_back(b.p_value);
        }
      }
      emit(fit_out, fit_to_json(report).dump(2) + "\n", out);
    } else if (*tune_cmd) {
      const ModelSpec spec = load(tune_data);
      const Selection s = select_q(spec, parse_family(tune_family), tune_tuning.config);
      nlohmann::json j = tuning_to_json(s.trace);
      j["estimator"] = tune_family;
      emit(tune_out, j.dump(2) + "\n", out);
    } else if (*diag_cmd) {
      const ModelSpec spec = load(diag_data);
      FitResult fitted;
      if (!diag_fit.empty()) {
        std::ifstream in(diag_fit);
        nlohmann::json j;
        try {
          in >> j;
        } catch (const nlohmann::json::exception& e) {
          throw InputError("cannot parse '" + diag_fit + "': " + e.what());
        }
        FitReport r = fit_from_json(j);
        if (r.n != spec.n() || r.p1 != spec.p1() || r.fit.estimates().size() != spec.p()) {
          throw InputError("fit JSON does not match the data and column flags");
        }
        fitted = std::move(r.fit);
      } else {
        fitted = fit_model(spec, diag_est, diag_tuning.config).fit;
      }
      envelope.seed = resolve_seed(diag_seed, err);
      envelope.threads = threads;
      const DiagnosticsReport report = diagnose(spec, fitted, envelope);
      std::ostringstream env_csv, obs_csv;
      write_envelope_csv(env_csv, report.envelope);
      write_observation_csv(obs_csv, report);
      emit(diag_out + ".envelope.csv", env_csv.str(), out);
      emit(diag_out + ".observations.csv", obs_csv.str(), out);
    } else if (*sim_cmd) {
      ScenarioConfig config;
      const std::uint64_t seed = resolve_seed(sim_seed, err);
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        nlohmann::json j;
        try {
          in >> j;
        } catch (const nlohmann::json::exception& e) {
          throw InputError("cannot parse '" + config_path + "': " + e.what());
        }
        config = scenario_from_json(j);
        if (sim_seed) config.seed = seed;
      } else {
        config = scenario_preset(scenario, sim_n, contaminate, seed);
      }
      if (reps) config.replications = *reps;
      StudyOptions options;
      options.families.clear();
      for (const auto& e : sim_estimators) options.families.push_back(parse_family(e));
      options.tuning = sim_tuning.config;
      options.threads = threads;
      if (sim_q != "auto") {
        try {
          options.fixed_q = std::stod(sim_q);
        } catch (const std::exception&) {
          throw InputError("--q must be a number or 'auto'");
        }
      }
      const MCResult result = run_study(config, options);
      std::ostringstream csv;
      write_replications_csv(csv, result);
      emit(sim_out + ".replications.csv", csv.str(), out);
      emit(sim_out + ".summary.json", study_to_json(result).dump(2) + "\n", out);
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.category()) << "): " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    err << "error (unexpected): " << e.what() << '\n';
    return kUnexpected;
  }
  return kOk;
}

}  // namespace betarobust::cli
