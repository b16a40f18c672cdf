#include "betarobust/serialization.hpp"

#include "betarobust/error.hpp"

#include <cmath>
#include <limits>

namespace betarobust {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
  return out;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = read_number(j[i]);
  return v;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) m.row(r) = vector_from(j[static_cast<std::size_t>(r)]).transpose();
  return m;
}

json doubles_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

std::vector<double> doubles_from(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(read_number(x));
  return v;
}

}  // namespace

json tuning_to_json(const TuningTrace& trace) {
  json grids = json::array();
  for (const auto& g : trace.grids) {
    grids.push_back({{"q", doubles_json(g.q)}, {"sqv", doubles_json(g.sqv)}, {"stable", g.stable}});
  }
  json z = json::array();
  for (const auto& v : trace.z) z.push_back(vector_json(v));
  return {{"visited_q", doubles_json(trace.visited_q)},
          {"z", z},
          {"grids", grids},
          {"q_star", trace.q_star},
          {"fallback_to_mle", trace.fallback_to_mle},
          {"sqv_per_grid", trace.sqv_per_grid}};
}

TuningTrace tuning_from_json(const json& j) {
  TuningTrace t;
  t.visited_q = doubles_from(j.at("visited_q"));
  for (const auto& v : j.at("z")) t.z.push_back(vector_from(v));
  for (const auto& g : j.at("grids")) {
    t.grids.push_back({doubles_from(g.at("q")), doubles_from(g.at("sqv")), g.at("stable").get<bool>()});
  }
  t.q_star = j.at("q_star").get<double>();
  t.fallback_to_mle = j.at("fallback_to_mle").get<bool>();
  t.sqv_per_grid = j.at("sqv_per_grid").get<int>();
  return t;
}

json fit_to_json(const FitReport& report) {
  const FitResult& f = report.fit;
  const Eigen::VectorXd est = f.estimates();
  json coefficients = json::array();
  for (Eigen::Index j = 0; j < est.size(); ++j) {
    const double se = f.std_errors.size() == est.size() ? f.std_errors[j] : kNaN;
    const double z = est[j] / se;
    json c = {{"name", j < static_cast<Eigen::Index>(report.coefficient_names.size())
                           ? report.coefficient_names[static_cast<std::size_t>(j)]
                           : "theta" + std::to_string(j + 1)},
              {"estimate", est[j]},
              {"std_error", number(se)},
              {"z", number(z)},
              {"p_asymptotic", number(std::isfinite(z) ? std::erfc(std::abs(z) / std::sqrt(2.0)) : kNaN)}};
    if (static_cast<std::size_t>(j) < report.bootstrap_p.size() && report.bootstrap_p[static_cast<std::size_t>(j)]) {
      c["p_bootstrap"] = *report.bootstrap_p[static_cast<std::size_t>(j)];
    }
    coefficients.push_back(std::move(c));
  }
  json out = {{"estimator", std::string(to_string(f.estimator.family))},
              {"q", f.q_used},
              {"coefficients", coefficients},
              {"covariance", matrix_json(f.covariance)},
              {"weights", vector_json(f.weights)},
              {"raw_weights", vector_json(f.raw_weights)},
              {"converged", f.converged},
              {"iterations", f.iterations},
              {"objective", number(f.objective_value)},
              {"links", {{"mean", std::string(to_string(report.mean_link))},
                         {"precision", std::string(to_string(report.precision_link))}}},
              {"p1", report.p1},
              {"n", report.n}};
  out["seed"] = report.seed ? json(*report.seed) : json(nullptr);
  if (report.tuning) out["tuning_trace"] = tuning_to_json(*report.tuning);
  return out;
}

FitReport fit_from_json(const json& j) {
  try {
    FitReport r;
    FitResult& f = r.fit;
    f.estimator.family = parse_family(j.at("estimator").get<std::string>());
    f.q_used = j.at("q").get<double>();
    f.estimator.q = f.q_used;
    r.p1 = j.at("p1").get<Eigen::Index>();
    r.n = j.at("n").get<Eigen::Index>();
    const json& coefs = j.at("coefficients");
    Eigen::VectorXd est(static_cast<Eigen::Index>(coefs.size()));
    f.std_errors.resize(est.size());
    for (std::size_t k = 0; k < coefs.size(); ++k) {
      r.coefficient_names.push_back(coefs[k].at("name").get<std::string>());
      est[static_cast<Eigen::Index>(k)] = coefs[k].at("estimate").get<double>();
      f.std_errors[static_cast<Eigen::Index>(k)] = read_number(coefs[k].at("std_error"));
      r.bootstrap_p.push_back(coefs[k].contains("p_bootstrap")
                                  ? std::optional<double>(coefs[k]["p_bootstrap"].get<double>())
                                  : std::nullopt);
    }
    if (r.p1 < 1 || r.p1 >= est.size()) throw InputError("fit json: p1 inconsistent with coefficients");
    f.theta_hat = Theta::split(est, r.p1);
    f.covariance = matrix_from(j.at("covariance"));
    f.weights = vector_from(j.at("weights"));
    f.raw_weights = vector_from(j.at("raw_weights"));
    f.converged = j.at("converged").get<bool>();
    f.iterations = j.at("iterations").get<int>();
    f.objective_value = read_number(j.at("objective"));
    r.mean_link = parse_link(j.at("links").at("mean").get<std::string>());
    r.precision_link = parse_link(j.at("links").at("precision").get<std::string>());
    if (!j.at("seed").is_null()) r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("tuning_trace")) r.tuning = tuning_from_json(j.at("tuning_trace"));
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("fit json: ") + e.what());
  }
}

}  // namespace betarobust
