#include "betarobust/tuning.hpp"

#include "betarobust/error.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace betarobust {

void TuningConfig::validate() const {
  if (!(grid_spacing > 0.0 && grid_spacing < 1.0)) throw InputError("grid spacing must lie in (0, 1)");
  if (m < 2) throw InputError("grid size m must be at least 2");
  if (!(q_min > 0.0 && q_min < 1.0)) throw InputError("q_min must lie in (0, 1)");
  if (!(threshold > 0.0)) throw InputError("SQV threshold must be positive");
}

Eigen::VectorXd standardized_vector(const FitResult& fit, Eigen::Index n) {
  const Eigen::VectorXd est = fit.estimates();
  if (fit.std_errors.size() != est.size()) throw NumericalError("standard errors unavailable");
  if (n < 1) throw InputError("sample size must be positive");
  const double root_n = std::sqrt(static_cast<double>(n));
  Eigen::VectorXd z(est.size());
  for (Eigen::Index j = 0; j < est.size(); ++j) {
    const double se = fit.std_errors[j];
    if (!(se > 0.0) || !std::isfinite(se)) throw NumericalError("zero or non-finite standard error");
    z[j] = est[j] / (root_n * se);
  }
  return z;
}

double sqv(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
  if (z1.size() != z2.size()) throw InputError("sqv: vectors differ in length");
  if (z1.size() == 0) return 0.0;
  return (z1 - z2).norm() / static_cast<double>(z1.size());
}

Selection select_q(const ModelSpec& spec, EstimatorKind::Family family, const TuningConfig& config,
                   const FitOptions& options) {
  config.validate();
  if (family == EstimatorKind::Family::mle) throw InputError("q selection needs the smle or mdpde family");

  // Grid points are indexed by step count and rounded to 1e-10 so that
  // repeated visits and printed values agree.
  auto q_at = [&](int k) { return std::round((1.0 - k * config.grid_spacing) * 1e10) / 1e10; };

  TuningTrace trace;
  trace.sqv_per_grid = config.m;

  struct Point {
    std::optional<FitResult> fit;
    Eigen::VectorXd z;
  };
  std::map<int, Point> cache;
  std::optional<Theta> warm;

  const FitResult mle = fit(spec, EstimatorKind::mle(), std::nullopt, options);
  warm = mle.theta_hat;

  auto point = [&](int k) -> const Point& {
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
    Point pt;
    const double q = q_at(k);
    try {
      FitResult f = k == 0 ? mle : fit(spec, EstimatorKind{family, q}, warm, options);
      pt.z = standardized_vector(f, spec.n());
      warm = f.theta_hat;
      pt.fit = std::move(f);
    } catch (const Error&) {
      pt.fit.reset();
      pt.z.resize(0);
    }
    trace.visited_q.push_back(q);
    trace.z.push_back(pt.z);
    return cache.emplace(k, std::move(pt)).first->second;
  };

  int start = 0;
  const double tol = 1e-12;
  while (true) {
    if (q_at(start + config.m) < config.q_min - tol) {
      trace.fallback_to_mle = true;
      trace.q_star = 1.0;
      return {1.0, std::move(trace), mle};
    }
    GridRecord grid;
    int lowest_violation = -1;
    for (int j = 0; j <= config.m; ++j) grid.q.push_back(q_at(start + j));
    for (int j = 0; j < config.m; ++j) {
      const Point& a = point(start + j);
      const Point& b = point(start + j + 1);
      double value = std::numeric_limits<double>::quiet_NaN();
      if (a.z.size() > 0 && b.z.size() > 0) value = sqv(a.z, b.z);
      grid.sqv.push_back(value);
      if (!(value < config.threshold)) lowest_violation = j;
    }
    grid.stable = lowest_violation < 0;
    trace.grids.push_back(grid);
    if (grid.stable) {
      const double q_star = q_at(start);
      trace.q_star = q_star;
      FitResult chosen = *cache.at(start).fit;
      return {q_star, std::move(trace), std::move(chosen)};
    }
    start += lowest_violation + 1;
  }
}

}  // namespace betarobust
