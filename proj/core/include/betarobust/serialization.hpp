#pragma once

#include "betarobust/estimation.hpp"
#include "betarobust/inference.hpp"
#include "betarobust/model.hpp"
#include "betarobust/tuning.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace betarobust {

/// Extra fields attached to a serialized fit.
struct FitReport {
  FitResult fit;
  std::vector<std::string> coefficient_names;
  LinkKind mean_link = LinkKind::logit;
  LinkKind precision_link = LinkKind::log;
  Eigen::Index p1 = 0;
  Eigen::Index n = 0;
  std::optional<std::uint64_t> seed;
  std::optional<TuningTrace> tuning;
  std::vector<std::optional<double>> bootstrap_p;  // per coefficient, empty when not computed
};

nlohmann::json tuning_to_json(const TuningTrace& trace);
TuningTrace tuning_from_json(const nlohmann::json& j);

/// Doubles are written in shortest round-trip form; NaN becomes null.
nlohmann::json fit_to_json(const FitReport& report);
FitReport fit_from_json(const nlohmann::json& j);

}  // namespace betarobust
