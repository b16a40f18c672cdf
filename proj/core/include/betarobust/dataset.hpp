#pragma once

#include "betarobust/model.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace betarobust {

/// Column-named table of reals parsed from CSV with a header row.
struct Dataset {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t n() const noexcept { return rows.size(); }
  /// Index of a column; throws InputError when absent.
  std::size_t column(const std::string& name) const;
};

/// RFC 4180 parsing (quoted fields, doubled quotes, CRLF). Cells must be
/// numeric; errors report the 1-based data row and the column name.
Dataset parse_csv(std::istream& in, const std::string& source = "<stream>");
Dataset read_csv(const std::string& path);

/// Builds a model with intercepts prepended to X and Z. Responses equal to 0
/// or 1 are moved to eps or 1 - eps when `clamp_eps` is set and rejected
/// otherwise.
ModelSpec to_model(const Dataset& data, const std::string& response, const std::vector<std::string>& mean_cols,
                   const std::vector<std::string>& precision_cols, std::optional<double> clamp_eps = std::nullopt);

ModelSpec load_csv(const std::string& path, const std::string& response, const std::vector<std::string>& mean_cols,
                   const std::vector<std::string>& precision_cols, std::optional<double> clamp_eps = std::nullopt);

}  // namespace betarobust
