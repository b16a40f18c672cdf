#include "betarobust/dataset.hpp"

#include "betarobust/error.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

namespace betarobust {

namespace {

// Splits one logical record; quoted fields may span lines.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else if (c == '\n') {
      break;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw InputError("unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::size_t Dataset::column(const std::string& name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] == name) return j;
  }
  throw InputError("missing column '" + name + "'");
}

Dataset parse_csv(std::istream& in, const std::string& source) {
  Dataset data;
  std::vector<std::string> fields;
  if (!read_record(in, fields)) throw InputError(source + ": empty file, header row required");
  for (auto& f : fields) data.columns.push_back(trim(f));
  std::size_t row = 0;
  while (read_record(in, fields)) {
    ++row;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    if (fields.size() != data.columns.size()) {
      std::ostringstream os;
      os << source << ": row " << row << " has " << fields.size() << " fields, expected " << data.columns.size();
      throw InputError(os.str());
    }
    std::vector<double> values(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string cell = trim(fields[j]);
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(first, last, values[j]);
      if (cell.empty() || ec != std::errc() || ptr != last) {
        std::ostringstream os;
        os << source << ": non-numeric value '" << cell << "' at row " << row << ", column '" << data.columns[j]
           << "'";
        throw InputError(os.str());
      }
    }
    data.rows.push_back(std::move(values));
  }
  return data;
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

ModelSpec to_model(const Dataset& data, const std::string& response, const std::vector<std::string>& mean_cols,
                   const std::vector<std::string>& precision_cols, std::optional<double> clamp_eps) {
  if (clamp_eps && !(*clamp_eps > 0.0 && *clamp_eps < 0.5)) throw InputError("clamp eps must lie in (0, 0.5)");
  const std::size_t yj = data.column(response);
  std::vector<std::size_t> xj, zj;
  for (const auto& c : mean_cols) xj.push_back(data.column(c));
  for (const auto& c : precision_cols) zj.push_back(data.column(c));

  const auto n = static_cast<Eigen::Index>(data.n());
  ModelSpec spec;
  spec.y.resize(n);
  spec.X.resize(n, static_cast<Eigen::Index>(xj.size() + 1));
  spec.Z.resize(n, static_cast<Eigen::Index>(zj.size() + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = data.rows[static_cast<std::size_t>(i)];
    double y = row[yj];
    if ((y == 0.0 || y == 1.0) && clamp_eps) y = y == 0.0 ? *clamp_eps : 1.0 - *clamp_eps;
    if (!(y > 0.0 && y < 1.0)) {
      std::ostringstream os;
      os << "response '" << response << "' at row " << (i + 1) << " is " << row[yj]
         << "; values must lie in (0, 1) (use a clamp eps for exact 0 or 1)";
      throw InputError(os.str());
    }
    spec.y[i] = y;
    spec.X(i, 0) = 1.0;
    spec.Z(i, 0) = 1.0;
    for (std::size_t k = 0; k < xj.size(); ++k) spec.X(i, static_cast<Eigen::Index>(k + 1)) = row[xj[k]];
    for (std::size_t k = 0; k < zj.size(); ++k) spec.Z(i, static_cast<Eigen::Index>(k + 1)) = row[zj[k]];
  }
  spec.mean_names.push_back("(Intercept)");
  spec.mean_names.insert(spec.mean_names.end(), mean_cols.begin(), mean_cols.end());
  spec.precision_names.push_back("(Intercept)");
  spec.precision_names.insert(spec.precision_names.end(), precision_cols.begin(), precision_cols.end());
  validate(spec);
  return spec;
}

ModelSpec load_csv(const std::string& path, const std::string& response, const std::vector<std::string>& mean_cols,
                   const std::vector<std::string>& precision_cols, std::optional<double> clamp_eps) {
  return to_model(read_csv(path), response, mean_cols, precision_cols, clamp_eps);
}

}  // namespace betarobust
