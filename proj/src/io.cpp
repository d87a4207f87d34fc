#include "grpsel/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace grpsel {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, const std::string& path, int row, std::size_t col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw std::invalid_argument(path + ": row " + std::to_string(row) + ", column " +
                                std::to_string(col + 1) + " is not a number: '" + cell + "'");
  return value;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  nlohmann::json parsed;
  try {
    in >> parsed;
  } catch (const nlohmann::json::parse_error& err) {
    throw std::invalid_argument(path + ": " + err.what());
  }
  return parsed;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  CsvTable table;
  table.header = split_line(line);
  if (table.header.empty()) throw std::invalid_argument(path + ": empty header row");

  std::vector<std::vector<double>> rows;
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != table.header.size())
      throw std::invalid_argument(path + ": row " + std::to_string(row_number) + " has " +
                                  std::to_string(cells.size()) + " cells, header has " +
                                  std::to_string(table.header.size()));
    std::vector<double> parsed(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      parsed[c] = parse_cell(cells[c], path, row_number, c);
    rows.push_back(std::move(parsed));
  }
  if (rows.empty()) throw std::invalid_argument(path + ": no data rows");

  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols())
    throw std::invalid_argument("write_csv: header width differs from value columns");
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c > 0) out << ',';
    out << header[c];
  }
  out << '\n';
  char buffer[64];
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c > 0) out << ',';
      std::snprintf(buffer, sizeof(buffer), "%.17g", values(r, c));
      out << buffer;
    }
    out << '\n';
  }
}

NamedGroups read_group_map(const std::string& path) {
  const nlohmann::json parsed = load_json(path);
  if (!parsed.is_object() || !parsed.contains("groups") || !parsed["groups"].is_array())
    throw std::invalid_argument(path + ": expected an object with a 'groups' array");

  NamedGroups out;
  std::vector<int> sizes;
  for (const auto& entry : parsed["groups"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry.contains("size"))
      throw std::invalid_argument(path + ": each group needs 'name' and 'size'");
    out.names.push_back(entry["name"].get<std::string>());
    const int size = entry["size"].get<int>();
    if (size < 1)
      throw std::invalid_argument(path + ": group '" + out.names.back() +
                                  "' has non-positive size");
    sizes.push_back(size);
  }
  if (sizes.empty()) throw std::invalid_argument(path + ": no groups listed");
  out.groups = GroupStructure(sizes);
  return out;
}

RegressionData load_regression_data(const std::string& csv_path, const std::string& groups_path) {
  CsvTable table = read_csv(csv_path);
  NamedGroups named = read_group_map(groups_path);

  const Eigen::Index predictors = table.values.cols() - 1;
  if (named.groups.total_dim() != predictors) {
    std::string detail;
    for (int k = 0; k < named.groups.num_groups(); ++k) {
      if (k > 0) detail += ", ";
      detail += named.names[static_cast<std::size_t>(k)] + ":" +
                std::to_string(named.groups.size(k));
    }
    throw std::invalid_argument("group map covers " + std::to_string(named.groups.total_dim()) +
                                " columns (" + detail + ") but " + csv_path + " provides " +
                                std::to_string(predictors) + " predictor columns");
  }

  RegressionData data{
      table.values.col(0),
      GroupedDesign(table.values.rightCols(predictors), named.groups),
      {table.header.begin() + 1, table.header.end()},
      std::move(named.names)};
  return data;
}

GroupedCoefficients read_coefficients(const std::string& path, const GroupStructure& groups) {
  const nlohmann::json parsed = load_json(path);
  if (!parsed.is_object() || !parsed.contains("values") || !parsed["values"].is_array())
    throw std::invalid_argument(path + ": expected an object with a 'values' array");
  const auto& values = parsed["values"];
  if (static_cast<int>(values.size()) != groups.total_dim())
    throw std::invalid_argument(path + ": " + std::to_string(values.size()) +
                                " values for " + std::to_string(groups.total_dim()) +
                                " predictor columns");
  GroupedCoefficients beta = GroupedCoefficients::zero(groups);
  for (int i = 0; i < groups.total_dim(); ++i)
    beta.values()[i] = values[static_cast<std::size_t>(i)].get<double>();
  return beta;
}

}  // namespace grpsel
