#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grpsel/model.hpp"

namespace grpsel {

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

/// Comma-separated, one header row, '.' decimal. Ragged or non-numeric rows
/// are rejected.
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);

struct NamedGroups {
  std::vector<std::string> names;
  GroupStructure groups;
};

/// {"groups": [{"name": str, "size": int}, ...]}
NamedGroups read_group_map(const std::string& path);

/// Response in the first column, predictors in file order after it.
struct RegressionData {
  Eigen::VectorXd y;
  GroupedDesign design;
  std::vector<std::string> column_names;  // predictors only
  std::vector<std::string> group_names;
};

/// Joins a data file with its group map, checking that the groups tile the
/// predictor columns exactly.
RegressionData load_regression_data(const std::string& csv_path,
                                    const std::string& groups_path);

/// {"values": [...]} with one entry per predictor column.
GroupedCoefficients read_coefficients(const std::string& path, const GroupStructure& groups);

}  // namespace grpsel
