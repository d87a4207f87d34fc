#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace grpsel {

/// Every option the command line accepts, with its default. A config file
/// may set any subset; flags given on the command line win over the file.
struct RunConfig {
  std::string command;

  // simulate
  int example = 1;
  int replications = 400;
  std::string method = "both";  // both | group_lasso | adaptive

  std::uint64_t seed = 1;

  // data-driven commands
  std::string data_path;
  std::string groups_path;
  std::string beta_path;
  std::string lambda_mode = "auto";  // auto | fixed
  double lambda = 0.0;

  // diagnose
  std::vector<int> small_groups;  // empty: exact zeros of the reference beta
  double sigma = 1.0;
  double c0 = 0.0;
  double a_n = 0.0;
  int q_star = 0;                      // 0: derived from the profile
  std::string src_mode = "exhaustive";  // exhaustive | sampled
  int src_samples = 2000;
  double lambda_tilde = 0.0;  // 0: same as lambda
  double r_n = 0.0;           // 0: the zero-consistency rate

  // tuning shared across commands
  int grid_points = 100;
  double grid_decade = 1e-3;
  std::string df_rule = "coefficient_count";  // coefficient_count | yuan_lin
  double kkt_tol = 1e-6;
  int max_iters = 10000;
  double objective_tol = 1e-10;

  // outputs
  std::string out_path;
  std::string table_path;
  std::string csv_path;

  bool operator==(const RunConfig&) const = default;
};

void to_json(nlohmann::json& j, const RunConfig& config);

/// Absent keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& config);

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);

}  // namespace grpsel
