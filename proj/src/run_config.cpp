#include "grpsel/run_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace grpsel {

#define GRPSEL_CONFIG_FIELDS(X) \
  X(command)                    \
  X(example)                    \
  X(replications)               \
  X(method)                     \
  X(seed)                       \
  X(data_path)                  \
  X(groups_path)                \
  X(beta_path)                  \
  X(lambda_mode)                \
  X(lambda)                     \
  X(small_groups)               \
  X(sigma)                      \
  X(c0)                         \
  X(a_n)                        \
  X(q_star)                     \
  X(src_mode)                   \
  X(src_samples)                \
  X(lambda_tilde)               \
  X(r_n)                        \
  X(grid_points)                \
  X(grid_decade)                \
  X(df_rule)                    \
  X(kkt_tol)                    \
  X(max_iters)                  \
  X(objective_tol)              \
  X(out_path)                   \
  X(table_path)                 \
  X(csv_path)

void to_json(nlohmann::json& j, const RunConfig& config) {
  j = nlohmann::json::object();
#define X(name) j[#name] = config.name;
  GRPSEL_CONFIG_FIELDS(X)
#undef X
}

void from_json(const nlohmann::json& j, RunConfig& config) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::set<std::string> known = {
#define X(name) #name,
      GRPSEL_CONFIG_FIELDS(X)
#undef X
  };
  for (const auto& item : j.items())
    if (!known.contains(item.key()))
      throw std::invalid_argument("unknown config key '" + item.key() + "'");
#define X(name) \
  if (j.contains(#name)) j.at(#name).get_to(config.name);
  GRPSEL_CONFIG_FIELDS(X)
#undef X
}

#undef GRPSEL_CONFIG_FIELDS

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  nlohmann::json parsed;
  try {
    in >> parsed;
  } catch (const nlohmann::json::parse_error& err) {
    throw std::invalid_argument(path + ": " + err.what());
  }
  return parsed.get<RunConfig>();
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << nlohmann::json(config).dump(2) << '\n';
}

}  // namespace grpsel
