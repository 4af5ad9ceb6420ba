#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace csi {

/// Every tunable default in one place. Loaded from a JSON config file; keys that
/// are absent keep the values below.
struct Settings {
  // fitting
  double epsilon = 1e-5;          // total prior mass
  int max_iter = 50;
  int restarts = 5;
  double reassignment_tol = 0.0;  // fraction of labels; 0 runs every iteration
  bool hard_counts = false;

  // model selection
  double elbow_threshold = 0.01;  // relative gain below which K stops growing
  double merge_alpha = 0.05;      // family-wise level; <= 0 disables merging

  // analytics horizon
  double d_max_tail = 1e-6;       // stop when every start state's survival is below this
  double d_max_los_factor = 4.0;  // cap at this multiple of the empirical 99th percentile LOS
  int d_max_hard_cap = 20000;

  // census / scheduling
  double eps_tail = 1e-9;         // demand pmf truncation
  double n_max_tail = 1e-6;       // emergency-count truncation in the scheduler
  double solver_time_limit = 60.0;

  std::uint64_t seed = 0;

  void check() const;
};

/// Throws ConfigError naming the offending key ("fit.epsilon: must be positive").
Settings settings_from_json(const nlohmann::json& j);
nlohmann::json settings_to_json(const Settings& s);
Settings load_settings(const std::string& path);

}  // namespace csi
