#include "csi/settings.hpp"

#include <fstream>
#include <set>

#include "csi/errors.hpp"

namespace csi {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& known) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!known.count(key)) throw ConfigError((where.empty() ? "" : where + ".") + key + ": unknown key");
}

template <class T>
void read(const json& obj, const std::string& section, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  const std::string path = section + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
  } else {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
  }
  out = v.get<T>();
}

}  // namespace

void Settings::check() const {
  if (!(epsilon > 0.0)) throw ConfigError("fit.epsilon: must be positive");
  if (max_iter < 1) throw ConfigError("fit.max_iter: must be at least 1");
  if (restarts < 1) throw ConfigError("fit.restarts: must be at least 1");
  if (!(reassignment_tol >= 0.0 && reassignment_tol < 1.0)) throw ConfigError("fit.reassignment_tol: must be in [0, 1)");
  if (!(elbow_threshold > 0.0)) throw ConfigError("selection.elbow_threshold: must be positive");
  if (!(merge_alpha < 1.0)) throw ConfigError("selection.merge_alpha: must be below 1");
  if (!(d_max_tail > 0.0 && d_max_tail < 1.0)) throw ConfigError("horizon.tail: must be in (0, 1)");
  if (!(d_max_los_factor > 0.0)) throw ConfigError("horizon.los_factor: must be positive");
  if (d_max_hard_cap < 1) throw ConfigError("horizon.hard_cap: must be at least 1");
  if (!(eps_tail > 0.0 && eps_tail < 1.0)) throw ConfigError("census.eps_tail: must be in (0, 1)");
  if (!(n_max_tail > 0.0 && n_max_tail < 1.0)) throw ConfigError("solver.n_max_tail: must be in (0, 1)");
  if (!(solver_time_limit > 0.0)) throw ConfigError("solver.time_limit: must be positive");
}

Settings settings_from_json(const json& j) {
  Settings s;
  reject_unknown(j, "", {"fit", "selection", "horizon", "census", "solver", "seed"});
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) throw ConfigError("seed: expected an integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("fit")) {
    const auto& f = j["fit"];
    reject_unknown(f, "fit", {"epsilon", "max_iter", "restarts", "reassignment_tol", "hard_counts"});
    read(f, "fit", "epsilon", s.epsilon);
    read(f, "fit", "max_iter", s.max_iter);
    read(f, "fit", "restarts", s.restarts);
    read(f, "fit", "reassignment_tol", s.reassignment_tol);
    read(f, "fit", "hard_counts", s.hard_counts);
  }
  if (j.contains("selection")) {
    const auto& f = j["selection"];
    reject_unknown(f, "selection", {"elbow_threshold", "merge_alpha"});
    read(f, "selection", "elbow_threshold", s.elbow_threshold);
    read(f, "selection", "merge_alpha", s.merge_alpha);
  }
  if (j.contains("horizon")) {
    const auto& f = j["horizon"];
    reject_unknown(f, "horizon", {"tail", "los_factor", "hard_cap"});
    read(f, "horizon", "tail", s.d_max_tail);
    read(f, "horizon", "los_factor", s.d_max_los_factor);
    read(f, "horizon", "hard_cap", s.d_max_hard_cap);
  }
  if (j.contains("census")) {
    const auto& f = j["census"];
    reject_unknown(f, "census", {"eps_tail"});
    read(f, "census", "eps_tail", s.eps_tail);
  }
  if (j.contains("solver")) {
    const auto& f = j["solver"];
    reject_unknown(f, "solver", {"time_limit", "n_max_tail"});
    read(f, "solver", "time_limit", s.solver_time_limit);
    read(f, "solver", "n_max_tail", s.n_max_tail);
  }
  s.check();
  return s;
}

json settings_to_json(const Settings& s) {
  return {{"seed", s.seed},
          {"fit",
           {{"epsilon", s.epsilon},
            {"max_iter", s.max_iter},
            {"restarts", s.restarts},
            {"reassignment_tol", s.reassignment_tol},
            {"hard_counts", s.hard_counts}}},
          {"selection", {{"elbow_threshold", s.elbow_threshold}, {"merge_alpha", s.merge_alpha}}},
          {"horizon", {{"tail", s.d_max_tail}, {"los_factor", s.d_max_los_factor}, {"hard_cap", s.d_max_hard_cap}}},
          {"census", {{"eps_tail", s.eps_tail}}},
          {"solver", {{"time_limit", s.solver_time_limit}, {"n_max_tail", s.n_max_tail}}}};
}

Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return settings_from_json(j);
}

}  // namespace csi
