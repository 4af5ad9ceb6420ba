#include "csi/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csi/errors.hpp"

namespace csi {

using nlohmann::json;

namespace {

json parse_json_line(const std::string& line, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
  }
}

const json& need(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing \"" + key + "\"");
  return obj.at(key);
}

StateId state_by_label(const StateSpace& states, const std::string& label, const std::string& where) {
  auto u = states.find(label);
  if (!u) throw StructuralError(where + ": unknown state \"" + label + "\"");
  return *u;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

// hours since 1970-01-01 for "YYYY-MM-DD[ HH:MM[:SS]]" (a 'T' separator is fine too)
std::optional<double> parse_datetime_hours(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char sep = 0;
  const int n = std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d, &sep, &h, &mi, &sec);
  if (n < 3 || (n > 3 && n < 6) || (n >= 4 && sep != ' ' && sep != 'T')) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60 || h < 0 || mi < 0 || sec < 0) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 24.0 + h + mi / 60.0 + sec / 3600.0;
}

std::optional<double> parse_time(const std::string& s, const IngestOptions& opt) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end && *end == '\0' && std::isfinite(v)) return opt.timestamps_in_units ? v : v / opt.hours_per_unit;
  if (auto h = parse_datetime_hours(s)) return *h / opt.hours_per_unit;
  return std::nullopt;
}

json attributes_to_json(const AttributeRecord& a) {
  return {{"age", a.age}, {"sex", a.sex == 0 ? "M" : "F"}, {"diagnosis", a.diagnosis}};
}

AttributeRecord attributes_from_json(const json& j, const std::string& where) {
  AttributeRecord a;
  const auto& age = need(j, "age", where);
  if (!age.is_number()) throw ParseError(where + ".age: expected a number");
  a.age = age.get<double>();
  const auto& sex = need(j, "sex", where);
  if (sex == "M")
    a.sex = 0;
  else if (sex == "F")
    a.sex = 1;
  else
    throw ParseError(where + ".sex: expected \"M\" or \"F\"");
  const auto& dx = need(j, "diagnosis", where);
  if (!dx.is_number_integer() || dx.get<int>() < 0) throw ParseError(where + ".diagnosis: expected a nonnegative index");
  a.diagnosis = dx.get<int>();
  return a;
}

}  // namespace

// ---- trajectories ----------------------------------------------------------------

void write_trajectories(std::ostream& out, const TrajectoryData& data) {
  json header = {{"schema", kTrajectorySchema},
                 {"states", data.states.labels()},
                 {"num_transient", data.states.num_transient()},
                 {"max_holding", data.max_holding},
                 {"diagnosis_labels", data.diagnosis_labels}};
  out << header.dump() << '\n';
  for (const auto& y : data.items) {
    json visits = json::array();
    for (const auto& v : y.visits) visits.push_back({data.states.label(v.state), v.holding});
    json line = {{"id", y.id}, {"visits", visits}, {"exit", data.states.label(y.exit)}};
    if (y.attributes) line["attributes"] = attributes_to_json(*y.attributes);
    out << line.dump() << '\n';
  }
}

TrajectoryData read_trajectories(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (lineno == 0 || line.empty()) throw ParseError("empty trajectory file");
  const json header = parse_json_line(line, lineno);
  const auto& schema = need(header, "schema", "header");
  if (schema != kTrajectorySchema)
    throw StructuralError("unsupported trajectory schema " + schema.dump() + ", expected " + kTrajectorySchema);
  const auto labels = need(header, "states", "header").get<std::vector<std::string>>();
  const auto nt = need(header, "num_transient", "header").get<std::size_t>();
  if (nt == 0 || nt >= labels.size()) throw StructuralError("header: need at least one transient and one absorbing state");

  TrajectoryData data;
  data.states = StateSpace(nt, labels.size() - nt, labels);
  data.max_holding = need(header, "max_holding", "header").get<int>();
  if (header.contains("diagnosis_labels")) data.diagnosis_labels = header["diagnosis_labels"].get<std::vector<std::string>>();

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = parse_json_line(line, lineno);
    const std::string where = "line " + std::to_string(lineno);
    Trajectory y;
    if (j.contains("id")) y.id = j["id"].get<std::string>();
    const auto& visits = need(j, "visits", where);
    if (!visits.is_array()) throw ParseError(where + ".visits: expected an array");
    for (const auto& v : visits) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_string() || !v[1].is_number_integer())
        throw ParseError(where + ".visits: each visit is [state, days]");
      y.visits.push_back({state_by_label(data.states, v[0].get<std::string>(), where), v[1].get<int>()});
    }
    const auto& exit = need(j, "exit", where);
    if (!exit.is_string()) throw ParseError(where + ".exit: expected a state label");
    y.exit = state_by_label(data.states, exit.get<std::string>(), where);
    if (j.contains("attributes")) y.attributes = attributes_from_json(j["attributes"], where + ".attributes");
    try {
      check_trajectory(y, data.states, data.max_holding);
    } catch (const StructuralError& e) {
      throw StructuralError(where + ": " + e.what());
    }
    data.items.push_back(std::move(y));
  }
  return data;
}

void save_trajectories(const std::string& path, const TrajectoryData& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_trajectories(out, data);
}

TrajectoryData load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_trajectories(in);
}

// ---- ADT ingestion ---------------------------------------------------------------

WardGrouping WardGrouping::from_json(const json& j) {
  WardGrouping g;
  const auto& wards = need(j, "wards", "grouping");
  if (!wards.is_object()) throw ConfigError("grouping.wards: expected an object");
  for (const auto& [raw, grouped] : wards.items()) {
    if (!grouped.is_string()) throw ConfigError("grouping.wards." + raw + ": expected a label");
    g.wards[raw] = grouped.get<std::string>();
  }
  g.absorbing = need(j, "absorbing", "grouping").get<std::vector<std::string>>();
  if (j.contains("transient")) g.transient = j["transient"].get<std::vector<std::string>>();
  if (j.contains("merge_repeats")) g.merge_repeats = j["merge_repeats"].get<bool>();
  return g;
}

WardGrouping WardGrouping::identity(const std::vector<std::string>& wards, const std::vector<std::string>& absorbing) {
  WardGrouping g;
  for (const auto& w : wards) g.wards[w] = w;
  g.transient = wards;
  g.absorbing = absorbing;
  return g;
}

json IngestReport::to_json() const {
  json rej = json::array();
  for (const auto& r : rejected) rej.push_back({{"line", r.line}, {"patient", r.patient}, {"reason", r.reason}});
  return {{"records", records},
          {"patients", patients},
          {"rejected_patients", rejected_patients},
          {"dropped_short", dropped_short},
          {"merged_stays", merged_stays},
          {"retained", retained},
          {"retention", retention},
          {"rejected", rej}};
}

IngestResult ingest_adt_csv(std::istream& in, const WardGrouping& grouping, const IngestOptions& options) {
  if (!(options.hours_per_unit > 0.0)) throw ConfigError("hours_per_unit must be positive");
  if (grouping.absorbing.empty()) throw ConfigError("grouping needs at least one absorbing label");

  // state space
  std::vector<std::string> transient = grouping.transient;
  if (transient.empty()) {
    std::set<std::string> seen;
    for (const auto& [_, g] : grouping.wards) seen.insert(g);
    transient.assign(seen.begin(), seen.end());
  }
  for (const auto& [raw, g] : grouping.wards)
    if (std::find(transient.begin(), transient.end(), g) == transient.end())
      throw ConfigError("grouped label " + g + " (from " + raw + ") is not in the transient list");
  for (const auto& a : grouping.absorbing)
    if (std::find(transient.begin(), transient.end(), a) != transient.end())
      throw ConfigError("label " + a + " is both a ward and an absorbing outcome");
  std::vector<std::string> labels = transient;
  labels.insert(labels.end(), grouping.absorbing.begin(), grouping.absorbing.end());
  const StateSpace states(transient.size(), grouping.absorbing.size(), labels);

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty ADT file");
  ++lineno;
  const auto head = split_csv_line(line);
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(head.begin(), head.end(), name);
    if (it == head.end()) return std::nullopt;
    return static_cast<std::size_t>(it - head.begin());
  };
  const auto c_id = col("patient_id"), c_ward = col("ward"), c_in = col("entry"), c_out = col("exit"),
             c_disp = col("disposition");
  for (const auto& [name, c] : {std::pair{"patient_id", c_id}, {"ward", c_ward}, {"entry", c_in}, {"exit", c_out},
                                {"disposition", c_disp}})
    if (!c) throw ParseError(std::string("ADT header lacks column ") + name);
  const auto c_age = col("age"), c_sex = col("sex"), c_dx = col("diagnosis");
  const bool with_attributes = c_age && c_sex && c_dx;

  struct Stay {
    std::size_t line;
    std::string ward;
    double entry, exit;
    std::string disposition;
    std::vector<std::string> attrs;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Stay>> by_patient;
  std::set<std::string> bad_patients;
  std::set<std::string> unmapped;
  std::set<std::string> diagnoses;

  IngestResult result;
  auto& rep = result.report;
  auto reject = [&](std::size_t ln, const std::string& pid, const std::string& reason) {
    rep.rejected.push_back({ln, pid, reason});
    bad_patients.insert(pid);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++rep.records;
    const auto f = split_csv_line(line);
    if (f.size() != head.size()) {
      const std::string pid = f.size() > *c_id ? f[*c_id] : std::string();
      if (by_patient.find(pid) == by_patient.end()) order.push_back(pid), by_patient[pid];
      reject(lineno, pid, "expected " + std::to_string(head.size()) + " fields, found " + std::to_string(f.size()));
      continue;
    }
    const std::string pid = f[*c_id];
    if (by_patient.find(pid) == by_patient.end()) {
      order.push_back(pid);
      by_patient[pid];
    }
    const auto t_in = parse_time(f[*c_in], options), t_out = parse_time(f[*c_out], options);
    if (!t_in || !t_out) {
      reject(lineno, pid, "unreadable timestamp");
      continue;
    }
    if (*t_out < *t_in) {
      reject(lineno, pid, "exit before entry");
      continue;
    }
    if (!grouping.wards.count(f[*c_ward])) unmapped.insert(f[*c_ward]);
    Stay s{lineno, f[*c_ward], *t_in, *t_out, f[*c_disp], {}};
    if (with_attributes) {
      s.attrs = {f[*c_age], f[*c_sex], f[*c_dx]};
      if (!f[*c_dx].empty()) diagnoses.insert(f[*c_dx]);
    }
    by_patient[pid].push_back(std::move(s));
  }
  if (!unmapped.empty()) {
    std::string list;
    for (const auto& u : unmapped) list += (list.empty() ? "" : ", ") + u;
    throw ConfigError("ward labels missing from the grouping: " + list);
  }

  result.data.states = states;
  result.data.diagnosis_labels.assign(diagnoses.begin(), diagnoses.end());
  rep.patients = order.size();

  std::vector<Trajectory> kept;
  int observed_t = 0;
  for (const auto& pid : order) {
    if (bad_patients.count(pid)) continue;
    auto stays = by_patient[pid];
    if (stays.empty()) continue;
    std::stable_sort(stays.begin(), stays.end(), [](const Stay& a, const Stay& b) { return a.entry < b.entry; });
    bool ok = true;
    for (std::size_t i = 1; i < stays.size() && ok; ++i)
      if (stays[i].entry < stays[i - 1].exit - 1e-9) {
        reject(stays[i].line, pid, "overlapping stays");
        ok = false;
      }
    if (!ok) continue;

    std::string disposition;
    for (const auto& s : stays)
      if (!s.disposition.empty()) disposition = s.disposition;
    auto exit_state = states.find(disposition);
    if (!exit_state || !states.is_absorbing(*exit_state)) {
      reject(stays.back().line, pid, "unknown disposition \"" + disposition + "\"");
      continue;
    }

    Trajectory y;
    y.id = pid;
    y.exit = *exit_state;
    double pending = 0.0;
    std::optional<StateId> pending_state;
    auto flush = [&] {
      if (!pending_state) return;
      const int h = std::max(1, static_cast<int>(std::ceil(pending - 1e-9)));
      y.visits.push_back({*pending_state, h});
      observed_t = std::max(observed_t, h);
    };
    for (const auto& s : stays) {
      const StateId u = *states.find(grouping.wards.at(s.ward));
      const double dur = s.exit - s.entry;
      if (pending_state && *pending_state == u && grouping.merge_repeats) {
        pending += dur;
        ++rep.merged_stays;
        continue;
      }
      flush();
      pending_state = u;
      pending = dur;
    }
    flush();

    if (with_attributes) {
      const auto& a = stays.front().attrs;
      if (!a[0].empty() && !a[1].empty() && !a[2].empty()) {
        AttributeRecord r;
        char* end = nullptr;
        r.age = std::strtod(a[0].c_str(), &end);
        const bool age_ok = end && *end == '\0';
        const bool sex_ok = a[1] == "M" || a[1] == "F";
        if (!age_ok || !sex_ok) {
          reject(stays.front().line, pid, age_ok ? "sex must be M or F" : "unreadable age");
          continue;
        }
        r.sex = a[1] == "M" ? 0 : 1;
        r.diagnosis = static_cast<int>(std::distance(diagnoses.begin(), diagnoses.find(a[2])));
        y.attributes = r;
      }
    }
    if (y.total_los() <= 1) {
      ++rep.dropped_short;
      continue;
    }
    kept.push_back(std::move(y));
  }

  result.data.max_holding = options.max_holding.value_or(std::max(1, observed_t));
  for (auto& y : kept) {
    bool fits = true;
    for (const auto& v : y.visits)
      if (v.holding > result.data.max_holding) fits = false;
    if (!fits) {
      rep.rejected.push_back({0, y.id, "holding time above max_holding"});
      ++rep.rejected_patients;
      continue;
    }
    result.data.items.push_back(std::move(y));
  }
  rep.rejected_patients += bad_patients.size();
  rep.retained = result.data.items.size();
  rep.retention = rep.patients ? static_cast<double>(rep.retained) / static_cast<double>(rep.patients) : 0.0;
  return result;
}

IngestResult ingest_adt_file(const std::string& path, const WardGrouping& grouping, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return ingest_adt_csv(in, grouping, options);
}

void export_adt_csv(std::ostream& out, const TrajectoryData& data) {
  out << "patient_id,ward,entry,exit,disposition,age,sex,diagnosis\n";
  for (std::size_t n = 0; n < data.items.size(); ++n) {
    const auto& y = data.items[n];
    const std::string id = y.id.empty() ? "p" + std::to_string(n) : y.id;
    long t = 0;
    for (std::size_t i = 0; i < y.visits.size(); ++i) {
      const auto& v = y.visits[i];
      out << id << ',' << data.states.label(v.state) << ',' << t << ',' << t + v.holding << ',';
      if (i + 1 == y.visits.size()) out << data.states.label(y.exit);
      t += v.holding;
      if (y.attributes) {
        const auto& a = *y.attributes;
        const std::string dx = static_cast<std::size_t>(a.diagnosis) < data.diagnosis_labels.size()
                                   ? data.diagnosis_labels[static_cast<std::size_t>(a.diagnosis)]
                                   : std::to_string(a.diagnosis);
        std::ostringstream age;
        age.precision(17);
        age << a.age;
        out << ',' << age.str() << ',' << (a.sex == 0 ? "M" : "F") << ',' << dx << '\n';
      } else {
        out << ",,,\n";
      }
    }
  }
}

// ---- models ----------------------------------------------------------------------

json params_to_json(const SmmParams& params) {
  const std::size_t U = params.num_states();
  json comps = json::array();
  for (const auto& c : params.components) {
    json P = json::array(), H = json::array();
    for (StateId u = 0; u < U; ++u) {
      json prow = json::array(), hrow = json::array();
      for (StateId j = 0; j < U; ++j) {
        prow.push_back(c.p(u, j));
        const auto pmf = c.holding_pmf(u, j);
        hrow.push_back(std::vector<double>(pmf.begin(), pmf.end()));
      }
      P.push_back(prow);
      H.push_back(hrow);
    }
    comps.push_back({{"weight", c.weight}, {"rho", c.rho_vector()}, {"P", P}, {"H", H}});
  }
  return {{"states", params.states.labels()},
          {"num_transient", params.states.num_transient()},
          {"max_holding", params.max_holding},
          {"components", comps}};
}

SmmParams params_from_json(const json& j) {
  try {
    const auto labels = need(j, "states", "model").get<std::vector<std::string>>();
    const auto nt = need(j, "num_transient", "model").get<std::size_t>();
    const int T = need(j, "max_holding", "model").get<int>();
    const auto& comps = need(j, "components", "model");
    if (nt == 0 || nt >= labels.size()) throw StructuralError("model: need transient and absorbing states");
    if (T < 1) throw StructuralError("model.max_holding: must be at least 1");
    if (!comps.is_array() || comps.empty()) throw StructuralError("model.components: need at least one component");
    const std::size_t U = labels.size();
    SmmParams params(StateSpace(nt, U - nt, labels), T, comps.size());
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const std::string where = "model.components[" + std::to_string(k) + "]";
      const auto& cj = comps[k];
      auto& c = params.components[k];
      c.weight = need(cj, "weight", where).get<double>();
      if (!(c.weight > 0.0)) throw StructuralError(where + ".weight: empty cluster");
      const auto rho = need(cj, "rho", where).get<std::vector<double>>();
      const auto P = need(cj, "P", where).get<std::vector<std::vector<double>>>();
      const auto H = need(cj, "H", where).get<std::vector<std::vector<std::vector<double>>>>();
      if (rho.size() != U || P.size() != U || H.size() != U) throw StructuralError(where + ": wrong number of states");
      c.rho_vector() = rho;
      for (StateId u = 0; u < U; ++u) {
        if (P[u].size() != U || H[u].size() != U) throw StructuralError(where + ".P: wrong row length");
        for (StateId j2 = 0; j2 < U; ++j2) {
          c.p(u, j2) = P[u][j2];
          if (H[u][j2].size() != static_cast<std::size_t>(T)) throw StructuralError(where + ".H: wrong pmf length");
          std::copy(H[u][j2].begin(), H[u][j2].end(), c.holding_pmf(u, j2).begin());
        }
      }
    }
    const auto bad = validate_params(params, 1e-6);
    if (!bad.empty())
      throw ModelInconsistencyError("model: " + bad.front().constraint + " constraint violated in component " +
                                    std::to_string(bad.front().cluster));
    return params;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

json model_to_json(const SavedModel& model) {
  json j = {{"schema", kModelSchema}, {"params", params_to_json(model.params)}};
  json meta = {{"objective", model.meta.objective},
               {"seed", model.meta.seed},
               {"diagnosis_labels", model.meta.diagnosis_labels}};
  if (model.meta.config) {
    const auto& c = *model.meta.config;
    meta["config"] = {{"K", c.K},
                      {"max_iter", c.max_iter},
                      {"restarts", c.restarts},
                      {"seed", c.seed},
                      {"epsilon", c.epsilon},
                      {"reassignment_tol", c.reassignment_tol},
                      {"hard_counts", c.m_step.count_mode == CountMode::Hard},
                      {"shared_holding", c.m_step.holding_mode == HoldingMode::Shared}};
  }
  j["meta"] = meta;
  return j;
}

SavedModel model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema")) throw ParseError("model file lacks a schema field");
  if (j["schema"] != kModelSchema)
    throw StructuralError("unsupported model schema " + j["schema"].dump() + ", expected " + kModelSchema);
  SavedModel m;
  m.params = params_from_json(need(j, "params", "model file"));
  if (j.contains("meta")) {
    try {
      const auto& meta = j["meta"];
      m.meta.objective = meta.value("objective", 0.0);
      m.meta.seed = meta.value("seed", std::uint64_t{0});
      m.meta.diagnosis_labels = meta.value("diagnosis_labels", std::vector<std::string>{});
      if (meta.contains("config")) {
        const auto& c = meta["config"];
        EmConfig cfg;
        cfg.K = c.at("K").get<std::size_t>();
        cfg.max_iter = c.at("max_iter").get<int>();
        cfg.restarts = c.at("restarts").get<int>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        cfg.epsilon = c.at("epsilon").get<double>();
        cfg.reassignment_tol = c.value("reassignment_tol", 0.0);
        if (c.value("hard_counts", false)) cfg.m_step.count_mode = CountMode::Hard;
        if (c.value("shared_holding", false)) cfg.m_step.holding_mode = HoldingMode::Shared;
        m.meta.config = cfg;
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("model metadata: ") + e.what());
    }
  }
  return m;
}

void save_model(const std::string& path, const SavedModel& model) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << model_to_json(model).dump(1) << '\n';
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace csi
