#include "csi/service.hpp"

#include <climits>
#include <sstream>

#include "httplib.h"

#include "csi/analytics.hpp"
#include "csi/errors.hpp"
#include "csi/smm_em.hpp"
#include "csi/synth.hpp"

namespace csi {

using nlohmann::json;

namespace {

// unknown id (404) or a model whose fit has not finished (409)
struct LookupFailure : std::runtime_error {
  LookupFailure(int code, const std::string& msg) : std::runtime_error(msg), status(code) {}
  int status;
};

HttpResponse error_response(int status, const std::string& message, const std::string& field = {}) {
  json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return {status, body};
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) throw BadRequest(path.empty() ? "$" : path, "expected an object");
  if (!obj.contains(key)) throw BadRequest(path.empty() ? key : path + "." + key, "required");
  return obj.at(key);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string at_index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw BadRequest(path, "expected a number");
  return v.get<double>();
}

int nonneg_int(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > INT_MAX)
    throw BadRequest(path, "expected a nonnegative integer");
  return v.get<int>();
}

// [[7 values] per type] flattened to [type * 7 + day]
template <class T>
std::vector<T> weekly_grid(const json& v, const std::string& path, std::size_t types, bool integers) {
  if (!v.is_array()) throw BadRequest(path, "expected an array with one row per type");
  if (v.size() != types) throw BadRequest(path, "expected " + std::to_string(types) + " rows, got " + std::to_string(v.size()));
  std::vector<T> out;
  for (std::size_t k = 0; k < types; ++k) {
    const auto& row = v[k];
    const std::string rp = at_index(path, k);
    if (!row.is_array() || row.size() != kDaysPerWeek) throw BadRequest(rp, "expected 7 entries");
    for (std::size_t d = 0; d < row.size(); ++d) {
      const std::string cp = at_index(rp, d);
      if (integers) {
        out.push_back(static_cast<T>(nonneg_int(row[d], cp)));
      } else {
        const double x = number(row[d], cp);
        if (!(x >= 0.0)) throw BadRequest(cp, "must be nonnegative");
        out.push_back(static_cast<T>(x));
      }
    }
  }
  return out;
}

std::vector<double> per_ward(const json& v, const std::string& path, std::size_t wards) {
  if (v.is_number()) {
    const double x = v.get<double>();
    if (!(x >= 0.0)) throw BadRequest(path, "must be nonnegative");
    return std::vector<double>(wards, x);
  }
  if (!v.is_array() || v.size() != wards) throw BadRequest(path, "expected " + std::to_string(wards) + " per-ward values");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = number(v[i], at_index(path, i));
    if (!(x >= 0.0)) throw BadRequest(at_index(path, i), "must be nonnegative");
    out.push_back(x);
  }
  return out;
}

ArrivalPlan plan_from_json(const json& v, const std::string& path, std::size_t types) {
  if (!v.is_object()) throw BadRequest(path, "expected an object");
  ArrivalPlan plan(types);
  if (v.contains("elective")) plan.elective = weekly_grid<int>(v["elective"], join(path, "elective"), types, true);
  if (v.contains("emergency"))
    plan.emergency = weekly_grid<double>(v["emergency"], join(path, "emergency"), types, false);
  return plan;
}

std::optional<std::vector<int>> capacities_from_json(const json& req, std::size_t wards) {
  if (!req.contains("capacities")) return std::nullopt;
  const auto& v = req["capacities"];
  if (!v.is_array() || v.size() != wards) throw BadRequest("capacities", "expected " + std::to_string(wards) + " entries");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(nonneg_int(v[i], at_index("capacities", i)));
  return out;
}

EmConfig em_config_from_json(const json& v, const Settings& s) {
  EmConfig c;
  c.max_iter = s.max_iter;
  c.restarts = s.restarts;
  c.epsilon = s.epsilon;
  c.seed = s.seed;
  c.reassignment_tol = s.reassignment_tol;
  if (s.hard_counts) c.m_step.count_mode = CountMode::Hard;
  if (!v.is_object()) throw BadRequest("config", "expected an object");
  const auto& K = require(v, "config", "K");
  c.K = static_cast<std::size_t>(nonneg_int(K, "config.K"));
  if (c.K < 1) throw BadRequest("config.K", "must be at least 1");
  if (v.contains("max_iter")) c.max_iter = nonneg_int(v["max_iter"], "config.max_iter");
  if (v.contains("restarts")) c.restarts = nonneg_int(v["restarts"], "config.restarts");
  if (c.max_iter < 1) throw BadRequest("config.max_iter", "must be at least 1");
  if (c.restarts < 1) throw BadRequest("config.restarts", "must be at least 1");
  if (v.contains("seed")) c.seed = static_cast<std::uint64_t>(nonneg_int(v["seed"], "config.seed"));
  if (v.contains("epsilon")) {
    c.epsilon = number(v["epsilon"], "config.epsilon");
    if (!(c.epsilon > 0.0)) throw BadRequest("config.epsilon", "must be positive");
  }
  if (v.contains("hard_counts")) {
    if (!v["hard_counts"].is_boolean()) throw BadRequest("config.hard_counts", "expected a boolean");
    c.m_step.count_mode = v["hard_counts"].get<bool>() ? CountMode::Hard : CountMode::Soft;
  }
  if (v.contains("shared_holding")) {
    if (!v["shared_holding"].is_boolean()) throw BadRequest("config.shared_holding", "expected a boolean");
    if (v["shared_holding"].get<bool>()) c.m_step.holding_mode = HoldingMode::Shared;
  }
  return c;
}

TrajectoryData dataset_from_json(const json& v) {
  if (!v.is_object()) throw BadRequest("dataset", "expected an object");
  if (v.contains("jsonl")) {
    if (!v["jsonl"].is_string()) throw BadRequest("dataset.jsonl", "expected a string");
    std::istringstream in(v["jsonl"].get<std::string>());
    try {
      return read_trajectories(in);
    } catch (const std::exception& e) {
      throw BadRequest("dataset.jsonl", e.what());
    }
  }
  if (v.contains("path")) {
    if (!v["path"].is_string()) throw BadRequest("dataset.path", "expected a string");
    try {
      return load_trajectories(v["path"].get<std::string>());
    } catch (const std::exception& e) {
      throw BadRequest("dataset.path", e.what());
    }
  }
  if (v.contains("synthetic")) {
    const auto& s = v["synthetic"];
    const std::string scenario = s.is_object() ? s.value("scenario", std::string("k4")) : "";
    if (scenario != "k4") throw BadRequest("dataset.synthetic.scenario", "only \"k4\" is available");
    const std::size_t n = s.contains("n") ? static_cast<std::size_t>(nonneg_int(s["n"], "dataset.synthetic.n")) : 1000;
    const auto seed = s.contains("seed") ? static_cast<std::uint64_t>(nonneg_int(s["seed"], "dataset.synthetic.seed")) : 0;
    return sample_dataset(canonical_k4_spec(n, seed)).data;
  }
  throw BadRequest("dataset", "give one of jsonl, path or synthetic");
}

json metrics_to_json(const ScheduleMetrics& m, std::size_t wards) {
  json off = json::array();
  json load = json::array();
  for (std::size_t u = 0; u < wards; ++u) {
    off.push_back(std::vector<double>(m.offunit.begin() + static_cast<long>(u * kDaysPerWeek),
                                      m.offunit.begin() + static_cast<long>((u + 1) * kDaysPerWeek)));
    load.push_back(std::vector<double>(m.elective_load.begin() + static_cast<long>(u * kDaysPerWeek),
                                       m.elective_load.begin() + static_cast<long>((u + 1) * kDaysPerWeek)));
  }
  return {{"expected_blocking", m.expected_blocking}, {"offunit", off},          {"elective_load", load},
          {"utilization", m.utilization},             {"throughput", m.throughput}, {"objective", m.objective},
          {"blocking_ok", m.blocking_ok},             {"offunit_ok", m.offunit_ok}, {"mix_ok", m.mix_ok},
          {"caps_ok", m.caps_ok},                     {"feasible", m.feasible()}};
}

json grid_to_json(const std::vector<int>& flat, std::size_t types) {
  json out = json::array();
  for (std::size_t k = 0; k < types; ++k)
    out.push_back(std::vector<int>(flat.begin() + static_cast<long>(k * kDaysPerWeek),
                                   flat.begin() + static_cast<long>((k + 1) * kDaysPerWeek)));
  return out;
}

}  // namespace

json solution_to_json(const ScheduleSolution& sol, const ScheduleInstance& instance) {
  json j = {{"status", sol.status}, {"objective", sol.objective}, {"bound", sol.bound},
            {"gap", sol.gap},       {"nodes", sol.nodes}};
  if (!sol.psi.empty()) {
    j["psi"] = grid_to_json(sol.psi, instance.num_types);
    j["delta"] = sol.delta;
    j["offu"] = sol.offu;
    j["metrics"] = metrics_to_json(sol.metrics, instance.num_wards);
  } else {
    j["psi"] = nullptr;
  }
  if (!sol.infeasible_family.empty()) j["infeasible_family"] = sol.infeasible_family;
  return j;
}

json forecast_to_json(const CensusForecast& f, const StateSpace& states, bool with_capacity) {
  json wards = json::array();
  for (StateId u = 0; u < f.num_wards; ++u) {
    json days = json::array();
    for (int d = 0; d < kDaysPerWeek; ++d) {
      const auto& c = f.at(u, d);
      json cell = {{"mean", c.total.mean},
                   {"elective_mean", c.elective_mean},
                   {"emergency_mean", c.emergency_mean},
                   {"pmf", c.total.pmf},
                   {"tail_mass", c.total.tail_mass}};
      cell["exceedance"] = with_capacity ? json(c.exceedance) : json(nullptr);
      days.push_back(cell);
    }
    wards.push_back({{"ward", states.label(u)}, {"days", days}});
  }
  return {{"wards", wards}};
}

Service::Service(Settings settings) : settings_(std::move(settings)) {
  settings_.check();
  worker_ = std::thread([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

std::string Service::next_id(const char* prefix) {
  std::lock_guard<std::mutex> lock(mu_);
  return prefix + std::to_string(++counter_);
}

std::string Service::add_model(SavedModel model, std::string id) {
  auto served = std::make_shared<ServedModel>();
  served->model = std::move(model);
  served->d_max = default_d_max(served->model.params, 1e-10, std::nullopt, settings_.d_max_hard_cap);
  for (ClusterId k = 0; k < served->model.params.num_clusters(); ++k)
    served->gamma.push_back(occupancy(served->model.params, k, served->d_max));
  if (id.empty()) id = next_id("m");
  served->id = id;
  std::lock_guard<std::mutex> lock(mu_);
  models_[id] = std::move(served);
  return id;
}

void Service::enqueue(const std::string& job_id, std::function<json()> work) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    queue_.emplace_back(job_id, std::move(work));
  }
  cv_.notify_all();
}

void Service::worker_loop() {
  for (;;) {
    std::pair<std::string, std::function<json()>> item;
    {
      std::unique_lock<std::mutex> lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      item = std::move(queue_.front());
      queue_.pop_front();
      busy_ = true;
      jobs_[item.first].status = "running";
    }
    json result;
    std::string error;
    try {
      result = item.second();
    } catch (const std::exception& e) {
      error = e.what();
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto& job = jobs_[item.first];
      job.status = error.empty() ? "done" : "failed";
      job.result = std::move(result);
      job.error = error;
      busy_ = false;
    }
    cv_.notify_all();
  }
}

void Service::wait_idle() {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [&] { return stopping_ || (queue_.empty() && !busy_); });
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    json req;
    if (method == "POST") {
      try {
        req = json::parse(body.empty() ? "{}" : body);
      } catch (const json::parse_error& e) {
        return error_response(400, std::string("body is not valid JSON: ") + e.what(), "$");
      }
      if (!req.is_object()) return error_response(400, "body must be a JSON object", "$");
    }
    auto tail = [&](const std::string& prefix) -> std::optional<std::string> {
      if (path.rfind(prefix, 0) != 0 || path.size() == prefix.size()) return std::nullopt;
      const std::string id = path.substr(prefix.size());
      if (id.find('/') != std::string::npos) return std::nullopt;
      return id;
    };
    if (method == "POST" && path == "/fit") return post_fit(req);
    if (method == "POST" && path == "/models") return post_models(req);
    if (method == "POST" && path == "/forecast") return post_forecast(req);
    if (method == "POST" && path == "/whatif") return post_whatif(req);
    if (method == "POST" && path == "/optimize") return post_optimize(req);
    if (method == "GET") {
      if (auto id = tail("/model/")) return get_model(*id);
      if (auto id = tail("/jobs/")) return get_job(*id);
    }
    return error_response(404, "no route for " + method + " " + path);
  } catch (const LookupFailure& e) {
    return error_response(e.status, e.what());
  } catch (const BadRequest& e) {
    return error_response(400, e.what(), e.field());
  } catch (const StructuralError& e) {
    return error_response(400, e.what());
  } catch (const ConfigError& e) {
    return error_response(400, e.what());
  } catch (const HorizonError& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse Service::post_fit(const json& req) {
  const EmConfig config = em_config_from_json(require(req, "", "config"), settings_);
  auto data = std::make_shared<TrajectoryData>(dataset_from_json(require(req, "", "dataset")));
  if (data->size() < config.K)
    throw BadRequest("config.K", "dataset has " + std::to_string(data->size()) + " trajectories, fewer than K");

  std::string id;
  if (req.contains("model_id")) {
    if (!req["model_id"].is_string() || req["model_id"].get<std::string>().empty())
      throw BadRequest("model_id", "expected a non-empty string");
    id = req["model_id"].get<std::string>();
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (!id.empty()) {
      auto j = jobs_.find(id);
      if (j != jobs_.end() && (j->second.status == "queued" || j->second.status == "running"))
        return error_response(409, "a fit for " + id + " is already in progress");
      if (models_.count(id)) return error_response(409, "model " + id + " already exists");
    } else {
      id = "m" + std::to_string(++counter_);
    }
    jobs_[id] = Job{id, "fit", "queued", id, nullptr, {}};
  }
  enqueue(id, [this, id, config, data]() {
    const auto result = fit(*data, config);
    SavedModel m;
    m.params = result.params;
    m.meta.config = config;
    m.meta.objective = result.final_q;
    m.meta.seed = result.seed_used;
    m.meta.diagnosis_labels = data->diagnosis_labels;
    add_model(std::move(m), id);
    return json{{"model_id", id}, {"objective", result.final_q}};
  });
  return {202, {{"job_id", id}, {"model_id", id}, {"status", "queued"}}};
}

HttpResponse Service::post_models(const json& req) {
  SavedModel m;
  try {
    m = model_from_json(req);
  } catch (const std::exception& e) {
    throw BadRequest("$", e.what());
  }
  const std::string id = add_model(std::move(m));
  return {201, {{"model_id", id}}};
}

HttpResponse Service::get_job(const std::string& id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return error_response(404, "unknown job " + id);
  const auto& j = it->second;
  json body = {{"job_id", j.id}, {"kind", j.kind}, {"status", j.status}};
  if (!j.model_id.empty()) body["model_id"] = j.model_id;
  if (j.status == "done") body["result"] = j.result;
  if (j.status == "failed") body["error"] = j.error;
  return {200, body};
}

HttpResponse Service::get_model(const std::string& id) {
  std::shared_ptr<const ServedModel> m;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = models_.find(id);
    if (it == models_.end()) {
      auto j = jobs_.find(id);
      if (j != jobs_.end() && (j->second.status == "queued" || j->second.status == "running"))
        return error_response(409, "model " + id + " is still being fitted");
      if (j != jobs_.end() && j->second.status == "failed")
        return error_response(404, "fit for " + id + " failed: " + j->second.error);
      return error_response(404, "unknown model " + id);
    }
    m = it->second;
  }
  json body = model_to_json(m->model);
  body["model_id"] = m->id;
  body["d_max"] = m->d_max;
  json weights = json::array();
  for (const auto& c : m->model.params.components) weights.push_back(c.weight);
  body["weights"] = weights;
  return {200, body};
}

std::shared_ptr<const ServedModel> Service::model_or_throw(const json& req) {
  const auto& v = require(req, "", "model_id");
  if (!v.is_string()) throw BadRequest("model_id", "expected a string");
  const std::string id = v.get<std::string>();
  std::lock_guard<std::mutex> lock(mu_);
  auto it = models_.find(id);
  if (it != models_.end()) return it->second;
  auto j = jobs_.find(id);
  if (j != jobs_.end() && (j->second.status == "queued" || j->second.status == "running"))
    throw LookupFailure(409, "model " + id + " is still being fitted");
  throw LookupFailure(404, "unknown model " + id);
}

HttpResponse Service::post_forecast(const json& req) {
  const auto m = model_or_throw(req);
  const std::size_t K = m->model.params.num_clusters();
  const std::size_t W = m->model.params.states.num_transient();
  const ArrivalPlan plan = plan_from_json(require(req, "", "plan"), "plan", K);
  const auto caps = capacities_from_json(req, W);
  CensusOptions opt;
  opt.eps_tail = settings_.eps_tail;
  const auto f = forecast_census(plan, m->gamma, W, caps.value_or(std::vector<int>(W, INT_MAX / 2)), opt);
  json body = forecast_to_json(f, m->model.params.states, caps.has_value());
  body["model_id"] = m->id;
  return {200, body};
}

HttpResponse Service::post_whatif(const json& req) {
  const auto m = model_or_throw(req);
  const std::size_t K = m->model.params.num_clusters();
  const std::size_t W = m->model.params.states.num_transient();
  const ArrivalPlan base = plan_from_json(require(req, "", "baseline"), "baseline", K);
  const ArrivalPlan edit = plan_from_json(require(req, "", "plan"), "plan", K);
  const auto caps = capacities_from_json(req, W);
  CensusOptions opt;
  opt.eps_tail = settings_.eps_tail;
  const auto cap_vec = caps.value_or(std::vector<int>(W, INT_MAX / 2));
  const auto fb = forecast_census(base, m->gamma, W, cap_vec, opt);
  const auto fe = forecast_census(edit, m->gamma, W, cap_vec, opt);
  json delta = json::array();
  for (StateId u = 0; u < W; ++u) {
    json days = json::array();
    for (int d = 0; d < kDaysPerWeek; ++d) {
      json cell = {{"mean", fe.at(u, d).total.mean - fb.at(u, d).total.mean}};
      cell["exceedance"] = caps ? json(fe.at(u, d).exceedance - fb.at(u, d).exceedance) : json(nullptr);
      days.push_back(cell);
    }
    delta.push_back({{"ward", m->model.params.states.label(u)}, {"days", days}});
  }
  return {200,
          {{"model_id", m->id},
           {"baseline", forecast_to_json(fb, m->model.params.states, caps.has_value())},
           {"scenario", forecast_to_json(fe, m->model.params.states, caps.has_value())},
           {"delta", delta}}};
}

HttpResponse Service::post_optimize(const json& req) {
  const auto m = model_or_throw(req);
  const std::size_t K = m->model.params.num_clusters();
  const std::size_t W = m->model.params.states.num_transient();
  const auto& h = require(req, "", "hospital");
  HospitalConfig hc;
  hc.capacities = per_ward(require(h, "hospital", "capacities"), "hospital.capacities", W);
  if (h.contains("blocking_limit")) {
    hc.blocking_limit = number(h["blocking_limit"], "hospital.blocking_limit");
    if (!(hc.blocking_limit >= 0.0)) throw BadRequest("hospital.blocking_limit", "must be nonnegative");
  }
  hc.offunit_limit = h.contains("offunit_limit") ? per_ward(h["offunit_limit"], "hospital.offunit_limit", W)
                                                  : std::vector<double>(W, 0.0);
  if (h.contains("eta")) hc.eta = per_ward(h["eta"], "hospital.eta", W);
  hc.mu = h.contains("mu") ? weekly_grid<int>(h["mu"], "hospital.mu", K, true) : std::vector<int>(K * kDaysPerWeek, 0);
  hc.mu_cap = weekly_grid<int>(require(h, "hospital", "mu_cap"), "hospital.mu_cap", K, true);
  if (h.contains("reward")) {
    const auto& r = h["reward"];
    if (!r.is_array() || r.size() != K) throw BadRequest("hospital.reward", "expected " + std::to_string(K) + " entries");
    for (std::size_t k = 0; k < K; ++k) hc.reward.push_back(number(r[k], at_index("hospital.reward", k)));
  }
  hc.n_max_tail = settings_.n_max_tail;
  ArrivalPlan emergency(K);
  if (req.contains("emergency")) emergency.emergency = weekly_grid<double>(req["emergency"], "emergency", K, false);
  SolverOptions sopt;
  sopt.time_limit_seconds = settings_.solver_time_limit;
  if (req.contains("time_limit")) {
    sopt.time_limit_seconds = number(req["time_limit"], "time_limit");
    if (!(sopt.time_limit_seconds > 0.0)) throw BadRequest("time_limit", "must be positive");
  }
  const bool async = req.contains("async") && req["async"].is_boolean() && req["async"].get<bool>();

  auto instance = std::make_shared<ScheduleInstance>(build_instance(m->gamma, emergency, m->gamma, hc));
  auto work = [instance, sopt]() { return solution_to_json(solve_exact(*instance, sopt), *instance); };
  if (!async) {
    json body = work();
    body["model_id"] = m->id;
    return {200, body};
  }
  const std::string id = next_id("j");
  {
    std::lock_guard<std::mutex> lock(mu_);
    jobs_[id] = Job{id, "optimize", "queued", m->id, nullptr, {}};
  }
  enqueue(id, work);
  return {202, {{"job_id", id}, {"status", "queued"}}};
}

void run_server(Service& service, const std::string& host, int port) {
  httplib::Server server;
  auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Post(R"(/.*)", bridge);
  server.Get(R"(/.*)", bridge);
  if (!server.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace csi
