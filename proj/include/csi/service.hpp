#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "json.hpp"

#include "csi/io.hpp"
#include "csi/scheduler.hpp"
#include "csi/settings.hpp"

namespace csi {

/// Request rejected before any work: carries the JSON path of the bad field.
class BadRequest : public std::invalid_argument {
 public:
  BadRequest(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

/// A fitted model plus the occupancy tables every query needs; immutable once stored.
struct ServedModel {
  std::string id;
  SavedModel model;
  int d_max = 0;
  std::vector<Occupancy> gamma;
};

/// Transport-free request handler; run_server wires it to HTTP.
///   POST /fit            {dataset, config}          -> 202 {job_id, model_id}
///   GET  /jobs/{id}                                 -> job status
///   POST /models         saved-model JSON           -> 201 {model_id}
///   GET  /model/{id}                                -> model summary + params
///   POST /forecast       {model_id, plan, capacities?}
///   POST /whatif         {model_id, baseline, plan, capacities?}
///   POST /optimize       {model_id, hospital, emergency, time_limit?, async?}
class Service {
 public:
  explicit Service(Settings settings = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

  /// Blocks until the job queue is empty and the worker is idle.
  void wait_idle();
  std::string add_model(SavedModel model, std::string id = {});

 private:
  struct Job {
    std::string id;
    std::string kind;    // "fit" or "optimize"
    std::string status;  // "queued", "running", "done", "failed"
    std::string model_id;
    nlohmann::json result;
    std::string error;
  };

  HttpResponse post_fit(const nlohmann::json& req);
  HttpResponse post_models(const nlohmann::json& req);
  HttpResponse get_model(const std::string& id);
  HttpResponse get_job(const std::string& id);
  HttpResponse post_forecast(const nlohmann::json& req);
  HttpResponse post_whatif(const nlohmann::json& req);
  HttpResponse post_optimize(const nlohmann::json& req);

  std::shared_ptr<const ServedModel> model_or_throw(const nlohmann::json& req);
  std::string next_id(const char* prefix);
  void enqueue(const std::string& job_id, std::function<nlohmann::json()> work);
  void worker_loop();

  Settings settings_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, std::shared_ptr<const ServedModel>> models_;
  std::map<std::string, Job> jobs_;
  std::deque<std::pair<std::string, std::function<nlohmann::json()>>> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::size_t counter_ = 0;
  std::thread worker_;
};

nlohmann::json solution_to_json(const ScheduleSolution& sol, const ScheduleInstance& instance);
nlohmann::json forecast_to_json(const CensusForecast& f, const StateSpace& states, bool with_capacity);

/// Blocking HTTP server on host:port.
void run_server(Service& service, const std::string& host, int port);

}  // namespace csi
