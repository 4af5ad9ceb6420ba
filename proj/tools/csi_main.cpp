#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "csi/analytics.hpp"
#include "csi/errors.hpp"
#include "csi/io.hpp"
#include "csi/model_selection.hpp"
#include "csi/replicate.hpp"
#include "csi/scoring.hpp"
#include "csi/service.hpp"
#include "csi/settings.hpp"
#include "csi/smm_em.hpp"
#include "csi/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace csi;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = ".";
};

Settings settings_for(const Globals& g) {
  Settings s = g.config.empty() ? Settings{} : load_settings(g.config);
  if (g.seed) s.seed = *g.seed;
  return s;
}

fs::path out_dir(const Globals& g) {
  fs::path p(g.out);
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  f.precision(12);
  return f;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

EmConfig em_config(const Settings& s, std::size_t K) {
  EmConfig c;
  c.K = K;
  c.max_iter = s.max_iter;
  c.restarts = s.restarts;
  c.seed = s.seed;
  c.epsilon = s.epsilon;
  c.reassignment_tol = s.reassignment_tol;
  if (s.hard_counts) c.m_step.count_mode = CountMode::Hard;
  return c;
}

// "1..8" or "3"
std::vector<std::size_t> parse_range(const std::string& text) {
  auto to_k = [&](const std::string& t) -> std::size_t {
    std::size_t used = 0;
    long v = -1;
    try {
      v = std::stol(t, &used);
    } catch (const std::exception&) {
    }
    if (used != t.size() || v < 1) throw ConfigError("--range: expected A..B with 1 <= A <= B, got '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  const auto dots = text.find("..");
  const std::size_t a = to_k(dots == std::string::npos ? text : text.substr(0, dots));
  const std::size_t b = dots == std::string::npos ? a : to_k(text.substr(dots + 2));
  if (b < a) throw ConfigError("--range: empty range '" + text + "'");
  std::vector<std::size_t> ks;
  for (std::size_t k = a; k <= b; ++k) ks.push_back(k);
  return ks;
}

void write_labels(const fs::path& p, const TrajectoryData& data, const MembershipMatrix& omega) {
  auto f = open_out(p);
  f << "id,cluster,responsibility\n";
  const auto& z = omega.assignments();
  for (std::size_t n = 0; n < data.size(); ++n) f << data.items[n].id << ',' << z[n] << ',' << omega(n, z[n]) << '\n';
}

void write_em_trace(const fs::path& p, const EmResult& r) {
  auto f = open_out(p);
  f << "restart,seed,iteration,objective,reassignments\n";
  for (std::size_t i = 0; i < r.restarts.size(); ++i) {
    const auto& rs = r.restarts[i];
    for (std::size_t it = 0; it < rs.q_trace.size(); ++it)
      f << i << ',' << rs.seed << ',' << it + 1 << ',' << rs.q_trace[it] << ','
        << (it < rs.reassignment_trace.size() ? std::to_string(rs.reassignment_trace[it]) : "") << '\n';
  }
}

// ---- subcommands --------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario = "k4";
  std::size_t n = 1000;
};

int run_simulate(const Globals& g, const SimulateArgs& a) {
  const Settings s = settings_for(g);
  if (a.scenario != "k4") throw ConfigError("--scenario: only k4 is available");
  const auto ds = sample_dataset(canonical_k4_spec(a.n, s.seed));
  const auto dir = out_dir(g);
  save_trajectories((dir / "trajectories.jsonl").string(), ds.data);
  auto f = open_out(dir / "true_labels.csv");
  f << "id,cluster\n";
  for (std::size_t n = 0; n < ds.data.size(); ++n) f << ds.data.items[n].id << ',' << ds.labels[n] << '\n';
  std::cout << "generated " << ds.generated << " paths, retained " << ds.data.size() << " (" << ds.retention
            << ")\n";
  return 0;
}

struct IngestArgs {
  std::string input;
  std::string grouping;
  double hours_per_unit = 24.0;
  bool in_units = false;
  int max_holding = 0;
};

int run_ingest(const Globals& g, const IngestArgs& a) {
  const auto dir = out_dir(g);
  json report;
  TrajectoryData data;
  if (fs::path(a.input).extension() == ".jsonl") {
    data = load_trajectories(a.input);
    data.check();
    report = {{"records", data.size()}, {"retained", data.size()}, {"retention", 1.0}};
  } else {
    if (a.grouping.empty()) throw ConfigError("--grouping is required for CSV input");
    const auto grouping = WardGrouping::from_json(read_json(a.grouping));
    IngestOptions opt;
    opt.hours_per_unit = a.hours_per_unit;
    opt.timestamps_in_units = a.in_units;
    if (a.max_holding > 0) opt.max_holding = a.max_holding;
    auto r = ingest_adt_file(a.input, grouping, opt);
    data = std::move(r.data);
    report = r.report.to_json();
  }
  save_trajectories((dir / "trajectories.jsonl").string(), data);
  write_json(dir / "ingest_report.json", report);
  std::cout << "retained " << data.size() << " trajectories over " << data.states.num_transient() << " wards\n";
  return 0;
}

struct FitArgs {
  std::string data;
  std::size_t K = 0;
  std::optional<int> restarts;
  std::optional<int> max_iter;
  bool shared_holding = false;
};

int run_fit(const Globals& g, const FitArgs& a) {
  Settings s = settings_for(g);
  if (a.restarts) s.restarts = *a.restarts;
  if (a.max_iter) s.max_iter = *a.max_iter;
  s.check();
  const auto data = load_trajectories(a.data);
  auto cfg = em_config(s, a.K);
  if (a.shared_holding) cfg.m_step.holding_mode = HoldingMode::Shared;
  cfg.check(data.size());
  const auto r = fit(data, cfg);

  SavedModel m;
  m.params = r.params;
  m.meta.config = cfg;
  m.meta.objective = r.final_q;
  m.meta.seed = r.seed_used;
  m.meta.diagnosis_labels = data.diagnosis_labels;
  const auto dir = out_dir(g);
  save_model((dir / "model.json").string(), m);
  write_labels(dir / "labels.csv", data, r.membership);
  write_em_trace(dir / "em_trace.csv", r);
  std::cout << "K=" << a.K << " objective " << r.final_q << " (restart " << r.best_restart << ")\n";
  return 0;
}

struct SelectArgs {
  std::string data;
  std::string range = "1..8";
};

int run_select_k(const Globals& g, const SelectArgs& a) {
  const Settings s = settings_for(g);
  const auto data = load_trajectories(a.data);
  const auto ks = parse_range(a.range);
  const auto cfg = em_config(s, ks.front());
  cfg.check(data.size());
  if (data.size() < ks.back()) throw ConfigError("--range: largest K exceeds the number of trajectories");
  const auto scan = elbow_scan(data, ks, cfg, s.elbow_threshold);

  const auto dir = out_dir(g);
  {
    auto f = open_out(dir / "elbow.csv");
    f << "K,objective,relative_gain\n";
    for (std::size_t i = 0; i < scan.k_values.size(); ++i) {
      f << scan.k_values[i] << ',' << scan.q_values[i] << ',';
      if (i < scan.rel_improvements.size()) f << scan.rel_improvements[i];
      f << '\n';
    }
  }
  std::size_t chosen_index = 0;
  while (scan.k_values[chosen_index] != scan.chosen_k) ++chosen_index;
  const auto& chosen = scan.fits[chosen_index];
  auto hyper_cfg = em_config(s, scan.chosen_k);
  const auto merged = merge_redundant(chosen.params, data, s.merge_alpha, resolve_hyper(hyper_cfg, data));

  json pairs = json::array();
  for (const auto& p : merged.report.pairs)
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"p_rho", p.p_rho}, {"p_P", p.p_P}, {"p_H", p.p_H}, {"merged", p.merged}});
  write_json(dir / "selection.json", {{"k_values", scan.k_values},
                                      {"objective", scan.q_values},
                                      {"chosen_k", scan.chosen_k},
                                      {"strictly_increasing", scan.strictly_increasing},
                                      {"merges", merged.report.merges},
                                      {"final_k", merged.params.num_clusters()},
                                      {"pairs", pairs}});
  SavedModel m;
  m.params = merged.params;
  m.meta.config = hyper_cfg;
  m.meta.objective = chosen.final_q;
  m.meta.seed = chosen.seed_used;
  m.meta.diagnosis_labels = data.diagnosis_labels;
  save_model((dir / "model.json").string(), m);
  std::cout << "chosen K=" << scan.chosen_k << " (after merging: " << merged.params.num_clusters() << ")\n";
  return 0;
}

struct AnalyzeArgs {
  std::string model;
  int horizon = 0;
};

int run_analyze(const Globals& g, const AnalyzeArgs& a) {
  const Settings s = settings_for(g);
  const auto m = load_model(a.model);
  const auto& params = m.params;
  const int d_max = a.horizon > 0 ? a.horizon : default_d_max(params, s.d_max_tail, std::nullopt, s.d_max_hard_cap);
  const std::size_t U = params.num_states();
  const auto& states = params.states;
  const auto dir = out_dir(g);

  auto phi_f = open_out(dir / "phi.csv");
  auto gamma_f = open_out(dir / "occupancy.csv");
  auto fp_f = open_out(dir / "first_passage.csv");
  auto los_f = open_out(dir / "los.csv");
  auto wd_f = open_out(dir / "ward_days.csv");
  phi_f << "cluster,from,to,day,probability\n";
  gamma_f << "cluster,state,day,probability\n";
  fp_f << "cluster,from,to,day,probability\n";
  los_f << "cluster,day,probability\n";
  wd_f << "cluster,from,to,mean,variance,exact_variance\n";
  json summary = {{"d_max", d_max}, {"clusters", json::array()}};

  for (ClusterId k = 0; k < params.num_clusters(); ++k) {
    const auto phi = interval_transition(params, k, d_max);
    const auto gam = occupancy(phi, params.components[k]);
    const auto fp = first_passage(params, k, d_max);
    const auto los = total_los(params, k, d_max);
    const auto wd = ward_days(params, k, d_max);
    for (StateId u = 0; u < states.num_transient(); ++u)
      for (StateId j = 0; j < U; ++j)
        for (int d = 0; d <= d_max; ++d) {
          phi_f << k << ',' << states.label(u) << ',' << states.label(j) << ',' << d << ',' << phi(u, j, d) << '\n';
          fp_f << k << ',' << states.label(u) << ',' << states.label(j) << ',' << d << ',' << fp(u, j, d) << '\n';
        }
    for (StateId j = 0; j < U; ++j)
      for (int d = 0; d <= d_max; ++d) gamma_f << k << ',' << states.label(j) << ',' << d << ',' << gam(j, d) << '\n';
    for (int d = 0; d <= d_max; ++d) los_f << k << ',' << d << ',' << los.pmf[static_cast<std::size_t>(d)] << '\n';
    for (StateId u = 0; u < states.num_transient(); ++u)
      for (StateId j = 0; j < states.num_transient(); ++j)
        wd_f << k << ',' << states.label(u) << ',' << states.label(j) << ',' << wd.at(wd.mean, u, j) << ','
             << wd.at(wd.variance, u, j) << ',' << wd.at(wd.exact_variance, u, j) << '\n';
    summary["clusters"].push_back({{"cluster", k},
                                   {"weight", params.components[k].weight},
                                   {"mean_los", los.mean()},
                                   {"los_tail_mass", los.tail_mass},
                                   {"mean_los_by_start", mean_los_exact(params, k)},
                                   {"variance_clipped_cells", wd.clipped}});
  }
  write_json(dir / "analysis.json", summary);
  std::cout << "tables written to " << dir.string() << " (d_max " << d_max << ")\n";
  return 0;
}

// forecast and optimize go through the same request handler as the HTTP service
json call_service(Service& svc, const std::string& path, const json& body) {
  const auto r = svc.handle("POST", path, body.dump());
  if (r.status >= 500) throw std::runtime_error(r.body.value("error", std::string("internal error")));
  if (r.status >= 400) {
    std::string msg = r.body.value("error", std::string("invalid request"));
    throw ConfigError(msg);
  }
  return r.body;
}

struct ForecastArgs {
  std::string model;
  std::string plan;
};

int run_forecast(const Globals& g, const ForecastArgs& a) {
  Service svc(settings_for(g));
  const std::string id = svc.add_model(load_model(a.model));
  json plan = read_json(a.plan);
  json req = {{"model_id", id}, {"plan", plan}};
  if (plan.is_object() && plan.contains("capacities")) {
    req["capacities"] = plan["capacities"];
    req["plan"].erase("capacities");
  }
  const json body = call_service(svc, "/forecast", req);
  const auto dir = out_dir(g);
  write_json(dir / "forecast.json", body);
  auto f = open_out(dir / "forecast.csv");
  f << "ward,day,mean,elective_mean,emergency_mean,exceedance\n";
  for (const auto& w : body["wards"])
    for (std::size_t d = 0; d < w["days"].size(); ++d) {
      const auto& c = w["days"][d];
      f << w["ward"].get<std::string>() << ',' << d << ',' << c["mean"].get<double>() << ','
        << c["elective_mean"].get<double>() << ',' << c["emergency_mean"].get<double>() << ',';
      if (!c["exceedance"].is_null()) f << c["exceedance"].get<double>();
      f << '\n';
    }
  std::cout << "forecast written to " << (dir / "forecast.json").string() << '\n';
  return 0;
}

struct OptimizeArgs {
  std::string model;
  std::string hospital;
  std::optional<double> time_limit;
};

int run_optimize(const Globals& g, const OptimizeArgs& a) {
  Service svc(settings_for(g));
  const std::string id = svc.add_model(load_model(a.model));
  json h = read_json(a.hospital);
  if (!h.is_object()) throw ConfigError(a.hospital + ": expected an object");
  json req = {{"model_id", id}};
  if (h.contains("hospital")) {
    req["hospital"] = h["hospital"];
    if (h.contains("emergency")) req["emergency"] = h["emergency"];
    if (h.contains("time_limit")) req["time_limit"] = h["time_limit"];
  } else {
    req["hospital"] = h;
  }
  if (a.time_limit) req["time_limit"] = *a.time_limit;
  const json body = call_service(svc, "/optimize", req);
  write_json(out_dir(g) / "solution.json", body);
  std::cout << "status " << body["status"].get<std::string>() << " objective " << body["objective"].get<double>();
  if (body.contains("infeasible_family")) std::cout << " binding " << body["infeasible_family"].get<std::string>();
  std::cout << '\n';
  return 0;
}

struct ReplicateArgs {
  std::string scenario = "k4";
  std::size_t n = 1000;
  std::size_t elbow_max = 8;
  std::uint64_t node_limit = 20000;
};

int run_replicate(const Globals& g, const ReplicateArgs& a) {
  const Settings s = settings_for(g);
  if (a.scenario != "k4") throw ConfigError("--scenario: only k4 is available");
  const auto spec = canonical_k4_spec(a.n, s.seed);
  const auto ds = sample_dataset(spec);
  const auto dir = out_dir(g);
  const std::size_t K = spec.true_params.num_clusters();
  const auto cfg = em_config(s, K);
  cfg.check(ds.data.size());

  // parameter recovery
  const auto fitted = fit(ds.data, cfg);
  const auto rec = parameter_recovery(fitted, spec.true_params, ds);
  {
    auto f = open_out(dir / "table1_recovery.csv");
    f << "estimated,true,weight_estimated,weight_true,p_initial,p_transition,p_holding\n";
    for (const auto& r : rec.rows)
      f << r.estimated << ',' << r.truth << ',' << r.weight_estimated << ',' << r.weight_truth << ','
        << r.test.p_rho << ',' << r.test.p_P << ',' << r.test.p_H << '\n';
  }
  // clustering accuracy per restart
  {
    auto f = open_out(dir / "table2_clustering.csv");
    f << "restart,seed,objective,accuracy,macro_f1,best\n";
    for (std::size_t i = 0; i < fitted.restarts.size(); ++i) {
      const auto& rs = fitted.restarts[i];
      const auto mt = match_labels(rs.assignments, ds.labels, K, K);
      f << i << ',' << rs.seed << ',' << rs.final_q << ',' << mt.accuracy << ',' << mt.macro_f1 << ','
        << (i == fitted.best_restart ? 1 : 0) << '\n';
    }
  }
  write_em_trace(dir / "fig6_em_trace.csv", fitted);

  // elbow
  std::size_t chosen_k = 0;
  if (a.elbow_max > 0) {
    std::vector<std::size_t> ks;
    for (std::size_t k = 1; k <= a.elbow_max; ++k) ks.push_back(k);
    const auto scan = elbow_scan(ds.data, ks, cfg, s.elbow_threshold);
    chosen_k = scan.chosen_k;
    auto f = open_out(dir / "fig5_elbow.csv");
    f << "K,objective\n";
    for (std::size_t i = 0; i < ks.size(); ++i) f << ks[i] << ',' << scan.q_values[i] << '\n';
  }

  // scheduling comparison
  std::size_t num_diagnoses = ds.data.diagnosis_labels.size();
  const auto models = fit_methods(ds, spec.true_params, cfg, s.seed, num_diagnoses);
  auto hospital = default_k4_hospital();
  hospital.node_limit = a.node_limit;
  const auto study = scheduling_study(ds, spec.true_params, models, hospital);
  {
    auto f = open_out(dir / "table3_scheduling.csv");
    f << "method,clusters,accuracy,throughput,throughput_increase,utilization,utilization_increase,removed,"
         "solver_status\n";
    for (const auto& m : study.methods)
      f << m.name << ',' << m.num_clusters << ',' << m.accuracy << ',' << m.throughput << ','
        << m.throughput_increase << ',' << m.utilization << ',' << m.utilization_increase << ',' << m.removed << ','
        << m.solver_status << '\n';
  }
  json summary = {{"seed", s.seed},
                  {"generated", ds.generated},
                  {"retained", ds.data.size()},
                  {"retention", ds.retention},
                  {"accuracy", rec.accuracy},
                  {"objective", fitted.final_q},
                  {"baseline_throughput", study.baseline_throughput},
                  {"capacities", study.capacities},
                  {"settings", settings_to_json(s)}};
  if (a.elbow_max > 0) summary["elbow_k"] = chosen_k;
  write_json(dir / "summary.json", summary);
  std::cout << "retained " << ds.data.size() << ", accuracy " << rec.accuracy;
  if (a.elbow_max > 0) std::cout << ", elbow K=" << chosen_k;
  std::cout << "\n";
  for (const auto& m : study.methods)
    std::cout << "  " << m.name << ": throughput " << m.throughput << " (+" << 100.0 * m.throughput_increase
              << "%)\n";
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> models;
};

int run_serve(const Globals& g, const ServeArgs& a) {
  Service svc(settings_for(g));
  for (const auto& path : a.models) {
    const std::string id = fs::path(path).stem().string();
    svc.add_model(load_model(path), id);
    std::cout << "loaded " << path << " as " << id << '\n';
  }
  std::cout << "listening on " << a.host << ':' << a.port << std::endl;
  run_server(svc, a.host, a.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustering, census forecasting and admission scheduling for patient flow data", "csi"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed (overrides the config file)");
  app.add_option("--config", g.config, "JSON settings file");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Sample a synthetic dataset");
  c_sim->add_option("--scenario", sim.scenario)->capture_default_str();
  c_sim->add_option("-n,--patients", sim.n)->capture_default_str();

  IngestArgs ing;
  auto* c_ing = app.add_subcommand("ingest", "Convert ADT records (CSV) or trajectories (JSONL)");
  c_ing->add_option("input", ing.input)->required();
  c_ing->add_option("--grouping", ing.grouping, "Ward grouping JSON");
  c_ing->add_option("--hours-per-unit", ing.hours_per_unit)->capture_default_str();
  c_ing->add_flag("--units", ing.in_units, "Numeric timestamps are already in time units");
  c_ing->add_option("--max-holding", ing.max_holding);

  FitArgs fa;
  auto* c_fit = app.add_subcommand("fit", "Fit a semi-Markov mixture");
  c_fit->add_option("data", fa.data)->required();
  c_fit->add_option("-K,--clusters", fa.K)->required();
  c_fit->add_option("--restarts", fa.restarts);
  c_fit->add_option("--max-iter", fa.max_iter);
  c_fit->add_flag("--shared-holding", fa.shared_holding, "One holding pmf per cluster (Markov mixture)");

  SelectArgs sel;
  auto* c_sel = app.add_subcommand("select-k", "Elbow scan and redundancy merging");
  c_sel->add_option("data", sel.data)->required();
  c_sel->add_option("--range", sel.range)->capture_default_str();

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze", "Occupancy, first-passage, stay-length and ward-day tables");
  c_an->add_option("model", an.model)->required();
  c_an->add_option("--horizon", an.horizon, "Days to tabulate (default from the model)");

  ForecastArgs fc;
  auto* c_fc = app.add_subcommand("forecast", "Ward census forecast for a weekly admission plan");
  c_fc->add_option("model", fc.model)->required();
  c_fc->add_option("--plan", fc.plan)->required();

  OptimizeArgs op;
  auto* c_op = app.add_subcommand("optimize", "Optimise the weekly elective schedule");
  c_op->add_option("model", op.model)->required();
  c_op->add_option("--hospital", op.hospital)->required();
  c_op->add_option("--time-limit", op.time_limit);

  ReplicateArgs rep;
  auto* c_rep = app.add_subcommand("replicate", "Synthetic experiment suite");
  c_rep->add_option("--scenario", rep.scenario)->capture_default_str();
  c_rep->add_option("-n,--patients", rep.n)->capture_default_str();
  c_rep->add_option("--elbow-max", rep.elbow_max, "Largest K in the elbow scan (0 skips it)")->capture_default_str();
  c_rep->add_option("--node-limit", rep.node_limit)->capture_default_str();

  ServeArgs sv;
  auto* c_sv = app.add_subcommand("serve", "HTTP service");
  c_sv->add_option("--host", sv.host)->capture_default_str();
  c_sv->add_option("--port", sv.port)->capture_default_str();
  c_sv->add_option("--model", sv.models, "Saved model to preload (id = file stem)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto used = app.get_subcommands();
    std::cerr << (used.empty() ? app.help() : used.front()->help());
    return 1;
  }

  try {
    if (*c_sim) return run_simulate(g, sim);
    if (*c_ing) return run_ingest(g, ing);
    if (*c_fit) return run_fit(g, fa);
    if (*c_sel) return run_select_k(g, sel);
    if (*c_an) return run_analyze(g, an);
    if (*c_fc) return run_forecast(g, fc);
    if (*c_op) return run_optimize(g, op);
    if (*c_rep) return run_replicate(g, rep);
    if (*c_sv) return run_serve(g, sv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const StructuralError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const HorizonError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ModelInconsistencyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
