#include "csi/replicate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "csi/analytics.hpp"
#include "csi/baselines.hpp"
#include "csi/errors.hpp"
#include "csi/scoring.hpp"

namespace csi {

namespace {

// Renumber labels to 0..m-1 in order of first use so empty clusters disappear.
std::size_t compact_labels(std::vector<ClusterId>& labels) {
  std::map<ClusterId, ClusterId> remap;
  for (auto& l : labels) {
    auto it = remap.find(l);
    if (it == remap.end()) it = remap.emplace(l, remap.size()).first;
    l = it->second;
  }
  return remap.size();
}

std::vector<Occupancy> occupancies(const SmmParams& params) {
  const int d_max = default_d_max(params, 1e-10);
  std::vector<Occupancy> out;
  for (ClusterId k = 0; k < params.num_clusters(); ++k) out.push_back(occupancy(params, k, d_max));
  return out;
}

double violation(const ScheduleMetrics& m, const ScheduleInstance& in) {
  double v = std::max(0.0, m.expected_blocking - in.blocking_limit);
  for (StateId u = 0; u < in.num_wards; ++u)
    for (int d = 0; d < kDaysPerWeek; ++d)
      v += std::max(0.0, m.offunit[u * kDaysPerWeek + static_cast<std::size_t>(d)] - in.offunit_limit[u]);
  return v;
}

}  // namespace

HospitalScenario default_k4_hospital() {
  HospitalScenario h;
  const std::size_t K = 4;
  h.mu_per_type.assign(K * kDaysPerWeek, 0);
  h.cap_per_type.assign(K * kDaysPerWeek, 0);
  h.emergency_per_type.assign(K * kDaysPerWeek, 1.0);
  for (std::size_t k = 0; k < K; ++k)
    for (int d = 0; d < kDaysPerWeek; ++d) {
      const bool weekday = d < 5;
      h.mu_per_type[k * kDaysPerWeek + static_cast<std::size_t>(d)] = weekday ? 4 : 0;
      h.cap_per_type[k * kDaysPerWeek + static_cast<std::size_t>(d)] = weekday ? 8 : 0;
    }
  h.headroom = {1.25, 1.25, 1.6, 1.6};
  return h;
}

const MethodOutcome& SchedulingStudy::find(const std::string& name) const {
  for (const auto& m : methods)
    if (m.name == name) return m;
  throw ConfigError("no method named " + name);
}

RecoveryReport parameter_recovery(const EmResult& fitted, const SmmParams& truth, const SampledDataset& ds) {
  const std::size_t K = fitted.params.num_clusters();
  const auto match = match_labels(fitted.membership.assignments(), ds.labels, K, truth.num_clusters());
  const auto counts = soft_counts(ds.data, fitted.membership);
  RecoveryReport out;
  out.accuracy = match.accuracy;
  out.macro_f1 = match.macro_f1;
  for (ClusterId k = 0; k < K; ++k) {
    const ClusterId t = match.est_to_true[k];
    if (t >= truth.num_clusters()) continue;
    RecoveryRow row;
    row.estimated = k;
    row.truth = t;
    row.weight_estimated = fitted.params.components[k].weight;
    row.weight_truth = truth.components[t].weight;
    row.test = compare_components(fitted.params.components[k], counts[k], truth.components[t], counts[k],
                                  ds.data.states, ds.data.max_holding);
    out.rows.push_back(row);
  }
  return out;
}

std::vector<MethodModel> fit_methods(const SampledDataset& ds, const SmmParams& truth, const EmConfig& em,
                                     std::uint64_t seed, std::size_t num_diagnoses) {
  const std::size_t K = truth.num_clusters();
  std::vector<MethodModel> out;
  out.push_back({"optimal", ds.labels, truth});

  EmConfig cfg = em;
  cfg.K = K;
  auto csi = fit(ds.data, cfg);
  out.push_back({"CSI", csi.membership.assignments(), csi.params});

  auto markov = markov_mixture_cluster(ds.data, K, cfg);
  out.push_back({"Markov", markov.membership.assignments(), markov.params});

  const auto records = attributes_of(ds.data);
  auto with_empirical = [&](const std::string& name, std::vector<ClusterId> labels) {
    const std::size_t m = compact_labels(labels);
    auto est = empirical_estimate(ds.data, labels, m);
    out.push_back({name, std::move(labels), std::move(est.params)});
  };
  with_empirical("k-means", kmeans_attribute_cluster(records, K, derive_seed(seed, 11), num_diagnoses));
  with_empirical("DRG", drg_cluster(records));
  with_empirical("Gaussian", gaussian_attribute_cluster(records, K, derive_seed(seed, 12), num_diagnoses).labels);
  return out;
}

std::size_t repair_schedule(std::vector<int>& psi, const ScheduleInstance& instance) {
  std::size_t removed = 0;
  auto m = evaluate_schedule(psi, instance);
  while (!(m.blocking_ok && m.offunit_ok)) {
    double best_v = std::numeric_limits<double>::infinity();
    std::size_t best_i = psi.size();
    for (std::size_t i = 0; i < psi.size(); ++i) {
      if (psi[i] == 0) continue;
      --psi[i];
      const double v = violation(evaluate_schedule(psi, instance), instance);
      ++psi[i];
      if (v < best_v - 1e-12) {
        best_v = v;
        best_i = i;
      }
    }
    if (best_i == psi.size()) break;
    --psi[best_i];
    ++removed;
    m = evaluate_schedule(psi, instance);
  }
  return removed;
}

SchedulingStudy scheduling_study(const SampledDataset& ds, const SmmParams& truth,
                                 const std::vector<MethodModel>& models, const HospitalScenario& hospital) {
  const std::size_t Kt = truth.num_clusters();
  const std::size_t W = truth.states.num_transient();
  if (hospital.mu_per_type.size() != Kt * kDaysPerWeek || hospital.cap_per_type.size() != Kt * kDaysPerWeek ||
      hospital.emergency_per_type.size() != Kt * kDaysPerWeek || hospital.headroom.size() != W)
    throw ConfigError("hospital scenario does not match the true model");

  const auto gamma_true = occupancies(truth);
  std::vector<std::vector<double>> true_folds;
  for (const auto& g : gamma_true) true_folds.push_back(weekly_folds(g, W));

  ArrivalPlan emergency(Kt);
  emergency.emergency = hospital.emergency_per_type;

  // size the wards from the true baseline load
  HospitalConfig base;
  base.capacities.assign(W, 1e9);
  base.mu = hospital.mu_per_type;
  base.mu_cap = hospital.cap_per_type;
  base.blocking_limit = hospital.blocking_limit;
  base.offunit_limit.assign(W, hospital.offunit_limit);
  auto probe = build_instance(gamma_true, emergency, gamma_true, base);
  const auto probe_metrics = evaluate_schedule(probe.mu, probe);
  SchedulingStudy study;
  for (StateId u = 0; u < W; ++u) {
    double load = 0.0;
    for (int d = 0; d < kDaysPerWeek; ++d) {
      const std::size_t c = u * kDaysPerWeek + static_cast<std::size_t>(d);
      double em = 0.0;
      for (std::size_t n = 0; n < probe.ward_emergency[c].size(); ++n) em += static_cast<double>(n) * probe.ward_emergency[c][n];
      load += probe_metrics.elective_load[c] + em;
    }
    study.capacities.push_back(static_cast<int>(std::ceil(load / kDaysPerWeek * hospital.headroom[u])));
  }
  base.capacities.assign(study.capacities.begin(), study.capacities.end());
  const auto truth_instance = build_instance(gamma_true, emergency, gamma_true, base);
  base.eta = truth_instance.eta;

  const auto base_metrics = evaluate_schedule(truth_instance.mu, truth_instance);
  study.baseline_throughput = base_metrics.throughput;
  study.baseline_utilization = base_metrics.utilization;

  SolverOptions sopt;
  sopt.time_limit_seconds = hospital.time_limit_seconds;
  sopt.node_limit = hospital.node_limit;

  for (const auto& model : models) {
    const std::size_t Kc = model.params.num_clusters();
    MethodOutcome out;
    out.name = model.name;
    out.num_clusters = Kc;
    const auto match = match_labels(model.labels, ds.labels, Kc, Kt);
    out.accuracy = match.accuracy;
    out.macro_f1 = match.macro_f1;

    // P(c | k) and P(k | c) from the labelled sample
    const auto table = contingency(model.labels, ds.labels, Kc, Kt);
    std::vector<double> col(Kt, 0.0), row(Kc, 0.0);
    for (std::size_t c = 0; c < Kc; ++c)
      for (std::size_t k = 0; k < Kt; ++k) {
        col[k] += table[c * Kt + k];
        row[c] += table[c * Kt + k];
      }

    HospitalConfig cfg = base;
    cfg.mu.assign(Kc * kDaysPerWeek, 0);
    cfg.mu_cap.assign(Kc * kDaysPerWeek, 0);
    for (std::size_t c = 0; c < Kc; ++c)
      for (int d = 0; d < kDaysPerWeek; ++d) {
        double m = 0.0, cap = 0.0;
        for (std::size_t k = 0; k < Kt; ++k) {
          const double share = col[k] > 0.0 ? table[c * Kt + k] / col[k] : 0.0;
          m += share * hospital.mu_per_type[k * kDaysPerWeek + static_cast<std::size_t>(d)];
          cap += share * hospital.cap_per_type[k * kDaysPerWeek + static_cast<std::size_t>(d)];
        }
        cfg.mu[c * kDaysPerWeek + static_cast<std::size_t>(d)] = static_cast<int>(std::lround(m));
        cfg.mu_cap[c * kDaysPerWeek + static_cast<std::size_t>(d)] = static_cast<int>(std::lround(cap));
      }

    const auto estimated = build_instance(occupancies(model.params), emergency, gamma_true, cfg);
    const auto sol = solve_exact(estimated, sopt);
    out.solver_status = sol.status;
    out.planned = sol.psi.empty() ? cfg.mu : sol.psi;

    // the same decisions, with each cluster's admissions carrying its true type mix
    ScheduleInstance actual = estimated;
    for (std::size_t c = 0; c < Kc; ++c) {
      std::fill(actual.folds[c].begin(), actual.folds[c].end(), 0.0);
      for (std::size_t k = 0; k < Kt; ++k) {
        const double share = row[c] > 0.0 ? table[c * Kt + k] / row[c] : 0.0;
        for (std::size_t i = 0; i < actual.folds[c].size(); ++i) actual.folds[c][i] += share * true_folds[k][i];
      }
    }
    out.executed = out.planned;
    out.removed = repair_schedule(out.executed, actual);
    const auto m = evaluate_schedule(out.executed, actual);
    out.throughput = m.throughput;
    out.throughput_increase = (m.throughput - study.baseline_throughput) / study.baseline_throughput;
    out.utilization = m.utilization;
    out.utilization_increase = (m.utilization - study.baseline_utilization) / study.baseline_utilization;
    study.methods.push_back(std::move(out));
  }
  return study;
}

}  // namespace csi
