#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csi/model_selection.hpp"
#include "csi/scheduler.hpp"
#include "csi/smm_em.hpp"
#include "csi/synth.hpp"

namespace csi {

/// Hospital used for the scheduling comparison. Capacities are set from the true
/// baseline load: capacity_u = ceil(load_u * headroom_u).
struct HospitalScenario {
  std::vector<int> mu_per_type;            // baseline [type * 7 + day] under the true types
  std::vector<int> cap_per_type;           // daily caps [type * 7 + day]
  std::vector<double> emergency_per_type;  // rates [type * 7 + day]
  std::vector<double> headroom;            // per ward
  double blocking_limit = 1.0;
  double offunit_limit = 0.5;
  double time_limit_seconds = 600.0;  // safety net; node_limit is what normally stops the search
  std::uint64_t node_limit = 20000;
};

HospitalScenario default_k4_hospital();

struct MethodOutcome {
  std::string name;
  std::size_t num_clusters = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<int> planned;        // schedule optimised under the method's estimates
  std::vector<int> executed;       // after repair against the true distributions
  std::size_t removed = 0;         // admissions dropped by the repair
  double throughput = 0.0;         // executed admissions per week
  double throughput_increase = 0.0;   // vs the true baseline volume
  double utilization = 0.0;
  double utilization_increase = 0.0;  // vs the baseline schedule under truth
  std::string solver_status;
};

struct SchedulingStudy {
  double baseline_throughput = 0.0;
  double baseline_utilization = 0.0;
  std::vector<int> capacities;
  std::vector<MethodOutcome> methods;  // optimal, CSI, Markov, k-means, DRG, Gaussian

  const MethodOutcome& find(const std::string& name) const;
};

/// Labels + per-cluster parameters for a clustering method on one dataset.
struct MethodModel {
  std::string name;
  std::vector<ClusterId> labels;
  SmmParams params;
};

/// All six methods on the sampled dataset (truth, CSI, Markov mixture, k-means, DRG, Gaussian).
std::vector<MethodModel> fit_methods(const SampledDataset& ds, const SmmParams& truth, const EmConfig& em,
                                     std::uint64_t seed, std::size_t num_diagnoses);

/// Schedules optimised under each method's estimates, executed under the truth.
SchedulingStudy scheduling_study(const SampledDataset& ds, const SmmParams& truth, const std::vector<MethodModel>& models,
                                 const HospitalScenario& hospital);

/// Estimated component against its matched generating component; both sides use the
/// estimated cluster's responsibility-weighted counts as sample sizes.
struct RecoveryRow {
  ClusterId estimated = 0;
  ClusterId truth = 0;
  double weight_estimated = 0.0;
  double weight_truth = 0.0;
  PairTest test;
};

struct RecoveryReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<RecoveryRow> rows;
};

RecoveryReport parameter_recovery(const EmResult& fitted, const SmmParams& truth, const SampledDataset& ds);

/// Drops admissions one at a time (largest violation reduction first) until the
/// schedule is feasible for the instance; returns the number removed.
std::size_t repair_schedule(std::vector<int>& psi, const ScheduleInstance& instance);

}  // namespace csi
