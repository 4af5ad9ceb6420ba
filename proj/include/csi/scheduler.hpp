#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csi/census.hpp"

namespace csi {

/// Hospital side of the admission-scheduling problem.
struct HospitalConfig {
  std::vector<double> capacities;  // per ward
  std::vector<double> eta;         // cancellation share per ward; empty -> demand share
  double blocking_limit = 1.0;     // expected blocked emergency patients per week
  std::vector<double> offunit_limit;  // per ward, per day expected off-unit census
  std::vector<int> mu;             // baseline admissions [type * 7 + day]
  std::vector<int> mu_cap;         // daily caps [type * 7 + day]
  std::vector<double> reward;      // per type; empty -> all ones
  double n_max_tail = 1e-6;        // Poisson truncation for the n-sums
};

struct ScheduleInstance {
  std::size_t num_types = 0;
  std::size_t num_wards = 0;
  std::vector<double> capacities;
  std::vector<double> eta;
  double blocking_limit = 0.0;
  std::vector<double> offunit_limit;
  std::vector<int> mu;
  std::vector<int> mu_cap;
  std::vector<double> reward;
  /// folds[k][u * 7 + r]: expected beds in u, r days (mod week) after one type-k admission
  std::vector<std::vector<double>> folds;
  std::vector<std::vector<double>> ward_emergency;      // p_{u,d}(n), [u * 7 + d]
  std::vector<std::vector<double>> hospital_emergency;  // pbar_d(n), [d]

  double total_capacity() const;
  void check() const;
};

/// gamma_elective: occupancy per scheduled type (order of the decision columns).
/// emergency: rates per emergency type with their occupancy in gamma_emergency.
ScheduleInstance build_instance(const std::vector<Occupancy>& gamma_elective, const ArrivalPlan& emergency,
                                const std::vector<Occupancy>& gamma_emergency, const HospitalConfig& hospital);

struct ScheduleMetrics {
  double expected_blocking = 0.0;       // per week
  std::vector<double> offunit;          // [u * 7 + d]
  std::vector<double> elective_load;    // [u * 7 + d]
  double utilization = 0.0;             // mean census / total capacity
  double throughput = 0.0;              // admissions per week
  double objective = 0.0;               // reward-weighted admissions
  bool blocking_ok = true;
  bool offunit_ok = true;
  bool mix_ok = true;
  bool caps_ok = true;

  bool feasible() const { return blocking_ok && offunit_ok && mix_ok && caps_ok; }
};

ScheduleMetrics evaluate_schedule(const std::vector<int>& psi, const ScheduleInstance& instance);

/// Implied blocking variables delta[d][n] and off-unit variables offu[(u*7+d)][n] for psi.
std::vector<std::vector<int>> blocking_variables(const std::vector<int>& psi, const ScheduleInstance& instance);
std::vector<std::vector<int>> offunit_variables(const std::vector<int>& psi, const ScheduleInstance& instance);

struct ScheduleSolution {
  std::string status;  // "optimal", "time_limit", "node_limit", "infeasible"
  std::vector<int> psi;
  std::vector<std::vector<int>> delta;
  std::vector<std::vector<int>> offu;
  double objective = 0.0;
  ScheduleMetrics metrics;
  std::uint64_t nodes = 0;
  double bound = 0.0;
  double gap = 0.0;
  std::string infeasible_family;  // "blocking", "off-unit", "mix" when infeasible
};

struct SolverOptions {
  double time_limit_seconds = 60.0;
  std::uint64_t node_limit = 0;  // 0: none. A node limit alone makes the result reproducible
  bool use_bound = true;  // knapsack bound; off gives plain enumeration with feasibility pruning
};

ScheduleSolution solve_exact(const ScheduleInstance& instance, const SolverOptions& options = {});

}  // namespace csi
