#pragma once

#include <vector>

#include "csi/core_types.hpp"
#include "csi/smm_em.hpp"

namespace csi {

/// Responsibility-weighted sufficient statistics of one cluster.
struct ClusterCounts {
  double total = 0.0;               // sum_n Omega_nk
  std::vector<double> initial;      // U
  std::vector<double> transitions;  // U x U
  std::vector<double> holding;      // U x U x T

  double row_total(StateId u, std::size_t U) const;
};

std::vector<ClusterCounts> soft_counts(const TrajectoryData& data, const MembershipMatrix& omega);

/// Two-sample chi-square homogeneity test on transition rows, pooled over transient
/// rows. Observed cell counts are row_total * P. Cells whose smaller expected count is
/// below 5 are folded into a catch-all cell per row. p = 1 when no row is testable.
double transition_chisq_test(const std::vector<double>& P_a, const std::vector<double>& row_totals_a,
                             const std::vector<double>& P_b, const std::vector<double>& row_totals_b,
                             std::size_t num_transient, std::size_t num_states);

/// Two-sample KS on pmfs over a common ordered support with the asymptotic
/// Kolmogorov p-value (conservative for discrete data). p = 1 when either size is 0.
double ks_discrete_test(const std::vector<double>& dist_a, const std::vector<double>& dist_b, double n_a,
                        double n_b);

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

struct PairTest {
  ClusterId a = 0;
  ClusterId b = 0;
  double p_rho = 1.0;
  double p_P = 1.0;
  double p_H = 1.0;
  bool merged = false;
};

/// The three tests between component a of pa (sizes counts_a) and component b of pb.
PairTest compare_components(const SmmComponent& ca, const ClusterCounts& counts_a, const SmmComponent& cb,
                            const ClusterCounts& counts_b, const StateSpace& states, int max_holding);

struct RedundancyReport {
  std::vector<PairTest> pairs;
  std::size_t merges = 0;
};

struct MergeResult {
  SmmParams params;
  RedundancyReport report;
};

/// Merges pairs where no test rejects at alpha / #pairs, refitting by one M-step on
/// the pooled responsibilities, until nothing merges. alpha <= 0 disables merging.
MergeResult merge_redundant(const SmmParams& params, const TrajectoryData& data, double alpha,
                            const Hyperparams& hyper, const MStepOptions& m_step = {});

struct ElbowScan {
  std::vector<std::size_t> k_values;
  std::vector<double> q_values;
  std::vector<double> rel_improvements;  // (Q_{i+1} - Q_i) / |Q_i|
  std::size_t chosen_k = 0;
  bool strictly_increasing = true;
  std::vector<EmResult> fits;
};

/// Fits every K in k_values with fresh restarts. chosen_k is the smallest K whose
/// relative gain to the next K is below theta (the last K when none is).
ElbowScan elbow_scan(const TrajectoryData& data, const std::vector<std::size_t>& k_values, const EmConfig& config,
                     double theta = 0.01);

}  // namespace csi
