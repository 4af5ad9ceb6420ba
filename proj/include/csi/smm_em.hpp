#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "csi/core_types.hpp"

namespace csi {

/// How responsibilities feed the sufficient statistics.
///  Soft: every cluster receives Omega_nk-weighted counts (the derived MAP-EM update).
///  Hard: counts are routed only to the hard label z_n with weight Omega_{n,z_n}.
enum class CountMode { Soft, Hard };

/// PerTransition is the semi-Markov model. Shared forces a single holding pmf
/// per cluster for every (u, j), i.e. the Markov-mixture baseline.
enum class HoldingMode { PerTransition, Shared };

struct MStepOptions {
  CountMode count_mode = CountMode::Soft;
  HoldingMode holding_mode = HoldingMode::PerTransition;
};

struct EmConfig {
  std::size_t K = 1;
  int max_iter = 50;
  int restarts = 5;
  std::uint64_t seed = 0;
  double epsilon = 1e-5;
  std::optional<Hyperparams> hyper;  // defaults to Hyperparams::from_epsilon
  double reassignment_tol = 0.0;     // 0: always run max_iter iterations
  MStepOptions m_step;

  void check(std::size_t n) const;
};

struct RestartSummary {
  std::uint64_t seed = 0;
  double final_q = 0.0;
  std::vector<ClusterId> assignments;
  std::vector<double> q_trace;
  std::vector<std::size_t> reassignment_trace;
};

struct EmResult {
  SmmParams params;
  MembershipMatrix membership;
  std::vector<double> q_trace;
  std::vector<std::size_t> reassignment_trace;
  double final_q = 0.0;
  std::uint64_t seed_used = 0;
  std::size_t best_restart = 0;
  std::vector<RestartSummary> restarts;
};

struct EStepDetail {
  MembershipMatrix omega;
  std::vector<double> log_marginal;  // log sum_k pi_k p(y_n | k)
  std::size_t degenerate_rows = 0;   // rows where every component gave -inf
};

Hyperparams resolve_hyper(const EmConfig& config, const TrajectoryData& data);

MembershipMatrix e_step(const TrajectoryData& data, const SmmParams& params);
EStepDetail e_step_detail(const TrajectoryData& data, const SmmParams& params);

SmmParams m_step(const TrajectoryData& data, const MembershipMatrix& omega, const Hyperparams& hyper,
                 const MStepOptions& options = {});

/// sum_n sum_k Omega_nk log(pi_k p(y_n|k)) + log prior, Dirichlet normalisers dropped.
double q_function(const TrajectoryData& data, const SmmParams& params,
                  const MembershipMatrix& omega_prev, const Hyperparams& hyper,
                  HoldingMode holding_mode = HoldingMode::PerTransition);

/// sum a * log(x) over every entry; -inf when any entry is zero.
double log_prior(const SmmParams& params, const Hyperparams& hyper,
                 HoldingMode holding_mode = HoldingMode::PerTransition);

/// Posterior objective log p(Y|theta) + log prior; the quantity EM increases.
double map_objective(const TrajectoryData& data, const SmmParams& params, const Hyperparams& hyper,
                     HoldingMode holding_mode = HoldingMode::PerTransition);

/// Random hard labels in [0, K) with every cluster used at least once.
std::vector<ClusterId> random_initial_labels(std::size_t n, std::size_t K, std::uint64_t seed);

/// One EM run from the given initial labels.
EmResult run_em(const TrajectoryData& data, std::vector<ClusterId> initial_labels,
                const EmConfig& config);

/// `config.restarts` runs from random labels; returns the run with the highest final objective.
EmResult fit(const TrajectoryData& data, const EmConfig& config);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace csi
