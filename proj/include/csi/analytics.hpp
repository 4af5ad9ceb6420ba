#pragma once

#include <optional>
#include <vector>

#include "csi/core_types.hpp"

namespace csi {

/// phi(u, j, d): probability of being in j at the end of day d after entering u at
/// time 0, d = 0..d_max. Absorbing rows are identity.
struct IntervalTransition {
  std::size_t num_states = 0;
  int d_max = 0;
  std::vector<double> values;     // [(u * U + j) * (d_max + 1) + d]
  std::vector<double> tail_mass;  // per u: still in a transient state at d_max

  double operator()(StateId u, StateId j, int d) const {
    return values[(u * num_states + j) * static_cast<std::size_t>(d_max + 1) + static_cast<std::size_t>(d)];
  }
};

/// gamma(j, d) = sum_u rho_u phi(u, j, d), d = 0..d_max.
struct Occupancy {
  std::size_t num_states = 0;
  int d_max = 0;
  std::vector<double> values;  // [j * (d_max + 1) + d]

  double operator()(StateId j, int d) const {
    return values[j * static_cast<std::size_t>(d_max + 1) + static_cast<std::size_t>(d)];
  }
};

/// f(u, j, d): first arrival in j exactly d days after entering u; f(., ., 0) = 0.
struct FirstPassage {
  std::size_t num_states = 0;
  int d_max = 0;
  std::vector<double> values;

  double operator()(StateId u, StateId j, int d) const {
    return values[(u * num_states + j) * static_cast<std::size_t>(d_max + 1) + static_cast<std::size_t>(d)];
  }
};

struct LosDistribution {
  int d_max = 0;
  std::vector<double> pmf;                      // index d = 0..d_max, pmf[0] = 0
  double tail_mass = 0.0;                       // 1 - sum(pmf)
  std::vector<std::vector<double>> from_state;  // per transient initial state

  double mean() const;  // truncated at d_max
};

struct WardDaysOptions {
  bool include_day0 = true;  // count the admission day; false sums from d = 1
  double tail_tol = 1e-6;
};

/// Days spent in transient j starting from u. mean is the truncated phi sum.
/// second_moment/variance use the closed form v(2v - 1) and are exact only when
/// the day count is geometric; exact_* come from a renewal system over visits.
struct WardDaysMoments {
  std::size_t num_states = 0;
  std::vector<double> mean;  // U x U, absorbing columns 0
  std::vector<double> second_moment;
  std::vector<double> variance;  // clipped at 0
  std::vector<double> exact_second_moment;
  std::vector<double> exact_variance;
  std::size_t clipped = 0;  // cells where the closed-form variance went negative
  std::vector<double> tail_mass;

  double at(const std::vector<double>& m, StateId u, StateId j) const { return m[u * num_states + j]; }
};

IntervalTransition interval_transition(const SmmParams& params, ClusterId k, int d_max);
Occupancy occupancy(const SmmParams& params, ClusterId k, int d_max);
Occupancy occupancy(const IntervalTransition& phi, const SmmComponent& c);
WardDaysMoments ward_days(const SmmParams& params, ClusterId k, int d_max, const WardDaysOptions& options = {});
FirstPassage first_passage(const SmmParams& params, ClusterId k, int d_max);
LosDistribution total_los(const SmmParams& params, ClusterId k, int d_max);

/// Expected total stay from each transient state, solved exactly (no truncation).
std::vector<double> mean_los_exact(const SmmParams& params, ClusterId k);

/// Smallest d with max over clusters and transient starts of P(still admitted at d) < tol,
/// capped at 4x the empirical 99th percentile when given, and at hard_cap.
int default_d_max(const SmmParams& params, double tol = 1e-6, std::optional<double> empirical_q99 = std::nullopt,
                  int hard_cap = 20000);

}  // namespace csi
