#pragma once

#include <string>
#include <vector>

#include "csi/analytics.hpp"

namespace csi {

constexpr int kDaysPerWeek = 7;

/// Weekly cyclic admissions per patient type: elective counts and emergency rates,
/// both indexed [type * 7 + day], day 0..6.
struct ArrivalPlan {
  std::size_t num_types = 0;
  std::vector<int> elective;
  std::vector<double> emergency;

  ArrivalPlan() = default;
  explicit ArrivalPlan(std::size_t types)
      : num_types(types), elective(types * kDaysPerWeek, 0), emergency(types * kDaysPerWeek, 0.0) {}

  int& psi(std::size_t k, int d) { return elective[k * kDaysPerWeek + static_cast<std::size_t>(d)]; }
  int psi(std::size_t k, int d) const { return elective[k * kDaysPerWeek + static_cast<std::size_t>(d)]; }
  double& lambda(std::size_t k, int d) { return emergency[k * kDaysPerWeek + static_cast<std::size_t>(d)]; }
  double lambda(std::size_t k, int d) const { return emergency[k * kDaysPerWeek + static_cast<std::size_t>(d)]; }

  void check() const;
};

struct DemandCell {
  std::string family;  // "point", "poisson", "poisson-binomial", "convolution"
  std::vector<double> pmf;
  double mean = 0.0;
  double tail_mass = 0.0;

  int n_max() const { return static_cast<int>(pmf.size()) - 1; }
  double exceedance(int capacity) const;  // P(demand > capacity)
};

/// One cell per (transient ward, weekday).
struct DemandDistribution {
  std::size_t num_wards = 0;
  std::vector<DemandCell> cells;  // [u * 7 + d]
  std::vector<DemandCell> hospital;  // per weekday, only filled for emergency demand

  const DemandCell& at(StateId u, int d) const { return cells[u * kDaysPerWeek + static_cast<std::size_t>(d)]; }
};

/// folds[(u * 7) + r] = sum over weeks n >= 0 of gamma(u, 7n + r) for one patient type.
/// Throws HorizonError when the occupancy horizon cuts off more than fold_tol of
/// the weekly residual.
std::vector<double> weekly_folds(const Occupancy& gamma, std::size_t num_wards, double fold_tol = 1e-9);

/// Exact pmf of a sum of independent Bernoulli(q_i) by sequential convolution.
std::vector<double> poisson_binomial(const std::vector<double>& q);

/// Poisson pmf truncated at the 1 - tail quantile.
DemandCell poisson_cell(double mean, double eps_tail);

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b);

struct CensusOptions {
  double eps_tail = 1e-9;
  double fold_tol = 1e-9;
};

/// gamma holds one occupancy per plan type; trials are one Bernoulli per
/// (type, admission day, admission, week offset).
DemandDistribution elective_demand(const ArrivalPlan& plan, const std::vector<Occupancy>& gamma,
                                   std::size_t num_wards, const CensusOptions& options = {});

DemandDistribution emergency_demand(const ArrivalPlan& plan, const std::vector<Occupancy>& gamma,
                                    std::size_t num_wards, const CensusOptions& options = {});

struct WardForecast {
  DemandCell total;
  double elective_mean = 0.0;
  double emergency_mean = 0.0;
  double exceedance = 0.0;  // P(demand > capacity)
};

struct CensusForecast {
  std::size_t num_wards = 0;
  std::vector<WardForecast> cells;  // [u * 7 + d]

  const WardForecast& at(StateId u, int d) const { return cells[u * kDaysPerWeek + static_cast<std::size_t>(d)]; }
};

CensusForecast combined_forecast(const DemandDistribution& elective, const DemandDistribution& emergency,
                                 const std::vector<int>& capacities);

/// Convenience: both demand families and their combination from one plan.
CensusForecast forecast_census(const ArrivalPlan& plan, const std::vector<Occupancy>& gamma, std::size_t num_wards,
                               const std::vector<int>& capacities, const CensusOptions& options = {});

}  // namespace csi
