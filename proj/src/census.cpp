#include "csi/census.hpp"

#include <algorithm>
#include <cmath>

#include "csi/errors.hpp"

namespace csi {

namespace {

constexpr double kTrim = 1e-20;

int weekday_offset(int d1, int d2) { return ((d1 - d2) % kDaysPerWeek + kDaysPerWeek) % kDaysPerWeek; }

void check_gamma(const ArrivalPlan& plan, const std::vector<Occupancy>& gamma, std::size_t num_wards) {
  plan.check();
  if (gamma.size() != plan.num_types)
    throw ConfigError("plan has " + std::to_string(plan.num_types) + " types but " + std::to_string(gamma.size()) +
                      " occupancy tables were given");
  for (const auto& g : gamma)
    if (g.num_states < num_wards) throw StructuralError("occupancy table has fewer states than wards");
}

void drop_trailing(std::vector<double>& pmf) {
  while (pmf.size() > 1 && pmf.back() < kTrim) pmf.pop_back();
}

}  // namespace

void ArrivalPlan::check() const {
  if (elective.size() != num_types * kDaysPerWeek || emergency.size() != num_types * kDaysPerWeek)
    throw StructuralError("arrival plan must hold 7 days per type");
  for (int v : elective)
    if (v < 0) throw ConfigError("elective admissions must be nonnegative");
  for (double v : emergency)
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("emergency rates must be finite and nonnegative");
}

double DemandCell::exceedance(int capacity) const {
  if (capacity < 0) return 1.0;
  double below = 0.0;
  for (int n = 0; n <= capacity && n < static_cast<int>(pmf.size()); ++n) below += pmf[static_cast<std::size_t>(n)];
  return std::clamp(1.0 - below, 0.0, 1.0);
}

std::vector<double> weekly_folds(const Occupancy& gamma, std::size_t num_wards, double fold_tol) {
  std::vector<double> folds(num_wards * kDaysPerWeek, 0.0);
  for (StateId u = 0; u < num_wards; ++u) {
    for (int d = 0; d <= gamma.d_max; ++d) folds[u * kDaysPerWeek + static_cast<std::size_t>(d % kDaysPerWeek)] += gamma(u, d);
    // last day's occupancy bounds what the cut-off weeks could still add per day
    const double last = gamma(u, gamma.d_max);
    if (last > fold_tol)
      throw HorizonError("occupancy horizon " + std::to_string(gamma.d_max) + " leaves ward occupancy " +
                         std::to_string(last) + "; increase d_max");
  }
  return folds;
}

std::vector<double> poisson_binomial(const std::vector<double>& q) {
  std::vector<double> pmf{1.0};
  pmf.reserve(q.size() + 1);
  for (double p : q) {
    if (!(p >= 0.0 && p <= 1.0 + 1e-12))
      throw ModelInconsistencyError("Bernoulli probability " + std::to_string(p) + " outside [0,1]");
    p = std::min(p, 1.0);
    if (p == 0.0) continue;
    pmf.push_back(0.0);
    for (std::size_t i = pmf.size() - 1; i > 0; --i) pmf[i] = pmf[i] * (1.0 - p) + pmf[i - 1] * p;
    pmf[0] *= (1.0 - p);
  }
  return pmf;
}

DemandCell poisson_cell(double mean, double eps_tail) {
  DemandCell c;
  c.family = "poisson";
  c.mean = mean;
  if (!(mean > 0.0)) {
    c.family = "point";
    c.pmf = {1.0};
    c.mean = 0.0;
    return c;
  }
  double cdf = 0.0;
  const double log_mean = std::log(mean);
  for (int n = 0;; ++n) {
    const double p = std::exp(n * log_mean - mean - std::lgamma(n + 1.0));
    c.pmf.push_back(p);
    cdf += p;
    if (cdf >= 1.0 - eps_tail && n >= mean) break;
  }
  c.tail_mass = std::max(0.0, 1.0 - cdf);
  return c;
}

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

DemandDistribution elective_demand(const ArrivalPlan& plan, const std::vector<Occupancy>& gamma,
                                   std::size_t num_wards, const CensusOptions& options) {
  check_gamma(plan, gamma, num_wards);
  DemandDistribution out;
  out.num_wards = num_wards;
  out.cells.resize(num_wards * kDaysPerWeek);
  for (StateId u = 0; u < num_wards; ++u)
    for (int d1 = 0; d1 < kDaysPerWeek; ++d1) {
      std::vector<double> pmf{1.0};
      double mean = 0.0;
      for (std::size_t k = 0; k < plan.num_types; ++k) {
        const auto& g = gamma[k];
        for (int d2 = 0; d2 < kDaysPerWeek; ++d2) {
          const int count = plan.psi(k, d2);
          if (count == 0) continue;
          const int r = weekday_offset(d1, d2);
          for (int day = r; day <= g.d_max; day += kDaysPerWeek) {
            const double q = g(u, day);
            if (q == 0.0) continue;
            if (q > 1.0 + 1e-12) throw ModelInconsistencyError("occupancy probability above 1");
            const double p = std::min(q, 1.0);
            for (int a = 0; a < count; ++a) {
              mean += p;
              pmf.push_back(0.0);
              for (std::size_t i = pmf.size() - 1; i > 0; --i) pmf[i] = pmf[i] * (1.0 - p) + pmf[i - 1] * p;
              pmf[0] *= (1.0 - p);
              drop_trailing(pmf);
            }
          }
          if (g(u, g.d_max) > options.fold_tol)
            throw HorizonError("occupancy horizon too short for the weekly fold; increase d_max");
        }
      }
      auto& cell = out.cells[u * kDaysPerWeek + static_cast<std::size_t>(d1)];
      cell.family = pmf.size() == 1 ? "point" : "poisson-binomial";
      // trim the far tail to eps_tail
      double cdf = 0.0;
      std::size_t keep = pmf.size();
      for (std::size_t n = 0; n < pmf.size(); ++n) {
        cdf += pmf[n];
        if (cdf >= 1.0 - options.eps_tail) {
          keep = n + 1;
          break;
        }
      }
      pmf.resize(keep);
      double total = 0.0;
      for (double x : pmf) total += x;
      cell.tail_mass = std::max(0.0, 1.0 - total);
      cell.pmf = std::move(pmf);
      cell.mean = mean;
    }
  return out;
}

DemandDistribution emergency_demand(const ArrivalPlan& plan, const std::vector<Occupancy>& gamma,
                                    std::size_t num_wards, const CensusOptions& options) {
  check_gamma(plan, gamma, num_wards);
  std::vector<std::vector<double>> folds;
  for (std::size_t k = 0; k < plan.num_types; ++k) {
    bool used = false;
    for (int d = 0; d < kDaysPerWeek; ++d) used = used || plan.lambda(k, d) > 0.0;
    folds.push_back(used ? weekly_folds(gamma[k], num_wards, options.fold_tol)
                         : std::vector<double>(num_wards * kDaysPerWeek, 0.0));
  }
  DemandDistribution out;
  out.num_wards = num_wards;
  out.cells.resize(num_wards * kDaysPerWeek);
  std::vector<double> hospital_mean(kDaysPerWeek, 0.0);
  for (StateId u = 0; u < num_wards; ++u)
    for (int d1 = 0; d1 < kDaysPerWeek; ++d1) {
      double m = 0.0;
      for (std::size_t k = 0; k < plan.num_types; ++k)
        for (int d2 = 0; d2 < kDaysPerWeek; ++d2)
          m += plan.lambda(k, d2) * folds[k][u * kDaysPerWeek + static_cast<std::size_t>(weekday_offset(d1, d2))];
      out.cells[u * kDaysPerWeek + static_cast<std::size_t>(d1)] = poisson_cell(m, options.eps_tail);
      hospital_mean[static_cast<std::size_t>(d1)] += m;
    }
  for (int d = 0; d < kDaysPerWeek; ++d) out.hospital.push_back(poisson_cell(hospital_mean[static_cast<std::size_t>(d)], options.eps_tail));
  return out;
}

CensusForecast combined_forecast(const DemandDistribution& elective, const DemandDistribution& emergency,
                                 const std::vector<int>& capacities) {
  if (elective.num_wards != emergency.num_wards) throw StructuralError("demand tables cover different wards");
  if (capacities.size() != elective.num_wards) throw ConfigError("need one capacity per ward");
  CensusForecast out;
  out.num_wards = elective.num_wards;
  out.cells.resize(elective.cells.size());
  for (StateId u = 0; u < out.num_wards; ++u)
    for (int d = 0; d < kDaysPerWeek; ++d) {
      const auto& e = elective.at(u, d);
      const auto& m = emergency.at(u, d);
      auto& w = out.cells[u * kDaysPerWeek + static_cast<std::size_t>(d)];
      w.total.pmf = convolve(e.pmf, m.pmf);
      w.total.family = (e.family == "point" && m.family == "point") ? "point" : "convolution";
      w.total.mean = e.mean + m.mean;
      double total = 0.0;
      for (double x : w.total.pmf) total += x;
      w.total.tail_mass = std::max(0.0, 1.0 - total);
      w.elective_mean = e.mean;
      w.emergency_mean = m.mean;
      w.exceedance = w.total.exceedance(capacities[u]);
    }
  return out;
}

CensusForecast forecast_census(const ArrivalPlan& plan, const std::vector<Occupancy>& gamma, std::size_t num_wards,
                               const std::vector<int>& capacities, const CensusOptions& options) {
  return combined_forecast(elective_demand(plan, gamma, num_wards, options),
                           emergency_demand(plan, gamma, num_wards, options), capacities);
}

}  // namespace csi
