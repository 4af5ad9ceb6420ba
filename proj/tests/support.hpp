#pragma once

// Independent reference implementations used as oracles by the unit tests and
// the acceptance runner. Nothing here calls the code it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "csi/analytics.hpp"
#include "csi/census.hpp"
#include "csi/core_types.hpp"
#include "csi/scheduler.hpp"
#include "csi/synth.hpp"

namespace csi::testing {

/// log p(y | k) as the literal product rho * prod P * H.
inline double brute_loglik(const Trajectory& y, const SmmComponent& c) {
  double p = c.rho(y.visits.front().state);
  for (std::size_t i = 0; i < y.visits.size(); ++i) {
    const StateId u = y.visits[i].state;
    const StateId j = i + 1 < y.visits.size() ? y.visits[i + 1].state : y.exit;
    p *= c.p(u, j) * c.h(u, j, y.visits[i].holding);
  }
  return std::log(p);
}

/// Posterior responsibilities by direct normalisation (no log-sum-exp).
inline std::vector<std::vector<double>> brute_posterior(const TrajectoryData& data, const SmmParams& params) {
  std::vector<std::vector<double>> out;
  for (const auto& y : data.items) {
    std::vector<double> row;
    for (const auto& c : params.components) row.push_back(c.weight * std::exp(brute_loglik(y, c)));
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    for (auto& x : row) x /= s;
    out.push_back(row);
  }
  return out;
}

/// Small two-ward mixture with hand-picked numbers, T = 3.
inline SmmParams tiny_params() {
  StateSpace s(2, 1, {"A", "B", "X"});
  SmmParams p(s, 3, 2);
  auto& a = p.components[0];
  a.weight = 0.4;
  a.rho(0) = 0.7, a.rho(1) = 0.3;
  a.p(0, 1) = 0.6, a.p(0, 2) = 0.4, a.p(1, 0) = 0.5, a.p(1, 2) = 0.5;
  auto& b = p.components[1];
  b.weight = 0.6;
  b.rho(0) = 0.2, b.rho(1) = 0.8;
  b.p(0, 1) = 0.3, b.p(0, 2) = 0.7, b.p(1, 0) = 0.2, b.p(1, 2) = 0.8;
  const double ha[3] = {0.5, 0.3, 0.2}, hb[3] = {0.1, 0.3, 0.6};
  // a holds short except on A->B, b holds long except on B->A
  for (StateId u = 0; u < 2; ++u)
    for (StateId j = 0; j < 3; ++j)
      for (int v = 1; v <= 3; ++v) {
        a.h(u, j, v) = (u == 0 && j == 1) ? hb[v - 1] : ha[v - 1];
        b.h(u, j, v) = (u == 1 && j == 0) ? ha[v - 1] : hb[v - 1];
      }
  a.set_absorbing_rows(s);
  b.set_absorbing_rows(s);
  return p;
}

inline TrajectoryData sample_from(const SmmParams& params, std::size_t n, std::uint64_t seed,
                                  std::vector<ClusterId>* labels = nullptr) {
  std::mt19937_64 rng(seed);
  std::vector<double> w;
  for (const auto& c : params.components) w.push_back(c.weight);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  TrajectoryData d;
  d.states = params.states;
  d.max_holding = params.max_holding;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = pick(rng);
    auto y = simulate_path(params.components[k], params.states, rng);
    y.id = "s" + std::to_string(i);
    d.items.push_back(std::move(y));
    if (labels) labels->push_back(k);
  }
  return d;
}

/// Sample mean and standard error.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double v = 0.0;
  for (double a : x) v += (a - m) * (a - m);
  v /= std::max(1.0, n - 1.0);
  return {m, std::sqrt(v / n)};
}

/// Binomial-frequency check: |hat - p| within z standard errors of the analytic p.
inline bool within_binomial(double hat, double p, double n, double z = 3.0) {
  const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / n);
  return std::abs(hat - p) <= z * se + 1e-12;
}

/// Pmf of the sum of Bernoulli(q_i) by enumerating all 2^n outcomes.
inline std::vector<double> enumerate_bernoulli_sum(const std::vector<double>& q) {
  const std::size_t n = q.size();
  std::vector<double> pmf(n + 1, 0.0);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double p = 1.0;
    int ones = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) {
        p *= q[i];
        ++ones;
      } else {
        p *= 1.0 - q[i];
      }
    }
    pmf[static_cast<std::size_t>(ones)] += p;
  }
  return pmf;
}

// ---- analytics oracle ------------------------------------------------------------------

struct CellTally {
  std::size_t cells = 0;
  std::size_t passed = 0;
  double pass_rate() const { return cells ? static_cast<double>(passed) / static_cast<double>(cells) : 1.0; }
  void add(bool ok) {
    ++cells;
    passed += ok;
  }
  void merge(const CellTally& o) {
    cells += o.cells;
    passed += o.passed;
  }
};

struct AnalyticsCheck {
  CellTally phi, occupancy, first_passage, los;
  CellTally all() const {
    CellTally t = phi;
    t.merge(occupancy);
    t.merge(first_passage);
    t.merge(los);
    return t;
  }
};

/// Simulates n paths from every transient start (for phi and f) and n paths from
/// rho (for occupancy and total stay) and compares frequencies with the analytic
/// tables cell by cell for d <= d_cut.
inline AnalyticsCheck monte_carlo_analytics(const SmmParams& params, ClusterId k, std::size_t n, int d_cut,
                                            std::uint64_t seed) {
  const auto& c = params.components[k];
  const auto& S = params.states;
  const std::size_t U = S.size(), nt = S.num_transient();
  const int d_max = std::max(d_cut, default_d_max(params, 1e-10));
  const auto phi = interval_transition(params, k, d_max);
  const auto gam = occupancy(phi, c);
  const auto fp = first_passage(params, k, d_max);
  const auto los = total_los(params, k, d_max);
  const std::size_t D = static_cast<std::size_t>(d_cut) + 1;
  const double N = static_cast<double>(n);
  std::mt19937_64 rng(seed);
  AnalyticsCheck out;

  for (StateId u = 0; u < nt; ++u) {
    std::vector<double> loc(U * D, 0.0), first(U * D, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = simulate_path(c, S, rng, u);
      for (std::size_t d = 0; d < D; ++d) loc[location_at(y, static_cast<int>(d)) * D + d] += 1;
      std::vector<bool> seen(U, false);
      int t = y.visits[0].holding;
      for (std::size_t v = 1; v <= y.visits.size(); ++v) {
        const StateId s = v < y.visits.size() ? y.visits[v].state : y.exit;
        if (!seen[s] && t < static_cast<int>(D)) first[s * D + static_cast<std::size_t>(t)] += 1;
        seen[s] = true;
        if (v < y.visits.size()) t += y.visits[v].holding;
      }
    }
    for (StateId j = 0; j < U; ++j)
      for (std::size_t d = 0; d < D; ++d) {
        out.phi.add(within_binomial(loc[j * D + d] / N, phi(u, j, static_cast<int>(d)), N));
        out.first_passage.add(within_binomial(first[j * D + d] / N, fp(u, j, static_cast<int>(d)), N));
      }
  }
  std::vector<double> occ(U * D, 0.0), stay(D, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = simulate_path(c, S, rng);
    for (std::size_t d = 0; d < D; ++d) occ[location_at(y, static_cast<int>(d)) * D + d] += 1;
    const auto L = static_cast<std::size_t>(y.total_los());
    if (L < D) stay[L] += 1;
  }
  for (StateId j = 0; j < U; ++j)
    for (std::size_t d = 0; d < D; ++d)
      out.occupancy.add(within_binomial(occ[j * D + d] / N, gam(j, static_cast<int>(d)), N));
  for (std::size_t d = 0; d < D; ++d) out.los.add(within_binomial(stay[d] / N, los.pmf[d], N));
  return out;
}

// ---- scheduling oracle ------------------------------------------------------------------

inline double positive_ceil(double x) { return std::max(0.0, std::ceil(x - 1e-9)); }

/// Constraint evaluation written directly from the model: expected blocked
/// emergency patients per week and expected off-unit census per (ward, day),
/// with the implied integer blocking and off-unit counts. When monotone is set
/// the counts are replaced by their running maximum over n (the monotone cuts).
struct BruteMetrics {
  double blocking = 0.0;
  std::vector<double> offunit;
  bool feasible = false;
  double objective = 0.0;
};

inline BruteMetrics brute_evaluate(const std::vector<int>& psi, const ScheduleInstance& in, bool monotone) {
  const std::size_t W = in.num_wards;
  std::vector<double> load(W * 7, 0.0);
  for (std::size_t k = 0; k < in.num_types; ++k)
    for (int d2 = 0; d2 < 7; ++d2)
      for (StateId u = 0; u < W; ++u)
        for (int d1 = 0; d1 < 7; ++d1)
          load[u * 7 + static_cast<std::size_t>(d1)] +=
              psi[k * 7 + static_cast<std::size_t>(d2)] * in.folds[k][u * 7 + static_cast<std::size_t>((d1 - d2 + 7) % 7)];
  double Z = 0.0;
  for (double c : in.capacities) Z += c;
  BruteMetrics m;
  for (int d = 0; d < 7; ++d) {
    double day = 0.0;
    for (StateId u = 0; u < W; ++u) day += load[u * 7 + static_cast<std::size_t>(d)];
    double run = 0.0;
    const auto& p = in.hospital_emergency[static_cast<std::size_t>(d)];
    for (std::size_t n = 0; n < p.size(); ++n) {
      double delta = positive_ceil(static_cast<double>(n) + day - Z);
      if (monotone) delta = run = std::max(run, delta);
      m.blocking += p[n] * delta;
    }
  }
  m.offunit.assign(W * 7, 0.0);
  bool ok = m.blocking <= in.blocking_limit + 1e-9;
  for (StateId u = 0; u < W; ++u)
    for (int d = 0; d < 7; ++d) {
      const std::size_t c = u * 7 + static_cast<std::size_t>(d);
      double run = 0.0;
      for (std::size_t n = 0; n < in.ward_emergency[c].size(); ++n) {
        double o = positive_ceil(static_cast<double>(n) + load[c] - in.capacities[u] - in.eta[u] * m.blocking);
        if (monotone) o = run = std::max(run, o);
        m.offunit[c] += in.ward_emergency[c][n] * o;
      }
      if (m.offunit[c] > in.offunit_limit[u] + 1e-9) ok = false;
    }
  for (std::size_t k = 0; k < in.num_types; ++k) {
    int week = 0, base = 0;
    for (int d = 0; d < 7; ++d) {
      week += psi[k * 7 + static_cast<std::size_t>(d)];
      base += in.mu[k * 7 + static_cast<std::size_t>(d)];
    }
    if (week < base) ok = false;
    m.objective += in.reward[k] * week;
  }
  m.feasible = ok;
  return m;
}

struct BruteOptimum {
  bool feasible = false;
  double objective = -std::numeric_limits<double>::infinity();
  std::size_t points = 0;
};

/// Exhaustive search over every psi with 0 <= psi <= mu_cap.
inline BruteOptimum brute_optimum(const ScheduleInstance& in, bool monotone = false) {
  const std::size_t V = in.num_types * 7;
  std::vector<int> psi(V, 0);
  BruteOptimum best;
  for (;;) {
    ++best.points;
    const auto m = brute_evaluate(psi, in, monotone);
    if (m.feasible && m.objective > best.objective) {
      best.objective = m.objective;
      best.feasible = true;
    }
    std::size_t i = 0;
    while (i < V && psi[i] == in.mu_cap[i]) psi[i++] = 0;
    if (i == V) break;
    ++psi[i];
  }
  return best;
}

inline std::vector<double> poisson_pmf(double mean, std::size_t n_max) {
  std::vector<double> p(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n)
    p[n] = std::exp(static_cast<double>(n) * std::log(mean) - mean - std::lgamma(static_cast<double>(n) + 1.0));
  return p;
}

/// Random instance small enough to enumerate (at most max_points schedules).
inline ScheduleInstance random_tiny_instance(std::uint64_t seed, std::size_t max_points = 200000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  ScheduleInstance in;
  in.num_types = 1 + seed % 2;
  in.num_wards = 1 + (seed / 2) % 3;
  const std::size_t V = in.num_types * 7;
  in.mu_cap.assign(V, 0);
  in.mu.assign(V, 0);
  std::size_t points = 1;
  std::vector<std::size_t> order(V);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t v : order) {
    const int cap = static_cast<int>(U01(rng) * 4.0);
    if (points * static_cast<std::size_t>(cap + 1) > max_points) continue;
    points *= static_cast<std::size_t>(cap + 1);
    in.mu_cap[v] = cap;
    if (U01(rng) < 0.2 && cap > 0) in.mu[v] = 1;
  }
  in.reward.clear();
  for (std::size_t k = 0; k < in.num_types; ++k) in.reward.push_back(seed % 3 == 0 ? 1.0 + static_cast<double>(k) : 1.0 + U01(rng));
  for (std::size_t k = 0; k < in.num_types; ++k) {
    std::vector<double> f(in.num_wards * 7);
    for (auto& x : f) x = 0.6 * U01(rng);
    in.folds.push_back(f);
  }
  in.capacities.clear();
  for (std::size_t u = 0; u < in.num_wards; ++u) in.capacities.push_back(std::floor(2.0 + 4.0 * U01(rng)));
  for (std::size_t u = 0; u < in.num_wards; ++u)
    for (int d = 0; d < 7; ++d) in.ward_emergency.push_back(poisson_pmf(0.5 + 2.0 * U01(rng), 14));
  for (int d = 0; d < 7; ++d) in.hospital_emergency.push_back(poisson_pmf(1.0 + 3.0 * U01(rng), 20));
  in.eta.assign(in.num_wards, 1.0 / static_cast<double>(in.num_wards));
  in.blocking_limit = 0.3 + 2.0 * U01(rng);
  in.offunit_limit.assign(in.num_wards, 0.3 + 1.0 * U01(rng));
  return in;
}

}  // namespace csi::testing
