#include "csi/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "csi/errors.hpp"

namespace csi {

EmpiricalEstimate empirical_estimate(const TrajectoryData& data, const std::vector<ClusterId>& labels,
                                     std::size_t num_clusters) {
  if (labels.size() != data.size()) throw StructuralError("one label per trajectory is required");
  const auto& S = data.states;
  const std::size_t U = S.size();
  const std::size_t nt = S.num_transient();
  const int T = data.max_holding;
  const std::size_t Tz = static_cast<std::size_t>(T);

  std::vector<double> size(num_clusters, 0.0);
  std::vector<double> init(num_clusters * U, 0.0), trans(num_clusters * U * U, 0.0),
      hold(num_clusters * U * U * Tz, 0.0);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const ClusterId k = labels[n];
    if (k >= num_clusters) throw StructuralError("label out of range");
    const auto& y = data.items[n];
    size[k] += 1.0;
    init[k * U + y.visits.front().state] += 1.0;
    for (std::size_t l = 0; l < y.visits.size(); ++l) {
      const StateId u = y.visits[l].state;
      const StateId j = l + 1 < y.visits.size() ? y.visits[l + 1].state : y.exit;
      trans[(k * U + u) * U + j] += 1.0;
      hold[((k * U + u) * U + j) * Tz + static_cast<std::size_t>(y.visits[l].holding - 1)] += 1.0;
    }
  }

  EmpiricalEstimate out;
  out.params = SmmParams(S, T, num_clusters);
  const double N = static_cast<double>(data.size());
  for (ClusterId k = 0; k < num_clusters; ++k) {
    if (size[k] == 0.0) throw ConfigError("cluster " + std::to_string(k) + " has no trajectories");
    auto& c = out.params.components[k];
    c.weight = size[k] / N;
    for (StateId u = 0; u < nt; ++u) c.rho(u) = init[k * U + u] / size[k];
    for (StateId u = 0; u < nt; ++u) {
      double row = 0.0;
      for (StateId j = 0; j < U; ++j) row += trans[(k * U + u) * U + j];
      if (row == 0.0) out.empty_rows.push_back({k, u});
      for (StateId j = 0; j < U; ++j) {
        c.p(u, j) = row > 0.0 ? trans[(k * U + u) * U + j] / row : 1.0 / static_cast<double>(U);
        const double cell = trans[(k * U + u) * U + j];
        if (cell == 0.0) out.empty_holding_cells.push_back({k, u * U + j});
        for (int nu = 1; nu <= T; ++nu)
          c.h(u, j, nu) = cell > 0.0 ? hold[((k * U + u) * U + j) * Tz + static_cast<std::size_t>(nu - 1)] / cell
                                     : 1.0 / static_cast<double>(T);
      }
    }
  }
  return out;
}

std::vector<AttributeRecord> attributes_of(const TrajectoryData& data) {
  std::vector<AttributeRecord> out;
  out.reserve(data.size());
  for (const auto& y : data.items) {
    if (!y.attributes) throw ConfigError("trajectory " + y.id + " has no attribute record");
    out.push_back(*y.attributes);
  }
  return out;
}

std::vector<std::vector<double>> encode_attributes(const std::vector<AttributeRecord>& records,
                                                   std::size_t num_diagnoses) {
  const double n = static_cast<double>(records.size());
  double mean = 0.0, sq = 0.0;
  for (const auto& r : records) mean += r.age;
  mean = records.empty() ? 0.0 : mean / n;
  for (const auto& r : records) sq += (r.age - mean) * (r.age - mean);
  const double sd = records.size() > 1 ? std::sqrt(sq / n) : 0.0;
  std::vector<std::vector<double>> x;
  x.reserve(records.size());
  for (const auto& r : records) {
    if (r.diagnosis < 0 || static_cast<std::size_t>(r.diagnosis) >= num_diagnoses)
      throw ConfigError("diagnosis index outside the declared label set");
    std::vector<double> row(3 + num_diagnoses, 0.0);
    row[0] = sd > 0.0 ? (r.age - mean) / sd : 0.0;
    row[1 + static_cast<std::size_t>(r.sex != 0)] = 1.0;
    row[3 + static_cast<std::size_t>(r.diagnosis)] = 1.0;
    x.push_back(std::move(row));
  }
  return x;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct KmeansRun {
  std::vector<ClusterId> labels;
  double inertia = 0.0;
};

KmeansRun kmeans_once(const std::vector<std::vector<double>>& x, std::size_t K, std::mt19937_64& rng,
                      int max_iter) {
  const std::size_t N = x.size();
  const std::size_t F = x.front().size();
  std::vector<std::vector<double>> centers;
  centers.push_back(x[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(N)) % N]);
  std::vector<double> d2(N, std::numeric_limits<double>::infinity());
  while (centers.size() < K) {
    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      d2[n] = std::min(d2[n], sq_dist(x[n], centers.back()));
      total += d2[n];
    }
    std::size_t pick = N - 1;
    if (total > 0.0) {
      double r = uniform01(rng) * total;
      for (std::size_t n = 0; n < N; ++n) {
        if (r < d2[n]) {
          pick = n;
          break;
        }
        r -= d2[n];
      }
    } else {
      pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(N)) % N;
    }
    centers.push_back(x[pick]);
  }

  KmeansRun run;
  run.labels.assign(N, 0);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = it == 0;
    for (std::size_t n = 0; n < N; ++n) {
      ClusterId best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (ClusterId k = 0; k < K; ++k) {
        const double d = sq_dist(x[n], centers[k]);
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (best != run.labels[n]) changed = true;
      run.labels[n] = best;
    }
    if (!changed) break;
    std::vector<std::vector<double>> sum(K, std::vector<double>(F, 0.0));
    std::vector<double> count(K, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      count[run.labels[n]] += 1.0;
      for (std::size_t f = 0; f < F; ++f) sum[run.labels[n]][f] += x[n][f];
    }
    for (ClusterId k = 0; k < K; ++k) {
      if (count[k] == 0.0) {
        // empty cluster: move it to the point farthest from its center
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t n = 0; n < N; ++n) {
          const double d = sq_dist(x[n], centers[run.labels[n]]);
          if (d > fd) {
            fd = d;
            far = n;
          }
        }
        centers[k] = x[far];
        continue;
      }
      for (std::size_t f = 0; f < F; ++f) centers[k][f] = sum[k][f] / count[k];
    }
  }
  run.inertia = 0.0;
  for (std::size_t n = 0; n < N; ++n) run.inertia += sq_dist(x[n], centers[run.labels[n]]);
  return run;
}

}  // namespace

std::vector<ClusterId> kmeans(const std::vector<std::vector<double>>& x, std::size_t K, std::uint64_t seed,
                              int restarts, int max_iter) {
  if (K == 0) throw ConfigError("K must be >= 1");
  if (K > x.size()) throw ConfigError("K exceeds the number of records");
  KmeansRun best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    auto run = kmeans_once(x, K, rng, max_iter);
    if (run.inertia < best.inertia - 1e-12) best = std::move(run);
  }
  return best.labels;
}

GaussianMixtureFit gaussian_mixture(const std::vector<std::vector<double>>& x, std::size_t K, std::uint64_t seed,
                                    int max_iter) {
  constexpr double kVarFloor = 1e-6;
  if (K == 0) throw ConfigError("K must be >= 1");
  if (K > x.size()) throw ConfigError("K exceeds the number of records");
  const std::size_t N = x.size();
  const std::size_t F = x.front().size();

  auto init = kmeans(x, K, seed, 3);
  std::vector<double> weight(K, 0.0);
  std::vector<std::vector<double>> mean(K, std::vector<double>(F, 0.0)), var(K, std::vector<double>(F, 0.0));
  GaussianMixtureFit out;

  std::vector<double> resp(N * K, 0.0);
  for (std::size_t n = 0; n < N; ++n) resp[n * K + init[n]] = 1.0;

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it <= max_iter; ++it) {
    // M-step
    for (ClusterId k = 0; k < K; ++k) {
      double nk = 0.0;
      std::fill(mean[k].begin(), mean[k].end(), 0.0);
      std::fill(var[k].begin(), var[k].end(), 0.0);
      for (std::size_t n = 0; n < N; ++n) {
        nk += resp[n * K + k];
        for (std::size_t f = 0; f < F; ++f) mean[k][f] += resp[n * K + k] * x[n][f];
      }
      weight[k] = std::max(nk, 1e-12) / static_cast<double>(N);
      for (std::size_t f = 0; f < F; ++f) mean[k][f] = nk > 0.0 ? mean[k][f] / nk : 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f) {
          const double dx = x[n][f] - mean[k][f];
          var[k][f] += resp[n * K + k] * dx * dx;
        }
      for (std::size_t f = 0; f < F; ++f) {
        var[k][f] = nk > 0.0 ? var[k][f] / nk : 1.0;
        if (var[k][f] < kVarFloor) {
          var[k][f] = kVarFloor;
          ++out.floored_variances;
        }
      }
    }
    // E-step
    double ll = 0.0;
    std::vector<double> lp(K);
    for (std::size_t n = 0; n < N; ++n) {
      double mx = -std::numeric_limits<double>::infinity();
      for (ClusterId k = 0; k < K; ++k) {
        double s = std::log(weight[k]);
        for (std::size_t f = 0; f < F; ++f) {
          const double dx = x[n][f] - mean[k][f];
          s += -0.5 * (std::log(2.0 * M_PI * var[k][f]) + dx * dx / var[k][f]);
        }
        lp[k] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (ClusterId k = 0; k < K; ++k) z += std::exp(lp[k] - mx);
      const double lse = mx + std::log(z);
      ll += lse;
      for (ClusterId k = 0; k < K; ++k) resp[n * K + k] = std::exp(lp[k] - lse);
    }
    out.log_likelihood = ll;
    if (std::abs(ll - prev) <= 1e-8 * std::max(1.0, std::abs(ll))) break;
    prev = ll;
  }
  out.labels.assign(N, 0);
  for (std::size_t n = 0; n < N; ++n) {
    ClusterId best = 0;
    for (ClusterId k = 1; k < K; ++k)
      if (resp[n * K + k] > resp[n * K + best]) best = k;
    out.labels[n] = best;
  }
  return out;
}

std::vector<ClusterId> kmeans_attribute_cluster(const std::vector<AttributeRecord>& records, std::size_t K,
                                                std::uint64_t seed, std::size_t num_diagnoses) {
  return kmeans(encode_attributes(records, num_diagnoses), K, seed);
}

GaussianMixtureFit gaussian_attribute_cluster(const std::vector<AttributeRecord>& records, std::size_t K,
                                              std::uint64_t seed, std::size_t num_diagnoses) {
  return gaussian_mixture(encode_attributes(records, num_diagnoses), K, seed);
}

std::vector<ClusterId> drg_cluster(const std::vector<AttributeRecord>& records, std::size_t* num_clusters) {
  std::map<int, ClusterId> index;
  for (const auto& r : records) index.emplace(r.diagnosis, 0);
  ClusterId next = 0;
  for (auto& [dx, id] : index) id = next++;
  if (num_clusters) *num_clusters = index.size();
  std::vector<ClusterId> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(index.at(r.diagnosis));
  return out;
}

EmResult markov_mixture_cluster(const TrajectoryData& data, std::size_t K, const EmConfig& config) {
  EmConfig c = config;
  c.K = K;
  c.m_step.holding_mode = HoldingMode::Shared;
  return fit(data, c);
}

}  // namespace csi
