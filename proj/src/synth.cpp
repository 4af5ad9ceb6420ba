#include "csi/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "csi/errors.hpp"
#include "csi/smm_em.hpp"

namespace csi {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t draw_index(std::span<const double> pmf, std::mt19937_64& rng) {
  const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  double x = uniform01(rng) * total;
  std::size_t last = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (pmf[i] <= 0.0) continue;
    last = i;
    if (x < pmf[i]) return i;
    x -= pmf[i];
  }
  return last;
}

std::vector<double> dirichlet(std::size_t n, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  std::vector<double> out(n);
  double s = 0.0;
  for (auto& x : out) {
    x = g(rng);
    s += x;
  }
  for (auto& x : out) x /= s;
  return out;
}

void set_pmf(SmmComponent& c, StateId u, StateId j, const std::vector<double>& pmf) {
  auto dst = c.holding_pmf(u, j);
  std::copy(pmf.begin(), pmf.end(), dst.begin());
}

// Holding pmf for moves into an absorbing state: heavy mass on one day (same-day
// discharge), remainder spread from day 2.
std::vector<double> exit_pmf(double first_mass, double tail_mean, int T) {
  std::vector<double> out(static_cast<std::size_t>(T), 0.0);
  out[0] = first_mass;
  if (T > 1) {
    auto rest = holding_pmf_with_mean(tail_mean, 3.0, T - 1);
    for (int i = 1; i < T; ++i) out[static_cast<std::size_t>(i)] = (1.0 - first_mass) * rest[static_cast<std::size_t>(i - 1)];
  } else {
    out[0] = 1.0;
  }
  return out;
}

}  // namespace

void AttributeSpec::check(std::size_t num_clusters) const {
  if (rows.size() != num_clusters) throw ConfigError("attribute spec needs one row per cluster");
  for (const auto& r : rows) {
    if (!(r.age_sd >= 0.0) || !std::isfinite(r.age_mean)) throw ConfigError("invalid age distribution");
    if (!(r.p_male >= 0.0 && r.p_male <= 1.0)) throw ConfigError("sex probability outside [0,1]");
    if (r.diagnosis.size() != diagnosis_labels.size())
      throw ConfigError("diagnosis pmf does not match the label set");
    double s = 0.0;
    for (double p : r.diagnosis) {
      if (!(p >= 0.0)) throw ConfigError("negative diagnosis probability");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("diagnosis pmf does not sum to 1");
  }
}

void GeneratorSpec::check() const {
  auto v = validate_params(true_params, 1e-9);
  if (!v.empty())
    throw ConfigError("generator parameters invalid: " + v.front().constraint + " constraint off by " +
                      std::to_string(v.front().deviation));
  if (!attributes.rows.empty()) attributes.check(true_params.num_clusters());
  check_absorbing(true_params);
}

std::vector<double> holding_pmf_with_mean(double mean, double shape, int max_holding) {
  if (max_holding < 1) throw ConfigError("max holding must be >= 1");
  if (!(mean >= 1.0)) throw ConfigError("holding mean must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(max_holding), 0.0);
  const double m = mean - 1.0;
  if (m <= 0.0) {
    out[0] = 1.0;
    return out;
  }
  const double p = shape / (shape + m);
  double total = 0.0;
  for (int x = 0; x < max_holding; ++x) {
    const double lp = std::lgamma(x + shape) - std::lgamma(shape) - std::lgamma(x + 1.0) +
                      shape * std::log(p) + x * std::log1p(-p);
    out[static_cast<std::size_t>(x)] = std::exp(lp);
    total += out[static_cast<std::size_t>(x)];
  }
  for (auto& v : out) v /= total;
  return out;
}

SmmParams canonical_k4_params() {
  constexpr int T = 20;
  StateSpace states(4, 1);
  SmmParams params(states, T, 4);
  const StateId D = 4;

  using Row = std::array<double, 5>;
  // A circulates mostly between W3 and W4, B between W1 and W2
  const std::array<Row, 4> PA = {Row{0, .10, .65, .19, .06}, Row{.10, 0, .19, .65, .06},
                                 Row{.10, .19, 0, .65, .06}, Row{.19, .10, .65, 0, .06}};
  const std::array<Row, 4> PB = {Row{0, .65, .19, .10, .06}, Row{.65, 0, .10, .19, .06},
                                 Row{.65, .19, 0, .10, .06}, Row{.19, .65, .10, 0, .06}};
  const std::array<Row, 4> PC = {Row{0, .34, .30, .30, .06}, Row{.30, 0, .30, .34, .06},
                                 Row{.34, .30, 0, .30, .06}, Row{.30, .34, .30, 0, .06}};
  const std::array<double, 4> rhoA = {.55, .20, .15, .10};
  const std::array<double, 4> rhoB = {.10, .15, .20, .55};
  const std::array<double, 4> rhoC = {.25, .25, .25, .25};

  auto mean_a = [](StateId u, StateId j) { return 2.0 + static_cast<double>((u + 2 * j) % 4) * 1.5; };
  // C3 stays long in W1/W2 and short in W3/W4, C4 the reverse: pooled over
  // transitions their holding times look alike, per ward they do not.
  auto mean_b = [](StateId u, StateId j) { return (u < 2 ? 6.0 : 2.0) + 0.5 * static_cast<double>(j % 2); };
  auto mean_c = [](StateId u, StateId j) { return (u < 2 ? 2.0 : 6.0) + 0.5 * static_cast<double>((j + 1) % 2); };

  struct Design {
    const std::array<Row, 4>* P;
    const std::array<double, 4>* rho;
    int hfam;
    double weight;
  };
  const std::array<Design, 4> design = {Design{&PA, &rhoA, 0, 0.17}, Design{&PB, &rhoB, 0, 0.33},
                                        Design{&PC, &rhoC, 1, 0.25}, Design{&PC, &rhoC, 2, 0.25}};

  for (std::size_t k = 0; k < 4; ++k) {
    auto& c = params.components[k];
    const auto& d = design[k];
    c.weight = d.weight;
    for (StateId u = 0; u < 4; ++u) {
      c.rho(u) = (*d.rho)[u];
      for (StateId j = 0; j < 5; ++j) {
        c.p(u, j) = (*d.P)[u][j];
        double mean = d.hfam == 0 ? mean_a(u, j) : d.hfam == 1 ? mean_b(u, j) : mean_c(u, j);
        if (j == D)
          set_pmf(c, u, j, exit_pmf(0.6, mean + 1.0, T));
        else
          set_pmf(c, u, j, holding_pmf_with_mean(mean, 3.0, T));
      }
    }
  }
  return params;
}

AttributeSpec canonical_k4_attributes() {
  AttributeSpec spec;
  spec.diagnosis_labels = {"D1", "D2", "D3"};
  // attributes overlap heavily; diagnosis carries a little of the C1/C2 split
  spec.rows = {AttributeSpecRow{50, 15, 0.6, {0.6, 0.2, 0.2}}, AttributeSpecRow{60, 15, 0.4, {0.2, 0.6, 0.2}},
               AttributeSpecRow{55, 15, 0.5, {0.3, 0.3, 0.4}}, AttributeSpecRow{55, 15, 0.5, {0.3, 0.3, 0.4}}};
  return spec;
}

GeneratorSpec canonical_k4_spec(std::size_t n_patients, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.true_params = canonical_k4_params();
  spec.n_patients = n_patients;
  spec.seed = seed;
  spec.attributes = canonical_k4_attributes();
  return spec;
}

SmmParams random_params(std::size_t num_clusters, std::size_t num_transient, int max_holding,
                        std::uint64_t seed) {
  if (num_clusters < 1 || num_transient < 1) throw ConfigError("random_params needs K >= 1 and a ward");
  std::mt19937_64 rng(derive_seed(seed, 0x5eed));
  StateSpace states(num_transient, 1);
  SmmParams params(states, max_holding, num_clusters);
  const StateId D = num_transient;
  auto w = dirichlet(num_clusters, 4.0, rng);
  for (std::size_t k = 0; k < num_clusters; ++k) {
    auto& c = params.components[k];
    c.weight = w[k];
    auto rho = dirichlet(num_transient, 1.0, rng);
    for (StateId u = 0; u < num_transient; ++u) c.rho(u) = rho[u];
    for (StateId u = 0; u < num_transient; ++u) {
      const double exit = 0.15 + 0.2 * uniform01(rng);
      if (num_transient == 1) {
        c.p(u, D) = 1.0;
      } else {
        auto row = dirichlet(num_transient - 1, 1.0, rng);
        std::size_t i = 0;
        for (StateId j = 0; j < num_transient; ++j)
          if (j != u) c.p(u, j) = (1.0 - exit) * row[i++];
        c.p(u, D) = exit;
      }
      for (StateId j = 0; j <= D; ++j) {
        if (c.p(u, j) <= 0.0) continue;
        const double mean = 1.5 + 4.5 * uniform01(rng);
        set_pmf(c, u, j, holding_pmf_with_mean(mean, 2.0, max_holding));
      }
    }
  }
  return params;
}

void check_absorbing(const SmmParams& params) {
  const auto& S = params.states;
  const std::size_t nt = S.num_transient();
  for (std::size_t k = 0; k < params.num_clusters(); ++k) {
    const auto& c = params.components[k];
    // states that can reach absorption, by backward fixed point
    std::vector<char> good(S.size(), 0);
    for (StateId a = nt; a < S.size(); ++a) good[a] = 1;
    bool changed = true;
    while (changed) {
      changed = false;
      for (StateId u = 0; u < nt; ++u) {
        if (good[u]) continue;
        for (StateId j = 0; j < S.size(); ++j)
          if (c.p(u, j) > 0.0 && good[j]) {
            good[u] = 1;
            changed = true;
            break;
          }
      }
    }
    // forward reach from the initial support
    std::vector<char> seen(S.size(), 0);
    std::vector<StateId> stack;
    for (StateId u = 0; u < nt; ++u)
      if (c.rho(u) > 0.0) {
        seen[u] = 1;
        stack.push_back(u);
      }
    while (!stack.empty()) {
      StateId u = stack.back();
      stack.pop_back();
      if (!good[u])
        throw ModelInconsistencyError("component " + std::to_string(k) + " cannot leave state " +
                                      S.label(u));
      if (S.is_absorbing(u)) continue;
      for (StateId j = 0; j < S.size(); ++j)
        if (c.p(u, j) > 0.0 && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
    }
  }
}

Trajectory simulate_path(const SmmComponent& c, const StateSpace& states, std::mt19937_64& rng,
                         std::optional<StateId> start) {
  const std::size_t U = states.size();
  Trajectory y;
  StateId u = start ? *start : draw_index(c.rho_vector(), rng);
  if (!states.is_transient(u)) throw StructuralError("path must start in a transient state");
  constexpr std::size_t kMaxVisits = 100000;
  while (true) {
    std::span<const double> row(c.trans_vector().data() + u * U, U);
    StateId j = draw_index(row, rng);
    int nu = static_cast<int>(draw_index(c.holding_pmf(u, j), rng)) + 1;
    y.visits.push_back({u, nu});
    if (states.is_absorbing(j)) {
      y.exit = j;
      return y;
    }
    if (y.visits.size() > kMaxVisits)
      throw ModelInconsistencyError("path did not reach an absorbing state");
    u = j;
  }
}

StateId location_at(const Trajectory& y, int d) {
  int t = 0;
  for (const auto& v : y.visits) {
    if (d < t + v.holding) return v.state;
    t += v.holding;
  }
  return y.exit;
}

std::vector<AttributeRecord> assign_attributes(const std::vector<ClusterId>& labels,
                                               const AttributeSpec& spec, std::uint64_t seed) {
  std::vector<AttributeRecord> out;
  out.reserve(labels.size());
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= spec.rows.size()) throw ConfigError("no attribute row for cluster " + std::to_string(labels[n]));
    const auto& row = spec.rows[labels[n]];
    std::mt19937_64 rng(derive_seed(seed, n));
    AttributeRecord r;
    if (row.age_sd > 0.0) {
      std::normal_distribution<double> age(row.age_mean, row.age_sd);
      r.age = age(rng);
    } else {
      r.age = row.age_mean;
    }
    r.sex = uniform01(rng) < row.p_male ? 0 : 1;
    r.diagnosis = static_cast<int>(draw_index(row.diagnosis, rng));
    out.push_back(r);
  }
  return out;
}

SampledDataset sample_dataset(const GeneratorSpec& spec) {
  spec.check();
  const auto& params = spec.true_params;
  std::vector<double> weights;
  for (const auto& c : params.components) weights.push_back(c.weight);

  std::vector<Trajectory> all;
  std::vector<ClusterId> all_labels;
  all.reserve(spec.n_patients);
  for (std::size_t n = 0; n < spec.n_patients; ++n) {
    std::mt19937_64 rng(derive_seed(spec.seed, n));
    ClusterId k = draw_index(weights, rng);
    Trajectory y = simulate_path(params.components[k], params.states, rng);
    y.id = "p" + std::to_string(n);
    all.push_back(std::move(y));
    all_labels.push_back(k);
  }
  if (!spec.attributes.rows.empty()) {
    auto attrs = assign_attributes(all_labels, spec.attributes, derive_seed(spec.seed, 0xa77b));
    for (std::size_t n = 0; n < all.size(); ++n) all[n].attributes = attrs[n];
  }

  SampledDataset out;
  out.data.states = params.states;
  out.data.max_holding = params.max_holding;
  out.data.diagnosis_labels = spec.attributes.diagnosis_labels;
  out.generated = spec.n_patients;
  for (std::size_t n = 0; n < all.size(); ++n) {
    if (all[n].total_los() <= 1) continue;
    out.data.items.push_back(std::move(all[n]));
    out.labels.push_back(all_labels[n]);
  }
  out.retention = spec.n_patients ? static_cast<double>(out.data.size()) / static_cast<double>(spec.n_patients) : 0.0;
  return out;
}

}  // namespace csi
