#include "csi/smm_em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "csi/errors.hpp"

namespace csi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// Trajectories flattened to table offsets: one P index and one H index per visit.
struct Encoded {
  std::size_t U = 0;
  std::size_t T = 0;
  std::vector<std::size_t> first;
  std::vector<std::size_t> begin;  // size N + 1
  std::vector<std::size_t> p_index;
  std::vector<std::size_t> h_index;
};

Encoded encode(const TrajectoryData& data) {
  if (data.max_holding < 1) throw StructuralError("dataset max holding time must be >= 1");
  data.check();
  Encoded e;
  e.U = data.states.size();
  e.T = static_cast<std::size_t>(data.max_holding);
  e.begin.reserve(data.size() + 1);
  e.begin.push_back(0);
  for (const auto& y : data.items) {
    e.first.push_back(y.visits.front().state);
    for (std::size_t l = 0; l < y.visits.size(); ++l) {
      const StateId u = y.visits[l].state;
      const StateId j = l + 1 < y.visits.size() ? y.visits[l + 1].state : y.exit;
      const std::size_t pi = u * e.U + j;
      e.p_index.push_back(pi);
      e.h_index.push_back(pi * e.T + static_cast<std::size_t>(y.visits[l].holding - 1));
    }
    e.begin.push_back(e.p_index.size());
  }
  return e;
}

void check_compatible(const TrajectoryData& data, const SmmParams& params) {
  if (!(data.states == params.states) || data.max_holding != params.max_holding)
    throw StructuralError("dataset and parameters use different state spaces or horizons");
}

// log rho and log(P*H) per cluster, so a trajectory costs one lookup per visit.
struct LogTables {
  std::vector<std::vector<double>> log_rho;
  std::vector<std::vector<double>> log_ph;
  std::vector<double> log_pi;
};

LogTables log_tables(const SmmParams& params) {
  LogTables t;
  const std::size_t U = params.num_states();
  const std::size_t T = static_cast<std::size_t>(params.max_holding);
  for (const auto& c : params.components) {
    t.log_pi.push_back(safe_log(c.weight));
    std::vector<double> lr(U);
    for (std::size_t u = 0; u < U; ++u) lr[u] = safe_log(c.rho(u));
    std::vector<double> lph(U * U * T);
    for (std::size_t pi = 0; pi < U * U; ++pi) {
      const double lp = safe_log(c.trans_vector()[pi]);
      for (std::size_t v = 0; v < T; ++v) lph[pi * T + v] = lp + safe_log(c.hold_vector()[pi * T + v]);
    }
    t.log_rho.push_back(std::move(lr));
    t.log_ph.push_back(std::move(lph));
  }
  return t;
}

double component_loglik(const Encoded& e, const LogTables& t, std::size_t n, std::size_t k) {
  double ll = t.log_rho[k][e.first[n]];
  const auto& lph = t.log_ph[k];
  for (std::size_t i = e.begin[n]; i < e.begin[n + 1]; ++i) ll += lph[e.h_index[i]];
  return std::isnan(ll) ? kNegInf : ll;
}

EStepDetail e_step_encoded(const Encoded& e, const SmmParams& params) {
  const std::size_t N = e.first.size();
  const std::size_t K = params.num_clusters();
  const auto tables = log_tables(params);
  EStepDetail out{MembershipMatrix(N, K), std::vector<double>(N, kNegInf), 0};
  std::vector<double> lw(K);
  for (std::size_t n = 0; n < N; ++n) {
    double mx = kNegInf;
    for (std::size_t k = 0; k < K; ++k) {
      lw[k] = tables.log_pi[k] + component_loglik(e, tables, n, k);
      mx = std::max(mx, lw[k]);
    }
    if (mx == kNegInf) {
      for (std::size_t k = 0; k < K; ++k) out.omega(n, k) = 1.0 / static_cast<double>(K);
      ++out.degenerate_rows;
      continue;
    }
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(lw[k] - mx);
    const double lse = mx + std::log(s);
    out.log_marginal[n] = lse;
    for (std::size_t k = 0; k < K; ++k) out.omega(n, k) = std::exp(lw[k] - lse);
  }
  out.omega.update_assignments();
  return out;
}

SmmParams m_step_encoded(const Encoded& e, const StateSpace& states, int T_int,
                         const MembershipMatrix& omega, const Hyperparams& hyper,
                         const MStepOptions& options) {
  hyper.check();
  const std::size_t N = e.first.size();
  const std::size_t K = omega.cols();
  const std::size_t U = e.U;
  const std::size_t T = e.T;
  const std::size_t Ut = states.num_transient();
  if (omega.rows() != N) throw StructuralError("membership rows do not match the dataset");
  if (K == 0) throw StructuralError("membership matrix has no clusters");

  SmmParams out(states, T_int, K);
  std::vector<double> pi_count(K, 0.0);
  std::vector<std::vector<double>> rho_count(K, std::vector<double>(U, 0.0));
  std::vector<std::vector<double>> p_count(K, std::vector<double>(U * U, 0.0));
  std::vector<std::vector<double>> h_count(K, std::vector<double>(U * U * T, 0.0));

  const bool hard = options.count_mode == CountMode::Hard;
  const auto& z = omega.assignments();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < K; ++k) pi_count[k] += omega(n, k);
    for (std::size_t k = 0; k < K; ++k) {
      if (hard && z[n] != k) continue;
      const double w = omega(n, k);
      if (w == 0.0) continue;
      rho_count[k][e.first[n]] += w;
      for (std::size_t i = e.begin[n]; i < e.begin[n + 1]; ++i) {
        p_count[k][e.p_index[i]] += w;
        h_count[k][e.h_index[i]] += w;
      }
    }
  }

  double pi_total = 0.0;
  for (std::size_t k = 0; k < K; ++k) pi_total += pi_count[k] + hyper.a_pi;
  for (std::size_t k = 0; k < K; ++k) {
    auto& c = out.components[k];
    c.weight = (pi_count[k] + hyper.a_pi) / pi_total;

    double rho_total = 0.0;
    for (std::size_t u = 0; u < Ut; ++u) rho_total += rho_count[k][u] + hyper.a_rho;
    for (std::size_t u = 0; u < Ut; ++u) c.rho(u) = (rho_count[k][u] + hyper.a_rho) / rho_total;

    for (std::size_t u = 0; u < Ut; ++u) {
      double row = 0.0;
      for (std::size_t j = 0; j < U; ++j) row += p_count[k][u * U + j] + hyper.a_P;
      for (std::size_t j = 0; j < U; ++j) c.p(u, j) = (p_count[k][u * U + j] + hyper.a_P) / row;
    }

    if (options.holding_mode == HoldingMode::PerTransition) {
      for (std::size_t u = 0; u < Ut; ++u) {
        for (std::size_t j = 0; j < U; ++j) {
          const double* cnt = &h_count[k][(u * U + j) * T];
          double tot = 0.0;
          for (std::size_t v = 0; v < T; ++v) tot += cnt[v] + hyper.a_H;
          auto pmf = c.holding_pmf(u, j);
          for (std::size_t v = 0; v < T; ++v) pmf[v] = (cnt[v] + hyper.a_H) / tot;
        }
      }
    } else {
      std::vector<double> pooled(T, hyper.a_H);
      for (std::size_t u = 0; u < Ut; ++u)
        for (std::size_t j = 0; j < U; ++j)
          for (std::size_t v = 0; v < T; ++v) pooled[v] += h_count[k][(u * U + j) * T + v];
      const double tot = std::accumulate(pooled.begin(), pooled.end(), 0.0);
      for (auto& x : pooled) x /= tot;
      for (std::size_t u = 0; u < Ut; ++u)
        for (std::size_t j = 0; j < U; ++j) std::copy(pooled.begin(), pooled.end(), c.holding_pmf(u, j).begin());
    }
  }
  return out;
}

double log_prior_impl(const SmmParams& params, const Hyperparams& hyper, HoldingMode mode) {
  const std::size_t U = params.num_states();
  const std::size_t Ut = params.states.num_transient();
  double lp = 0.0;
  for (const auto& c : params.components) {
    lp += hyper.a_pi * safe_log(c.weight);
    for (std::size_t u = 0; u < Ut; ++u) lp += hyper.a_rho * safe_log(c.rho(u));
    for (std::size_t u = 0; u < Ut; ++u)
      for (std::size_t j = 0; j < U; ++j) lp += hyper.a_P * safe_log(c.p(u, j));
    if (mode == HoldingMode::PerTransition) {
      for (std::size_t u = 0; u < Ut; ++u)
        for (std::size_t j = 0; j < U; ++j)
          for (double x : c.holding_pmf(u, j)) lp += hyper.a_H * safe_log(x);
    } else if (Ut > 0) {
      for (double x : c.holding_pmf(0, 0)) lp += hyper.a_H * safe_log(x);
    }
  }
  return lp;
}

double sum_finite_or_neginf(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

void EmConfig::check(std::size_t n) const {
  if (K < 1) throw ConfigError("K must be >= 1");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (n < K) throw ConfigError("need at least K trajectories (N=" + std::to_string(n) +
                               ", K=" + std::to_string(K) + ")");
}

Hyperparams resolve_hyper(const EmConfig& config, const TrajectoryData& data) {
  if (config.hyper) return *config.hyper;
  return Hyperparams::from_epsilon(config.epsilon, data.states.size(), data.max_holding, config.K);
}

MembershipMatrix e_step(const TrajectoryData& data, const SmmParams& params) {
  return e_step_detail(data, params).omega;
}

EStepDetail e_step_detail(const TrajectoryData& data, const SmmParams& params) {
  if (data.empty()) throw ConfigError("e_step needs a non-empty dataset");
  check_compatible(data, params);
  return e_step_encoded(encode(data), params);
}

SmmParams m_step(const TrajectoryData& data, const MembershipMatrix& omega, const Hyperparams& hyper,
                 const MStepOptions& options) {
  return m_step_encoded(encode(data), data.states, data.max_holding, omega, hyper, options);
}

double log_prior(const SmmParams& params, const Hyperparams& hyper, HoldingMode holding_mode) {
  return log_prior_impl(params, hyper, holding_mode);
}

double q_function(const TrajectoryData& data, const SmmParams& params,
                  const MembershipMatrix& omega_prev, const Hyperparams& hyper,
                  HoldingMode holding_mode) {
  check_compatible(data, params);
  if (omega_prev.rows() != data.size() || omega_prev.cols() != params.num_clusters())
    throw StructuralError("membership matrix shape does not match data and params");
  const auto e = encode(data);
  const auto tables = log_tables(params);
  double q = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    for (std::size_t k = 0; k < params.num_clusters(); ++k) {
      const double w = omega_prev(n, k);
      if (w == 0.0) continue;
      q += w * (tables.log_pi[k] + component_loglik(e, tables, n, k));
    }
  }
  return q + log_prior_impl(params, hyper, holding_mode);
}

double map_objective(const TrajectoryData& data, const SmmParams& params, const Hyperparams& hyper,
                     HoldingMode holding_mode) {
  const auto d = e_step_detail(data, params);
  return sum_finite_or_neginf(d.log_marginal) + log_prior_impl(params, hyper, holding_mode);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<ClusterId> random_initial_labels(std::size_t n, std::size_t K, std::uint64_t seed) {
  if (K == 0 || n < K) throw ConfigError("need at least K trajectories to seed K clusters");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ClusterId> z(n);
  std::uniform_int_distribution<std::size_t> pick(0, K - 1);
  for (std::size_t i = 0; i < n; ++i) z[order[i]] = i < K ? i : pick(rng);
  return z;
}

EmResult run_em(const TrajectoryData& data, std::vector<ClusterId> initial_labels,
                const EmConfig& config) {
  config.check(data.size());
  if (initial_labels.size() != data.size()) throw ConfigError("initial labels do not match data size");
  const auto hyper = resolve_hyper(config, data);
  hyper.check();
  const auto enc = encode(data);
  const std::size_t N = data.size();
  const std::size_t K = config.K;

  EmResult res;
  MembershipMatrix omega = MembershipMatrix::uniform(N, K);
  omega.set_assignments(std::move(initial_labels));
  std::vector<ClusterId> z = omega.assignments();

  for (int it = 1; it <= config.max_iter; ++it) {
    // The first pass routes the uniform responsibilities through the random
    // hard labels; that is what breaks the symmetry between clusters.
    MStepOptions opts = config.m_step;
    if (it == 1) opts.count_mode = CountMode::Hard;
    res.params = m_step_encoded(enc, data.states, data.max_holding, omega, hyper, opts);

    auto detail = e_step_encoded(enc, res.params);
    const double q = sum_finite_or_neginf(detail.log_marginal) +
                     log_prior_impl(res.params, hyper, config.m_step.holding_mode);
    std::size_t changed = 0;
    for (std::size_t n = 0; n < N; ++n) changed += detail.omega.assignments()[n] != z[n];
    z = detail.omega.assignments();
    omega = std::move(detail.omega);

    res.q_trace.push_back(q);
    res.reassignment_trace.push_back(changed);
    if (config.reassignment_tol > 0.0 &&
        static_cast<double>(changed) <= config.reassignment_tol * static_cast<double>(N))
      break;
  }
  res.membership = std::move(omega);
  res.final_q = res.q_trace.back();
  res.seed_used = config.seed;
  res.restarts.push_back({config.seed, res.final_q, res.membership.assignments(), res.q_trace,
                          res.reassignment_trace});
  return res;
}

EmResult fit(const TrajectoryData& data, const EmConfig& config) {
  config.check(data.size());
  EmResult best;
  std::vector<RestartSummary> summaries;
  bool have_best = false;
  for (int r = 0; r < config.restarts; ++r) {
    EmConfig run_cfg = config;
    run_cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
    auto res = run_em(data, random_initial_labels(data.size(), config.K, run_cfg.seed), run_cfg);
    summaries.push_back(res.restarts.front());
    if (!have_best || res.final_q > best.final_q) {
      best = std::move(res);
      best.best_restart = static_cast<std::size_t>(r);
      have_best = true;
    }
  }
  best.restarts = std::move(summaries);
  return best;
}

}  // namespace csi
