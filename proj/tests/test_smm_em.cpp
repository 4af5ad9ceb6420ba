#include "doctest.h"

#include <cmath>

#include "csi/errors.hpp"
#include "csi/smm_em.hpp"
#include "support.hpp"

using namespace csi;
using csi::testing::brute_loglik;
using csi::testing::tiny_params;

namespace {

// Counts by walking every path once; hard labels only.
struct NaiveCounts {
  std::vector<double> pi, rho, P, H;
};

NaiveCounts naive_counts(const TrajectoryData& d, const std::vector<ClusterId>& z, std::size_t K) {
  const std::size_t U = d.states.size(), T = static_cast<std::size_t>(d.max_holding);
  NaiveCounts c{std::vector<double>(K), std::vector<double>(K * U), std::vector<double>(K * U * U),
                std::vector<double>(K * U * U * T)};
  for (std::size_t n = 0; n < d.size(); ++n) {
    const auto& y = d.items[n];
    const auto k = z[n];
    c.pi[k] += 1;
    c.rho[k * U + y.visits[0].state] += 1;
    for (std::size_t i = 0; i < y.visits.size(); ++i) {
      const auto u = y.visits[i].state;
      const auto j = i + 1 < y.visits.size() ? y.visits[i + 1].state : y.exit;
      c.P[(k * U + u) * U + j] += 1;
      c.H[((k * U + u) * U + j) * T + static_cast<std::size_t>(y.visits[i].holding - 1)] += 1;
    }
  }
  return c;
}

}  // namespace

TEST_CASE("e_step matches direct Bayes normalisation") {
  const auto p = tiny_params();
  const auto data = csi::testing::sample_from(p, 300, 11);
  const auto omega = e_step(data, p);
  const auto ref = csi::testing::brute_posterior(data, p);
  for (std::size_t n = 0; n < data.size(); ++n)
    for (ClusterId k = 0; k < 2; ++k) CHECK(omega(n, k) == doctest::Approx(ref[n][k]).epsilon(1e-10));
}

TEST_CASE("e_step survives likelihoods far below double range") {
  auto p = tiny_params();
  Trajectory y;
  for (int i = 0; i < 900; ++i) y.visits.push_back({static_cast<StateId>(i % 2), 3});
  y.exit = 2;
  TrajectoryData d;
  d.states = p.states;
  d.max_holding = 3;
  d.items = {y};
  const auto detail = e_step_detail(d, p);
  CHECK(std::isfinite(detail.log_marginal[0]));
  CHECK(detail.omega(0, 0) + detail.omega(0, 1) == doctest::Approx(1.0));
  CHECK(detail.degenerate_rows == 0);
}

TEST_CASE("m_step under hard labels is the smoothed naive count ratio") {
  const auto p = tiny_params();
  std::vector<ClusterId> z;
  const auto data = csi::testing::sample_from(p, 400, 5, &z);
  const auto omega = MembershipMatrix::one_hot(z, 2);
  Hyperparams h = Hyperparams::uniform(0.5);
  const auto est = m_step(data, omega, h);
  const auto c = naive_counts(data, z, 2);
  const std::size_t U = 3, T = 3;
  for (ClusterId k = 0; k < 2; ++k) {
    CHECK(est.components[k].weight == doctest::Approx((c.pi[k] + 0.5) / (400 + 2 * 0.5)));
    const double rho_tot = c.rho[k * U] + c.rho[k * U + 1] + 2 * 0.5;
    CHECK(est.components[k].rho(1) == doctest::Approx((c.rho[k * U + 1] + 0.5) / rho_tot));
    for (StateId u = 0; u < 2; ++u) {
      double row = 0;
      for (StateId j = 0; j < U; ++j) row += c.P[(k * U + u) * U + j] + 0.5;
      for (StateId j = 0; j < U; ++j) {
        CHECK(est.components[k].p(u, j) == doctest::Approx((c.P[(k * U + u) * U + j] + 0.5) / row));
        double ht = 0;
        for (std::size_t v = 0; v < T; ++v) ht += c.H[((k * U + u) * U + j) * T + v] + 0.5;
        for (int v = 1; v <= 3; ++v)
          CHECK(est.components[k].h(u, j, v) ==
                doctest::Approx((c.H[((k * U + u) * U + j) * T + static_cast<std::size_t>(v - 1)] + 0.5) / ht));
      }
    }
  }
}

TEST_CASE("shared holding pools every transition of a cluster") {
  const auto p = tiny_params();
  std::vector<ClusterId> z;
  const auto data = csi::testing::sample_from(p, 300, 8, &z);
  MStepOptions opt;
  opt.holding_mode = HoldingMode::Shared;
  const auto est = m_step(data, MembershipMatrix::one_hot(z, 2), Hyperparams::uniform(1e-14), opt);
  const auto c = naive_counts(data, z, 2);
  for (ClusterId k = 0; k < 2; ++k) {
    std::vector<double> pooled(3, 0.0);
    for (std::size_t cell = 0; cell < 9; ++cell)
      for (std::size_t v = 0; v < 3; ++v) pooled[v] += c.H[(k * 9 + cell) * 3 + v];
    const double tot = pooled[0] + pooled[1] + pooled[2];
    for (StateId u = 0; u < 2; ++u)
      for (StateId j = 0; j < 3; ++j)
        for (int v = 1; v <= 3; ++v) CHECK(est.components[k].h(u, j, v) == doctest::Approx(pooled[static_cast<std::size_t>(v - 1)] / tot));
  }
}

TEST_CASE("q_function is the responsibility-weighted complete-data log posterior") {
  const auto data = csi::testing::sample_from(tiny_params(), 50, 2);
  const Hyperparams h = Hyperparams::uniform(0.3);
  // a MAP update keeps every entry positive, so the prior is finite
  const auto p = m_step(data, e_step(data, tiny_params()), h);
  const auto omega = e_step(data, p);
  double q = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n)
    for (ClusterId k = 0; k < 2; ++k)
      q += omega(n, k) * (std::log(p.components[k].weight) + brute_loglik(data.items[n], p.components[k]));
  double prior = 0.0;
  for (const auto& c : p.components) {
    prior += 0.3 * std::log(c.weight);
    for (StateId u = 0; u < 2; ++u) {
      prior += 0.3 * std::log(c.rho(u));
      for (StateId j = 0; j < 3; ++j) {
        prior += 0.3 * std::log(c.p(u, j));
        for (int v = 1; v <= 3; ++v) prior += 0.3 * std::log(c.h(u, j, v));
      }
    }
  }
  CHECK(log_prior(p, h) == doctest::Approx(prior).epsilon(1e-12));
  CHECK(q_function(data, p, omega, h) == doctest::Approx(q + prior).epsilon(1e-12));
  // a zero entry has no prior density
  CHECK(std::isinf(log_prior(tiny_params(), h)));
}

TEST_CASE("EM never decreases the posterior objective") {
  const auto truth = random_params(3, 4, 6, 21);
  const auto data = csi::testing::sample_from(truth, 500, 4);
  EmConfig cfg;
  cfg.K = 3;
  cfg.max_iter = 40;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto r = run_em(data, random_initial_labels(data.size(), 3, seed), cfg);
    for (std::size_t i = 1; i < r.q_trace.size(); ++i)
      CHECK(r.q_trace[i] >= r.q_trace[i - 1] - 1e-9 * std::abs(r.q_trace[i - 1]));
    CHECK(r.final_q == doctest::Approx(map_objective(data, r.params, resolve_hyper(cfg, data))).epsilon(1e-10));
  }
}

TEST_CASE("fit keeps the best restart and is reproducible") {
  const auto truth = random_params(2, 3, 5, 9);
  const auto data = csi::testing::sample_from(truth, 300, 1);
  EmConfig cfg;
  cfg.K = 2;
  cfg.restarts = 4;
  cfg.max_iter = 20;
  cfg.seed = 17;
  const auto a = fit(data, cfg);
  const auto b = fit(data, cfg);
  CHECK(a.params == b.params);
  REQUIRE(a.restarts.size() == 4);
  for (const auto& r : a.restarts) CHECK(a.final_q >= r.final_q);
  CHECK(a.restarts[a.best_restart].final_q == a.final_q);
}

TEST_CASE("reassignment tolerance stops early") {
  const auto truth = random_params(2, 3, 5, 9);
  const auto data = csi::testing::sample_from(truth, 300, 1);
  EmConfig cfg;
  cfg.K = 2;
  cfg.max_iter = 50;
  cfg.reassignment_tol = 0.01;
  const auto r = run_em(data, random_initial_labels(300, 2, 3), cfg);
  CHECK(r.q_trace.size() < 50);
  CHECK(r.reassignment_trace.back() <= 3);
}

TEST_CASE("initial labels use every cluster") {
  const auto z = random_initial_labels(10, 10, 4);
  std::vector<int> seen(10, 0);
  for (auto k : z) seen[k]++;
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("config validation") {
  EmConfig cfg;
  cfg.K = 5;
  CHECK_THROWS_AS(cfg.check(4), ConfigError);
  cfg.K = 0;
  CHECK_THROWS_AS(cfg.check(4), ConfigError);
  TrajectoryData empty;
  empty.states = StateSpace(1, 1);
  empty.max_holding = 1;
  cfg.K = 1;
  CHECK_THROWS_AS(fit(empty, cfg), ConfigError);
}
