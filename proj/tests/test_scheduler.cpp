#include "doctest.h"

#include <cmath>

#include "csi/errors.hpp"
#include "csi/replicate.hpp"
#include "csi/scheduler.hpp"
#include "support.hpp"

using namespace csi;
using csi::testing::brute_evaluate;
using csi::testing::brute_optimum;
using csi::testing::random_tiny_instance;

TEST_CASE("caps bind when nothing else does") {
  ScheduleInstance in;
  in.num_types = 1;
  in.num_wards = 1;
  in.capacities = {1e6};
  in.eta = {1.0};
  in.blocking_limit = 1e9;
  in.offunit_limit = {1e9};
  in.mu.assign(7, 0);
  in.mu_cap.assign(7, 3);
  in.reward = {2.0};
  in.folds = {std::vector<double>(7, 0.5)};
  in.ward_emergency.assign(7, {1.0});
  in.hospital_emergency.assign(7, {1.0});
  const auto sol = solve_exact(in);
  CHECK(sol.status == "optimal");
  CHECK(sol.objective == 42.0);
  for (int v : sol.psi) CHECK(v == 3);
}

TEST_CASE("metrics agree with the direct formulas") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = random_tiny_instance(seed);
    std::vector<int> psi = in.mu_cap;
    const auto m = evaluate_schedule(psi, in);
    const auto b = brute_evaluate(psi, in, false);
    CHECK(m.expected_blocking == doctest::Approx(b.blocking).epsilon(1e-12));
    for (std::size_t c = 0; c < b.offunit.size(); ++c) CHECK(m.offunit[c] == doctest::Approx(b.offunit[c]).epsilon(1e-12));
    CHECK(m.feasible() == b.feasible);
  }
}

TEST_CASE("solve_exact matches enumeration on tiny instances") {
  for (std::uint64_t seed = 100; seed < 112; ++seed) {
    const auto in = random_tiny_instance(seed, 20000);
    const auto ref = brute_optimum(in);
    const auto sol = solve_exact(in);
    if (!ref.feasible) {
      CHECK(sol.status == "infeasible");
      CHECK_FALSE(sol.infeasible_family.empty());
      continue;
    }
    CHECK(sol.status == "optimal");
    CHECK(sol.objective == doctest::Approx(ref.objective).epsilon(1e-12));
    CHECK(sol.metrics.feasible());
  }
}

TEST_CASE("implied blocking and off-unit counts are monotone in n") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto in = random_tiny_instance(seed);
    const auto sol = solve_exact(in);
    if (sol.psi.empty()) continue;
    for (const auto& row : sol.delta)
      for (std::size_t n = 1; n < row.size(); ++n) CHECK(row[n] >= row[n - 1]);
    for (const auto& row : sol.offu)
      for (std::size_t n = 1; n < row.size(); ++n) CHECK(row[n] >= row[n - 1]);
  }
}

TEST_CASE("relaxing limits never lowers the optimum") {
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    auto in = random_tiny_instance(seed, 20000);
    const auto a = solve_exact(in);
    in.blocking_limit *= 2.0;
    for (auto& o : in.offunit_limit) o *= 2.0;
    const auto b = solve_exact(in);
    if (a.status == "optimal") {
      REQUIRE(b.status == "optimal");
      CHECK(b.objective >= a.objective);
    }
  }
}

TEST_CASE("plain enumeration and bounded search agree") {
  for (std::uint64_t seed = 40; seed < 46; ++seed) {
    const auto in = random_tiny_instance(seed, 5000);
    SolverOptions plain;
    plain.use_bound = false;
    const auto a = solve_exact(in, plain);
    const auto b = solve_exact(in);
    CHECK(a.status == b.status);
    CHECK(a.objective == b.objective);
  }
}

TEST_CASE("an impossible blocking limit is reported as such") {
  auto in = random_tiny_instance(3);
  in.blocking_limit = 0.0;
  for (auto& c : in.capacities) c = 0.0;
  const auto sol = solve_exact(in);
  CHECK(sol.status == "infeasible");
  CHECK(sol.infeasible_family == "blocking");
  CHECK(sol.psi.empty());
}

TEST_CASE("node limit reports the best schedule found and a gap") {
  const auto in = random_tiny_instance(7, 200000);
  SolverOptions opt;
  opt.node_limit = 3;
  const auto sol = solve_exact(in, opt);
  CHECK((sol.status == "node_limit" || sol.status == "optimal"));
  if (sol.status == "node_limit" && !sol.psi.empty()) {
    CHECK(sol.gap >= 0.0);
    CHECK(sol.metrics.feasible());
  }
}

TEST_CASE("empty type set is trivially feasible") {
  auto in = random_tiny_instance(1);
  in.num_types = 0;
  in.mu.clear();
  in.mu_cap.clear();
  in.reward.clear();
  in.folds.clear();
  const auto sol = solve_exact(in);
  CHECK(sol.status == "optimal");
  CHECK(sol.objective == 0.0);
}

TEST_CASE("build_instance truncation is stable") {
  const auto p = random_params(2, 2, 4, 5);
  const int d = default_d_max(p, 1e-12);
  std::vector<Occupancy> g{occupancy(p, 0, d), occupancy(p, 1, d)};
  ArrivalPlan em(2);
  for (int day = 0; day < 7; ++day) em.lambda(1, day) = 2.0;
  HospitalConfig h;
  h.capacities = {3, 3};
  h.mu_cap.assign(14, 2);
  h.blocking_limit = 5;
  h.offunit_limit = {2, 2};
  const auto a = build_instance(g, em, g, h);
  h.n_max_tail = 1e-12;
  const auto b = build_instance(g, em, g, h);
  std::vector<int> psi(14, 1);
  // the loose instance may only miss what lies beyond its truncation point
  double missed = 0.0;
  for (int day = 0; day < 7; ++day) {
    const auto& pa = a.hospital_emergency[static_cast<std::size_t>(day)];
    const auto& pb = b.hospital_emergency[static_cast<std::size_t>(day)];
    for (std::size_t n = pa.size(); n < pb.size(); ++n) missed += pb[n] * static_cast<double>(n + 50);
  }
  const double gap = std::abs(evaluate_schedule(psi, a).expected_blocking - evaluate_schedule(psi, b).expected_blocking);
  CHECK(missed < 1e-3);
  CHECK(gap <= missed + 1e-12);
  double eta = 0.0;
  for (double e : a.eta) eta += e;
  CHECK(eta == doctest::Approx(1.0));
  h.mu_cap.pop_back();
  CHECK_THROWS_AS(build_instance(g, em, g, h), ConfigError);
}

TEST_CASE("repair drops admissions until the schedule fits") {
  auto in = random_tiny_instance(9);
  std::vector<int> psi = in.mu_cap;
  for (auto& v : psi) v += 3;
  in.mu_cap = psi;
  for (auto& m : in.mu) m = 0;
  const auto removed = repair_schedule(psi, in);
  CHECK(evaluate_schedule(psi, in).feasible());
  int before = 0, after = 0;
  for (int v : in.mu_cap) before += v;
  for (int v : psi) after += v;
  CHECK(static_cast<int>(removed) == before - after);
}
