#include "doctest.h"

#include <cmath>

#include "csi/analytics.hpp"
#include "csi/errors.hpp"
#include "csi/synth.hpp"
#include "support.hpp"

using namespace csi;
using csi::testing::tiny_params;

TEST_CASE("interval transitions are distributions over states") {
  const auto p = random_params(2, 3, 5, 4);
  const auto phi = interval_transition(p, 1, 60);
  for (StateId u = 0; u < 3; ++u)
    for (int d = 0; d <= 60; ++d) {
      double s = 0.0;
      for (StateId j = 0; j < 4; ++j) s += phi(u, j, d);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  CHECK(phi(3, 3, 17) == 1.0);
  CHECK(phi(0, 0, 0) == 1.0);
}

TEST_CASE("one-ward chain has closed-form occupancy") {
  // single ward, leave after exactly 3 days
  StateSpace s(1, 1);
  SmmParams p(s, 3, 1);
  auto& c = p.components[0];
  c.weight = 1.0;
  c.rho(0) = 1.0;
  c.p(0, 1) = 1.0;
  c.h(0, 1, 3) = 1.0;
  const auto phi = interval_transition(p, 0, 6);
  for (int d = 0; d <= 6; ++d) CHECK(phi(0, 0, d) == (d < 3 ? 1.0 : 0.0));
  const auto f = first_passage(p, 0, 6);
  CHECK(f(0, 1, 3) == 1.0);
  CHECK(f(0, 1, 0) == 0.0);
  const auto L = total_los(p, 0, 6);
  CHECK(L.pmf[3] == 1.0);
  CHECK(L.mean() == 3.0);
  const auto wd = ward_days(p, 0, 6);
  CHECK(wd.at(wd.mean, 0, 0) == doctest::Approx(3.0));
  CHECK(wd.at(wd.exact_variance, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("geometric day counts make the closed-form variance exact") {
  // one-day holds and a constant self-return probability: days in the ward are geometric
  StateSpace s(1, 1);
  SmmParams p(s, 1, 1);
  auto& c = p.components[0];
  c.weight = 1.0;
  c.rho(0) = 1.0;
  c.p(0, 0) = 0.6;
  c.p(0, 1) = 0.4;
  c.h(0, 0, 1) = 1.0;
  c.h(0, 1, 1) = 1.0;
  const auto wd = ward_days(p, 0, 200);
  CHECK(wd.at(wd.mean, 0, 0) == doctest::Approx(2.5).epsilon(1e-9));
  CHECK(wd.at(wd.variance, 0, 0) == doctest::Approx(wd.at(wd.exact_variance, 0, 0)).epsilon(1e-8));
  CHECK(wd.at(wd.exact_variance, 0, 0) == doctest::Approx(0.6 / (0.4 * 0.4)).epsilon(1e-9));
}

TEST_CASE("ward days add up to the mean stay") {
  const auto p = random_params(3, 4, 6, 12);
  for (ClusterId k = 0; k < 3; ++k) {
    const int d_max = default_d_max(p, 1e-12);
    const auto wd = ward_days(p, k, d_max);
    const auto exact = mean_los_exact(p, k);
    for (StateId u = 0; u < 4; ++u) {
      double s = 0.0;
      for (StateId j = 0; j < 4; ++j) s += wd.at(wd.mean, u, j);
      CHECK(s == doctest::Approx(exact[u]).epsilon(1e-8));
    }
    const auto L = total_los(p, k, d_max);
    double mean = 0.0;
    for (StateId u = 0; u < 4; ++u) mean += p.components[k].rho(u) * exact[u];
    CHECK(L.mean() == doctest::Approx(mean).epsilon(1e-8));
  }
}

TEST_CASE("exact ward-day variance matches simulation") {
  const auto p = tiny_params();
  const auto wd = ward_days(p, 1, 400);
  std::mt19937_64 rng(5);
  std::vector<double> days;
  for (int i = 0; i < 40000; ++i) {
    const auto y = simulate_path(p.components[1], p.states, rng, StateId{0});
    double t = 0;
    for (const auto& v : y.visits)
      if (v.state == 1) t += v.holding;
    days.push_back(t);
  }
  const auto ms = csi::testing::mean_se(days);
  CHECK(std::abs(ms.mean - wd.at(wd.mean, 0, 1)) < 4 * ms.se);
  double var = 0.0;
  for (double x : days) var += (x - ms.mean) * (x - ms.mean);
  var /= static_cast<double>(days.size() - 1);
  CHECK(var == doctest::Approx(wd.at(wd.exact_variance, 0, 1)).epsilon(0.05));
}

TEST_CASE("analytic tables agree with simulated frequencies") {
  const auto p = random_params(1, 3, 4, 33);
  const auto r = csi::testing::monte_carlo_analytics(p, 0, 20000, 20, 2);
  CHECK(r.phi.pass_rate() >= 0.95);
  CHECK(r.first_passage.pass_rate() >= 0.95);
  CHECK(r.occupancy.pass_rate() >= 0.95);
  CHECK(r.los.pass_rate() >= 0.95);
}

TEST_CASE("horizon checks") {
  const auto p = tiny_params();
  CHECK_THROWS_AS(interval_transition(p, 0, 0), ConfigError);
  CHECK_THROWS_AS(interval_transition(p, 5, 10), StructuralError);
  CHECK_THROWS_AS(ward_days(p, 0, 3), HorizonError);
  const int d = default_d_max(p, 1e-6);
  const auto phi = interval_transition(p, 0, d);
  for (double t : phi.tail_mass) CHECK(t < 1e-6);
  const auto phi_short = interval_transition(p, 0, d - 1);
  double worst = 0.0;
  for (double t : phi_short.tail_mass) worst = std::max(worst, t);
  CHECK(worst >= 1e-6);
  CHECK(default_d_max(p, 1e-6, 2.0) <= 8);
}
