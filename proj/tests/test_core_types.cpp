#include "doctest.h"

#include <cmath>

#include "csi/core_types.hpp"
#include "csi/errors.hpp"
#include "support.hpp"

using namespace csi;
using csi::testing::tiny_params;

TEST_CASE("state space orders transient ids before absorbing ids") {
  StateSpace s(3, 2);
  CHECK(s.size() == 5);
  CHECK(s.is_transient(2));
  CHECK(s.is_absorbing(3));
  CHECK_FALSE(s.is_absorbing(5));
  CHECK(s.label(0) == "W1");
  REQUIRE(s.find("W2").has_value());
  CHECK(*s.find("W2") == 1);
  CHECK_FALSE(s.find("nope").has_value());
  CHECK_THROWS_AS(StateSpace(2, 0), StructuralError);
}

TEST_CASE("trajectory checks reject bad states and holding times") {
  StateSpace s(2, 1);
  Trajectory y;
  y.visits = {{0, 2}, {1, 1}};
  y.exit = 2;
  CHECK_NOTHROW(check_trajectory(y, s, 3));
  CHECK(y.total_los() == 3);
  auto bad = y;
  bad.visits[0].holding = 4;
  CHECK_THROWS_AS(check_trajectory(bad, s, 3), StructuralError);
  bad = y;
  bad.exit = 1;
  CHECK_THROWS_AS(check_trajectory(bad, s, 3), StructuralError);
  bad = y;
  bad.visits[1].state = 2;
  CHECK_THROWS_AS(check_trajectory(bad, s, 3), StructuralError);
}

TEST_CASE("validate_params flags each broken simplex") {
  auto p = tiny_params();
  CHECK(validate_params(p, 1e-12).empty());
  p.components[0].p(0, 1) += 0.1;
  p.components[1].weight = 0.5;
  const auto v = validate_params(p, 1e-9);
  bool saw_p = false, saw_pi = false;
  for (const auto& x : v) {
    saw_p |= x.constraint == "P" && x.cluster == 0 && x.u == 0;
    saw_pi |= x.constraint == "pi";
  }
  CHECK(saw_p);
  CHECK(saw_pi);
}

TEST_CASE("log likelihood equals the literal product") {
  const auto p = tiny_params();
  const auto data = csi::testing::sample_from(p, 200, 3);
  for (const auto& y : data.items)
    for (ClusterId k = 0; k < 2; ++k)
      CHECK(log_trajectory_likelihood(y, k, p) == doctest::Approx(csi::testing::brute_loglik(y, p.components[k])).epsilon(1e-12));
}

TEST_CASE("impossible paths get -infinity") {
  auto p = tiny_params();
  p.components[0].p(0, 1) = 0.0;
  p.components[0].p(0, 2) = 1.0;
  Trajectory y;
  y.visits = {{0, 1}, {1, 1}};
  y.exit = 2;
  CHECK(std::isinf(log_trajectory_likelihood(y, 0, p)));
  CHECK(std::isfinite(log_trajectory_likelihood(y, 1, p)));
}

TEST_CASE("hyperparameters spread epsilon over tensor sizes") {
  const auto h = Hyperparams::from_epsilon(1.0, 5, 10, 4);
  CHECK(h.a_pi == doctest::Approx(1.0 / 4));
  CHECK(h.a_rho == doctest::Approx(1.0 / 20));
  CHECK(h.a_P == doctest::Approx(1.0 / 100));
  CHECK(h.a_H == doctest::Approx(1.0 / 1000));
}

TEST_CASE("membership argmax breaks ties toward the lowest index") {
  MembershipMatrix m(2, 3);
  m(0, 0) = 0.2, m(0, 1) = 0.4, m(0, 2) = 0.4;
  m(1, 2) = 1.0;
  m.update_assignments();
  CHECK(m.assignments() == std::vector<ClusterId>{1, 2});
  const auto oh = MembershipMatrix::one_hot(std::vector<ClusterId>{2, 0}, 3);
  CHECK(oh(0, 2) == 1.0);
  CHECK(oh(1, 0) == 1.0);
  CHECK(oh(1, 1) == 0.0);
}
