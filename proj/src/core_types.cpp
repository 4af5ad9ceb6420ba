#include "csi/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csi/errors.hpp"

namespace csi {

StateSpace::StateSpace(std::size_t num_transient, std::size_t num_absorbing,
                       std::vector<std::string> labels)
    : num_transient_(num_transient), num_absorbing_(num_absorbing), labels_(std::move(labels)) {
  if (num_absorbing_ == 0) throw StructuralError("state space needs at least one absorbing state");
  if (labels_.empty()) {
    for (std::size_t u = 0; u < num_transient_; ++u) labels_.push_back("W" + std::to_string(u + 1));
    for (std::size_t u = 0; u < num_absorbing_; ++u)
      labels_.push_back(num_absorbing_ == 1 ? "D" : "D" + std::to_string(u + 1));
  }
  if (labels_.size() != size()) throw StructuralError("state labels do not match state count");
  auto sorted = labels_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw StructuralError("duplicate state label");
}

std::optional<StateId> StateSpace::find(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<StateId>(it - labels_.begin());
}

int Trajectory::total_los() const {
  int total = 0;
  for (const auto& v : visits) total += v.holding;
  return total;
}

void check_trajectory(const Trajectory& y, const StateSpace& states, int max_holding) {
  if (y.visits.empty()) throw StructuralError("trajectory " + y.id + " has no visits");
  for (const auto& v : y.visits) {
    if (!states.is_transient(v.state))
      throw StructuralError("trajectory " + y.id + " visits a non-transient state");
    if (v.holding < 1 || v.holding > max_holding)
      throw StructuralError("trajectory " + y.id + " holding time outside 1..T");
  }
  if (!states.is_absorbing(y.exit))
    throw StructuralError("trajectory " + y.id + " does not end in an absorbing state");
}

void TrajectoryData::check() const {
  for (const auto& y : items) check_trajectory(y, states, max_holding);
}

int TrajectoryData::observed_max_holding() const {
  int T = 0;
  for (const auto& y : items)
    for (const auto& v : y.visits) T = std::max(T, v.holding);
  return T;
}

SmmComponent::SmmComponent(std::size_t num_states, int max_holding)
    : num_states_(num_states),
      max_holding_(max_holding),
      rho_(num_states, 0.0),
      trans_(num_states * num_states, 0.0),
      hold_(num_states * num_states * static_cast<std::size_t>(max_holding), 0.0) {
  if (max_holding < 1) throw StructuralError("max holding time must be >= 1");
}

void SmmComponent::set_absorbing_rows(const StateSpace& states) {
  for (StateId u = states.num_transient(); u < states.size(); ++u) {
    for (StateId j = 0; j < num_states_; ++j) {
      p(u, j) = (u == j) ? 1.0 : 0.0;
      auto pmf = holding_pmf(u, j);
      std::fill(pmf.begin(), pmf.end(), 0.0);
    }
    h(u, u, 1) = 1.0;
  }
}

SmmParams::SmmParams(StateSpace s, int T, std::size_t num_clusters)
    : states(std::move(s)), max_holding(T) {
  components.reserve(num_clusters);
  for (std::size_t k = 0; k < num_clusters; ++k) {
    components.emplace_back(states.size(), T);
    components.back().set_absorbing_rows(states);
  }
}

Hyperparams Hyperparams::from_epsilon(double epsilon, std::size_t num_states, int max_holding,
                                      std::size_t num_clusters) {
  const double U = static_cast<double>(num_states);
  const double K = static_cast<double>(num_clusters);
  Hyperparams h;
  h.epsilon = epsilon;
  h.a_pi = epsilon / K;
  h.a_rho = epsilon / (U * K);
  h.a_P = epsilon / (U * U * K);
  h.a_H = epsilon / (U * U * static_cast<double>(max_holding) * K);
  return h;
}

Hyperparams Hyperparams::uniform(double a) {
  Hyperparams h;
  h.a_pi = h.a_rho = h.a_P = h.a_H = h.epsilon = a;
  return h;
}

void Hyperparams::check() const {
  if (!(a_pi > 0 && a_rho > 0 && a_P > 0 && a_H > 0))
    throw ConfigError("Dirichlet hyperparameters must be strictly positive");
}

MembershipMatrix::MembershipMatrix(std::size_t n, std::size_t k)
    : rows_(n), cols_(k), omega_(n * k, 0.0), assignments_(n, 0) {}

MembershipMatrix MembershipMatrix::uniform(std::size_t n, std::size_t k) {
  MembershipMatrix m(n, k);
  std::fill(m.omega_.begin(), m.omega_.end(), 1.0 / static_cast<double>(k));
  return m;
}

MembershipMatrix MembershipMatrix::one_hot(std::span<const ClusterId> labels, std::size_t k) {
  MembershipMatrix m(labels.size(), k);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] >= k) throw StructuralError("label out of range");
    m(n, labels[n]) = 1.0;
    m.assignments_[n] = labels[n];
  }
  return m;
}

void MembershipMatrix::update_assignments() {
  for (std::size_t n = 0; n < rows_; ++n) {
    auto r = row(n);
    assignments_[n] = static_cast<ClusterId>(std::max_element(r.begin(), r.end()) - r.begin());
  }
}

void MembershipMatrix::set_assignments(std::vector<ClusterId> z) {
  if (z.size() != rows_) throw StructuralError("assignment vector length mismatch");
  for (auto k : z)
    if (k >= cols_) throw StructuralError("assignment out of range");
  assignments_ = std::move(z);
}

namespace {

void check_dims(const SmmParams& params) {
  const std::size_t U = params.states.size();
  if (U == 0) throw StructuralError("empty state space");
  if (params.components.empty()) throw StructuralError("mixture has no components");
  for (const auto& c : params.components) {
    if (c.num_states() != U || c.max_holding() != params.max_holding ||
        c.rho_vector().size() != U || c.trans_vector().size() != U * U ||
        c.hold_vector().size() != U * U * static_cast<std::size_t>(params.max_holding))
      throw StructuralError("component tensor dimensions do not match the state space");
  }
}

}  // namespace

std::vector<Violation> validate_params(const SmmParams& params, double tol) {
  check_dims(params);
  std::vector<Violation> out;
  const auto& S = params.states;
  const std::size_t U = S.size();
  auto flag = [&](const char* what, ClusterId k, StateId u, StateId j, double dev) {
    if (std::abs(dev) > tol || std::isnan(dev)) out.push_back({what, k, u, j, dev});
  };
  auto out_of_range = [](double x) { return !(x >= 0.0 && x <= 1.0); };

  double pi_sum = 0.0;
  for (ClusterId k = 0; k < params.num_clusters(); ++k) {
    const auto& c = params.components[k];
    pi_sum += c.weight;
    if (out_of_range(c.weight)) out.push_back({"range", k, 0, 0, c.weight});

    double rho_sum = 0.0;
    for (StateId u = 0; u < U; ++u) {
      if (out_of_range(c.rho(u))) out.push_back({"range", k, u, 0, c.rho(u)});
      if (S.is_absorbing(u)) flag("rho", k, u, 0, c.rho(u));
      rho_sum += c.rho(u);
    }
    flag("rho", k, 0, 0, rho_sum - 1.0);

    for (StateId u = 0; u < U; ++u) {
      double row = 0.0;
      for (StateId j = 0; j < U; ++j) {
        const double p = c.p(u, j);
        if (out_of_range(p)) out.push_back({"range", k, u, j, p});
        row += p;
        if (p > 0.0) {
          double hs = 0.0;
          for (double x : c.holding_pmf(u, j)) {
            if (out_of_range(x)) out.push_back({"range", k, u, j, x});
            hs += x;
          }
          flag("H", k, u, j, hs - 1.0);
        }
      }
      flag("P", k, u, u, row - 1.0);
      if (S.is_absorbing(u)) flag("absorbing", k, u, u, c.p(u, u) - 1.0);
    }
  }
  flag("pi", 0, 0, 0, pi_sum - 1.0);
  return out;
}

double log_trajectory_likelihood(const Trajectory& y, ClusterId k, const SmmParams& params) {
  if (k >= params.num_clusters()) throw StructuralError("cluster index out of range");
  check_trajectory(y, params.states, params.max_holding);
  const auto& c = params.components[k];
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  auto safe_log = [](double x) { return x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity(); };

  double ll = safe_log(c.rho(y.visits.front().state));
  if (ll == neg_inf) return neg_inf;
  for (std::size_t l = 0; l < y.visits.size(); ++l) {
    const StateId u = y.visits[l].state;
    const StateId j = (l + 1 < y.visits.size()) ? y.visits[l + 1].state : y.exit;
    ll += safe_log(c.p(u, j)) + safe_log(c.h(u, j, y.visits[l].holding));
    if (ll == neg_inf) return neg_inf;
  }
  return ll;
}

}  // namespace csi
