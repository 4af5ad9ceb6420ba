#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace csi {

using StateId = std::size_t;
using ClusterId = std::size_t;

/// Wards and absorbing outcomes. Transient states occupy ids
/// [0, num_transient) and absorbing states [num_transient, size()), so
/// every tensor in the library indexes states directly.
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(std::size_t num_transient, std::size_t num_absorbing,
             std::vector<std::string> labels = {});

  std::size_t size() const { return num_transient_ + num_absorbing_; }
  std::size_t num_transient() const { return num_transient_; }
  std::size_t num_absorbing() const { return num_absorbing_; }
  bool is_transient(StateId u) const { return u < num_transient_; }
  bool is_absorbing(StateId u) const { return u >= num_transient_ && u < size(); }

  const std::string& label(StateId u) const { return labels_.at(u); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<StateId> find(const std::string& label) const;

  bool operator==(const StateSpace&) const = default;

 private:
  std::size_t num_transient_ = 0;
  std::size_t num_absorbing_ = 0;
  std::vector<std::string> labels_;
};

struct AttributeRecord {
  double age = 0.0;
  int sex = 0;        // 0 = M, 1 = F
  int diagnosis = 0;  // index into the declared diagnosis label set

  bool operator==(const AttributeRecord&) const = default;
};

struct Visit {
  StateId state = 0;
  int holding = 1;  // whole time units spent before the next move

  bool operator==(const Visit&) const = default;
};

/// One entity's observed path: transient visits followed by an absorbing exit.
struct Trajectory {
  std::vector<Visit> visits;
  StateId exit = 0;
  std::string id;
  std::optional<AttributeRecord> attributes;

  int total_los() const;
  bool operator==(const Trajectory&) const = default;
};

/// Throws StructuralError when y does not fit the state space or horizon.
void check_trajectory(const Trajectory& y, const StateSpace& states, int max_holding);

/// A dataset of trajectories over one state space; max_holding is T.
struct TrajectoryData {
  StateSpace states;
  int max_holding = 0;
  std::vector<Trajectory> items;
  std::vector<std::string> diagnosis_labels;  // names for AttributeRecord::diagnosis

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  void check() const;
  /// Largest observed holding time.
  int observed_max_holding() const;
};

/// Parameters of one semi-Markov component: weight, initial pmf, transition
/// matrix and transition-dependent holding pmfs. Flat row-major storage.
class SmmComponent {
 public:
  SmmComponent() = default;
  SmmComponent(std::size_t num_states, int max_holding);

  std::size_t num_states() const { return num_states_; }
  int max_holding() const { return max_holding_; }

  double weight = 0.0;

  double rho(StateId u) const { return rho_[u]; }
  double& rho(StateId u) { return rho_[u]; }
  double p(StateId u, StateId j) const { return trans_[u * num_states_ + j]; }
  double& p(StateId u, StateId j) { return trans_[u * num_states_ + j]; }
  // nu is 1-based, as in holding time "nu days"
  double h(StateId u, StateId j, int nu) const { return hold_[hold_offset(u, j) + nu - 1]; }
  double& h(StateId u, StateId j, int nu) { return hold_[hold_offset(u, j) + nu - 1]; }

  std::span<const double> holding_pmf(StateId u, StateId j) const {
    return {hold_.data() + hold_offset(u, j), static_cast<std::size_t>(max_holding_)};
  }
  std::span<double> holding_pmf(StateId u, StateId j) {
    return {hold_.data() + hold_offset(u, j), static_cast<std::size_t>(max_holding_)};
  }

  const std::vector<double>& rho_vector() const { return rho_; }
  const std::vector<double>& trans_vector() const { return trans_; }
  const std::vector<double>& hold_vector() const { return hold_; }
  std::vector<double>& rho_vector() { return rho_; }
  std::vector<double>& trans_vector() { return trans_; }
  std::vector<double>& hold_vector() { return hold_; }

  /// Absorbing rows get the self-loop convention: P = 1, all holding mass at 1.
  void set_absorbing_rows(const StateSpace& states);

  bool operator==(const SmmComponent&) const = default;

 private:
  std::size_t hold_offset(StateId u, StateId j) const {
    return (u * num_states_ + j) * static_cast<std::size_t>(max_holding_);
  }

  std::size_t num_states_ = 0;
  int max_holding_ = 0;
  std::vector<double> rho_;
  std::vector<double> trans_;
  std::vector<double> hold_;
};

/// The full mixture.
struct SmmParams {
  StateSpace states;
  int max_holding = 0;
  std::vector<SmmComponent> components;

  SmmParams() = default;
  SmmParams(StateSpace s, int T, std::size_t num_clusters);

  std::size_t num_clusters() const { return components.size(); }
  std::size_t num_states() const { return states.size(); }

  bool operator==(const SmmParams&) const = default;
};

/// Dirichlet pseudo-counts, one scalar per parameter family.
struct Hyperparams {
  double a_pi = 0.0;
  double a_rho = 0.0;
  double a_P = 0.0;
  double a_H = 0.0;
  double epsilon = 1e-5;

  /// epsilon spread over the cardinality of each tensor:
  /// a_pi = e/K, a_rho = e/(|U| K), a_P = e/(|U|^2 K), a_H = e/(|U|^2 T K).
  static Hyperparams from_epsilon(double epsilon, std::size_t num_states, int max_holding,
                                  std::size_t num_clusters);
  /// Every family set to the same value (used for the a -> 0+ limits in tests).
  static Hyperparams uniform(double a);

  void check() const;
};

/// N x K responsibilities plus hard labels.
class MembershipMatrix {
 public:
  MembershipMatrix() = default;
  MembershipMatrix(std::size_t n, std::size_t k);

  static MembershipMatrix uniform(std::size_t n, std::size_t k);
  static MembershipMatrix one_hot(std::span<const ClusterId> labels, std::size_t k);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t n, std::size_t k) const { return omega_[n * cols_ + k]; }
  double& operator()(std::size_t n, std::size_t k) { return omega_[n * cols_ + k]; }
  std::span<const double> row(std::size_t n) const { return {omega_.data() + n * cols_, cols_}; }

  const std::vector<ClusterId>& assignments() const { return assignments_; }
  /// Recomputes hard labels as the row argmax (lowest index wins ties).
  void update_assignments();
  void set_assignments(std::vector<ClusterId> z);

  bool operator==(const MembershipMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> omega_;
  std::vector<ClusterId> assignments_;
};

struct Violation {
  std::string constraint;  // "pi", "rho", "P", "H", "range", "absorbing"
  ClusterId cluster = 0;
  StateId u = 0;
  StateId j = 0;
  double deviation = 0.0;
};

/// Lists every simplex/range constraint off by more than tol. Throws
/// StructuralError on dimension mismatch.
std::vector<Violation> validate_params(const SmmParams& params, double tol);

/// log p(y | z = k); -infinity when any factor is zero.
double log_trajectory_likelihood(const Trajectory& y, ClusterId k, const SmmParams& params);

}  // namespace csi
