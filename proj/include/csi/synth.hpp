#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "csi/core_types.hpp"

namespace csi {

/// Per-cluster attribute generator (age ~ Normal, sex ~ Bernoulli, diagnosis ~ categorical).
struct AttributeSpecRow {
  double age_mean = 0.0;
  double age_sd = 0.0;
  double p_male = 0.5;
  std::vector<double> diagnosis;  // pmf over diagnosis labels
};

struct AttributeSpec {
  std::vector<std::string> diagnosis_labels;
  std::vector<AttributeSpecRow> rows;  // one per cluster

  void check(std::size_t num_clusters) const;
};

struct GeneratorSpec {
  SmmParams true_params;
  std::size_t n_patients = 1000;
  std::uint64_t seed = 0;
  AttributeSpec attributes;

  void check() const;
};

struct SampledDataset {
  TrajectoryData data;                  // retained paths only
  std::vector<ClusterId> labels;        // true component per retained path
  std::size_t generated = 0;
  double retention = 0.0;               // retained / generated
};

/// The four-ward, four-component replication generator: C1/C2 differ only in
/// (rho, P), C3/C4 differ only in H, C2/C3 differ in both; weights
/// {0.17, 0.33, 0.25, 0.25}; every rho/P entry and every holding mass is below 0.7.
SmmParams canonical_k4_params();
AttributeSpec canonical_k4_attributes();
GeneratorSpec canonical_k4_spec(std::size_t n_patients, std::uint64_t seed);

/// Random mixture with zero-diagonal transitions and transition-dependent
/// holding times; used for the large-K scenarios and random analytics checks.
SmmParams random_params(std::size_t num_clusters, std::size_t num_transient, int max_holding,
                        std::uint64_t seed);

/// Shifted negative-binomial holding pmf on 1..T with the given mean (truncated, renormalised).
std::vector<double> holding_pmf_with_mean(double mean, double shape, int max_holding);

/// Draws patients, attaches attributes, drops paths whose total stay is one time unit.
SampledDataset sample_dataset(const GeneratorSpec& spec);

/// One raw path of component k (no filtering). When start is set the path begins there.
Trajectory simulate_path(const SmmComponent& c, const StateSpace& states, std::mt19937_64& rng,
                         std::optional<StateId> start = std::nullopt);

/// State occupied d time units after admission (end-of-day snapshot at time d).
StateId location_at(const Trajectory& y, int d);

std::vector<AttributeRecord> assign_attributes(const std::vector<ClusterId>& labels,
                                               const AttributeSpec& spec, std::uint64_t seed);

/// Throws ModelInconsistencyError if some reachable transient state cannot reach absorption.
void check_absorbing(const SmmParams& params);

}  // namespace csi
