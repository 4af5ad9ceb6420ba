#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csi/core_types.hpp"
#include "csi/smm_em.hpp"

namespace csi {

struct EmpiricalEstimate {
  SmmParams params;
  /// (cluster, state) pairs whose row had no observations and was floored to uniform.
  std::vector<std::pair<ClusterId, StateId>> empty_rho_clusters;
  std::vector<std::pair<ClusterId, StateId>> empty_rows;
  std::vector<std::pair<ClusterId, std::size_t>> empty_holding_cells;  // (cluster, u * U + j)
};

/// Normalised transition/holding/initial-state frequencies per labelled cluster.
/// Rows without any observation become uniform (the floor); cluster weights are
/// label frequencies. An empty cluster is an error.
EmpiricalEstimate empirical_estimate(const TrajectoryData& data, const std::vector<ClusterId>& labels,
                                     std::size_t num_clusters);

/// Encoded attribute matrix: z-scored age, one-hot sex, one-hot diagnosis.
std::vector<std::vector<double>> encode_attributes(const std::vector<AttributeRecord>& records,
                                                   std::size_t num_diagnoses);

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by inertia.
std::vector<ClusterId> kmeans(const std::vector<std::vector<double>>& x, std::size_t K, std::uint64_t seed,
                              int restarts = 10, int max_iter = 300);

/// Diagonal-covariance Gaussian mixture by EM; hard labels by argmax.
struct GaussianMixtureFit {
  std::vector<ClusterId> labels;
  double log_likelihood = 0.0;
  std::size_t floored_variances = 0;  // variance floor applications (collapse warnings)
};
GaussianMixtureFit gaussian_mixture(const std::vector<std::vector<double>>& x, std::size_t K, std::uint64_t seed,
                                    int max_iter = 200);

std::vector<ClusterId> kmeans_attribute_cluster(const std::vector<AttributeRecord>& records, std::size_t K,
                                                std::uint64_t seed, std::size_t num_diagnoses);
GaussianMixtureFit gaussian_attribute_cluster(const std::vector<AttributeRecord>& records, std::size_t K,
                                              std::uint64_t seed, std::size_t num_diagnoses);

/// One cluster per distinct diagnosis, numbered in increasing diagnosis order.
std::vector<ClusterId> drg_cluster(const std::vector<AttributeRecord>& records, std::size_t* num_clusters = nullptr);

/// EM with a single pooled holding pmf per cluster.
EmResult markov_mixture_cluster(const TrajectoryData& data, std::size_t K, const EmConfig& config);

/// Attribute records of a dataset; error if any trajectory lacks them.
std::vector<AttributeRecord> attributes_of(const TrajectoryData& data);

}  // namespace csi
