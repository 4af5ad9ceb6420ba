#pragma once

#include <cstddef>
#include <vector>

#include "csi/core_types.hpp"

namespace csi {

/// Minimum-cost perfect assignment on an n x m cost matrix (n <= m), row-major.
/// Returns the column assigned to each row.
std::vector<std::size_t> hungarian(const std::vector<double>& cost, std::size_t n, std::size_t m);

/// K_est x K_true contingency table.
std::vector<double> contingency(const std::vector<ClusterId>& estimated, const std::vector<ClusterId>& truth,
                                std::size_t k_est, std::size_t k_true);

struct Matching {
  std::vector<ClusterId> est_to_true;  // K_est entries; unmatched estimated clusters map to k_true
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Relabels estimated clusters to maximise agreement with the truth.
Matching match_labels(const std::vector<ClusterId>& estimated, const std::vector<ClusterId>& truth,
                      std::size_t k_est, std::size_t k_true);

}  // namespace csi
