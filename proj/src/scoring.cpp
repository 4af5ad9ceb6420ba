#include "csi/scoring.hpp"

#include <algorithm>
#include <limits>

#include "csi/errors.hpp"

namespace csi {

std::vector<std::size_t> hungarian(const std::vector<double>& cost, std::size_t n, std::size_t m) {
  if (n > m) throw StructuralError("hungarian needs rows <= columns");
  if (cost.size() != n * m) throw StructuralError("cost matrix size mismatch");
  const double inf = std::numeric_limits<double>::infinity();
  // potentials formulation, 1-based with a dummy column 0
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) assign[p[j] - 1] = j - 1;
  return assign;
}

std::vector<double> contingency(const std::vector<ClusterId>& estimated, const std::vector<ClusterId>& truth,
                                std::size_t k_est, std::size_t k_true) {
  if (estimated.size() != truth.size()) throw StructuralError("label vectors differ in length");
  std::vector<double> table(k_est * k_true, 0.0);
  for (std::size_t n = 0; n < estimated.size(); ++n) {
    if (estimated[n] >= k_est || truth[n] >= k_true) throw StructuralError("label out of range");
    table[estimated[n] * k_true + truth[n]] += 1.0;
  }
  return table;
}

Matching match_labels(const std::vector<ClusterId>& estimated, const std::vector<ClusterId>& truth,
                      std::size_t k_est, std::size_t k_true) {
  const auto table = contingency(estimated, truth, k_est, k_true);
  // square up so either side may be larger
  const std::size_t s = std::max(k_est, k_true);
  std::vector<double> cost(s * s, 0.0);
  for (std::size_t a = 0; a < k_est; ++a)
    for (std::size_t b = 0; b < k_true; ++b) cost[a * s + b] = -table[a * k_true + b];
  const auto assign = hungarian(cost, s, s);

  Matching m;
  m.est_to_true.assign(k_est, k_true);
  double hits = 0.0;
  for (std::size_t a = 0; a < k_est; ++a)
    if (assign[a] < k_true) {
      m.est_to_true[a] = assign[a];
      hits += table[a * k_true + assign[a]];
    }
  const double n = static_cast<double>(estimated.size());
  m.accuracy = n > 0 ? hits / n : 0.0;

  // macro F1 over the true clusters
  std::vector<double> est_size(k_est, 0.0), true_size(k_true, 0.0);
  for (auto e : estimated) est_size[e] += 1.0;
  for (auto t : truth) true_size[t] += 1.0;
  double f1_sum = 0.0;
  for (std::size_t b = 0; b < k_true; ++b) {
    double tp = 0.0, predicted = 0.0;
    for (std::size_t a = 0; a < k_est; ++a)
      if (m.est_to_true[a] == b) {
        tp += table[a * k_true + b];
        predicted += est_size[a];
      }
    const double denom = predicted + true_size[b];
    f1_sum += denom > 0 ? 2.0 * tp / denom : 0.0;
  }
  m.macro_f1 = k_true ? f1_sum / static_cast<double>(k_true) : 0.0;
  return m;
}

}  // namespace csi
