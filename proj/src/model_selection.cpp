#include "csi/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/gamma.hpp>

#include "csi/errors.hpp"

namespace csi {

double ClusterCounts::row_total(StateId u, std::size_t U) const {
  double s = 0.0;
  for (StateId j = 0; j < U; ++j) s += transitions[u * U + j];
  return s;
}

std::vector<ClusterCounts> soft_counts(const TrajectoryData& data, const MembershipMatrix& omega) {
  if (omega.rows() != data.size()) throw StructuralError("membership rows do not match the dataset");
  const std::size_t U = data.states.size();
  const std::size_t T = static_cast<std::size_t>(data.max_holding);
  const std::size_t K = omega.cols();
  std::vector<ClusterCounts> out(K);
  for (auto& c : out) {
    c.initial.assign(U, 0.0);
    c.transitions.assign(U * U, 0.0);
    c.holding.assign(U * U * T, 0.0);
  }
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& y = data.items[n];
    for (std::size_t k = 0; k < K; ++k) {
      const double w = omega(n, k);
      if (w == 0.0) continue;
      auto& c = out[k];
      c.total += w;
      c.initial[y.visits.front().state] += w;
      for (std::size_t l = 0; l < y.visits.size(); ++l) {
        const StateId u = y.visits[l].state;
        const StateId j = l + 1 < y.visits.size() ? y.visits[l + 1].state : y.exit;
        c.transitions[u * U + j] += w;
        c.holding[(u * U + j) * T + static_cast<std::size_t>(y.visits[l].holding - 1)] += w;
      }
    }
  }
  return out;
}

double transition_chisq_test(const std::vector<double>& P_a, const std::vector<double>& row_totals_a,
                             const std::vector<double>& P_b, const std::vector<double>& row_totals_b,
                             std::size_t num_transient, std::size_t num_states) {
  const std::size_t U = num_states;
  if (P_a.size() != U * U || P_b.size() != U * U || row_totals_a.size() < num_transient ||
      row_totals_b.size() < num_transient)
    throw StructuralError("chi-square inputs have mismatched dimensions");

  double stat = 0.0;
  double df = 0.0;
  for (StateId u = 0; u < num_transient; ++u) {
    const double na = row_totals_a[u];
    const double nb = row_totals_b[u];
    if (!(na > 0.0) || !(nb > 0.0)) continue;
    const double N = na + nb;

    struct Cell {
      double oa = 0.0, ob = 0.0;
    };
    std::vector<Cell> kept;
    Cell rest;
    bool has_rest = false;
    for (StateId j = 0; j < U; ++j) {
      Cell c{na * P_a[u * U + j], nb * P_b[u * U + j]};
      const double pooled = c.oa + c.ob;
      if (pooled <= 0.0) continue;
      const double e_small = std::min(na, nb) * pooled / N;
      if (e_small < 5.0) {
        rest.oa += c.oa;
        rest.ob += c.ob;
        has_rest = true;
      } else {
        kept.push_back(c);
      }
    }
    if (has_rest) {
      const double e_small = std::min(na, nb) * (rest.oa + rest.ob) / N;
      if (e_small < 5.0 && !kept.empty()) {
        auto smallest = std::min_element(kept.begin(), kept.end(), [](const Cell& x, const Cell& y) {
          return x.oa + x.ob < y.oa + y.ob;
        });
        smallest->oa += rest.oa;
        smallest->ob += rest.ob;
      } else {
        kept.push_back(rest);
      }
    }
    if (kept.size() < 2) continue;
    for (const auto& c : kept) {
      const double pooled = c.oa + c.ob;
      const double ea = na * pooled / N;
      const double eb = nb * pooled / N;
      stat += (c.oa - ea) * (c.oa - ea) / ea + (c.ob - eb) * (c.ob - eb) / eb;
    }
    df += static_cast<double>(kept.size() - 1);
  }
  if (df <= 0.0) return 1.0;
  if (stat <= 0.0) return 1.0;
  return boost::math::gamma_q(df / 2.0, stat / 2.0);
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;  // series terms all ~1, Q is 1 to double precision
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_discrete_test(const std::vector<double>& dist_a, const std::vector<double>& dist_b, double n_a,
                        double n_b) {
  if (dist_a.empty() || dist_b.empty()) throw StructuralError("KS test needs a non-empty support");
  if (dist_a.size() != dist_b.size()) throw StructuralError("KS test needs a common support");
  if (!(n_a > 0.0) || !(n_b > 0.0)) return 1.0;
  auto normalise = [](const std::vector<double>& d) {
    double s = 0.0;
    for (double x : d) s += x;
    return s > 0.0 ? s : 1.0;
  };
  const double sa = normalise(dist_a), sb = normalise(dist_b);
  double fa = 0.0, fb = 0.0, D = 0.0;
  for (std::size_t i = 0; i < dist_a.size(); ++i) {
    fa += dist_a[i] / sa;
    fb += dist_b[i] / sb;
    D = std::max(D, std::abs(fa - fb));
  }
  if (D <= 1e-15) return 1.0;
  const double ne = n_a * n_b / (n_a + n_b);
  const double root = std::sqrt(ne);
  return kolmogorov_q((root + 0.12 + 0.11 / root) * D);
}

PairTest compare_components(const SmmComponent& ca, const ClusterCounts& counts_a, const SmmComponent& cb,
                            const ClusterCounts& counts_b, const StateSpace& states, int max_holding) {
  const std::size_t U = states.size();
  const std::size_t nt = states.num_transient();
  PairTest t;

  std::vector<double> ra(ca.rho_vector().begin(), ca.rho_vector().begin() + static_cast<std::ptrdiff_t>(nt));
  std::vector<double> rb(cb.rho_vector().begin(), cb.rho_vector().begin() + static_cast<std::ptrdiff_t>(nt));
  t.p_rho = ks_discrete_test(ra, rb, counts_a.total, counts_b.total);

  std::vector<double> rows_a(nt), rows_b(nt);
  for (StateId u = 0; u < nt; ++u) {
    rows_a[u] = counts_a.row_total(u, U);
    rows_b[u] = counts_b.row_total(u, U);
  }
  t.p_P = transition_chisq_test(ca.trans_vector(), rows_a, cb.trans_vector(), rows_b, nt, U);

  double min_p = 1.0;
  std::size_t cells = 0;
  for (StateId u = 0; u < nt; ++u)
    for (StateId j = 0; j < U; ++j) {
      const double na = counts_a.transitions[u * U + j];
      const double nb = counts_b.transitions[u * U + j];
      if (na < 1.0 || nb < 1.0) continue;
      auto ha = ca.holding_pmf(u, j);
      auto hb = cb.holding_pmf(u, j);
      std::vector<double> va(ha.begin(), ha.end()), vb(hb.begin(), hb.end());
      min_p = std::min(min_p, ks_discrete_test(va, vb, na, nb));
      ++cells;
    }
  (void)max_holding;
  t.p_H = cells ? std::min(1.0, min_p * static_cast<double>(cells)) : 1.0;
  return t;
}

MergeResult merge_redundant(const SmmParams& params, const TrajectoryData& data, double alpha,
                            const Hyperparams& hyper, const MStepOptions& m_step_options) {
  MergeResult out{params, {}};
  if (!(alpha > 0.0)) return out;
  while (out.params.num_clusters() > 1) {
    const auto omega = e_step(data, out.params);
    const auto counts = soft_counts(data, omega);
    const std::size_t K = out.params.num_clusters();
    const double npairs = static_cast<double>(K * (K - 1) / 2);
    const double level = alpha / npairs;

    std::vector<PairTest> round;
    std::ptrdiff_t best = -1;
    double best_score = -1.0;
    for (ClusterId a = 0; a < K; ++a)
      for (ClusterId b = a + 1; b < K; ++b) {
        auto t = compare_components(out.params.components[a], counts[a], out.params.components[b], counts[b],
                                    data.states, data.max_holding);
        t.a = a;
        t.b = b;
        const double score = std::min({t.p_rho, t.p_P, t.p_H});
        if (score > level && score > best_score) {
          best_score = score;
          best = static_cast<std::ptrdiff_t>(round.size());
        }
        round.push_back(t);
      }
    if (best < 0) {
      out.report.pairs.insert(out.report.pairs.end(), round.begin(), round.end());
      break;
    }
    round[static_cast<std::size_t>(best)].merged = true;
    const ClusterId a = round[static_cast<std::size_t>(best)].a;
    const ClusterId b = round[static_cast<std::size_t>(best)].b;
    out.report.pairs.insert(out.report.pairs.end(), round.begin(), round.end());
    ++out.report.merges;

    MembershipMatrix pooled(omega.rows(), K - 1);
    for (std::size_t n = 0; n < omega.rows(); ++n) {
      std::size_t col = 0;
      for (ClusterId k = 0; k < K; ++k) {
        if (k == b) continue;
        pooled(n, col) = omega(n, k) + (k == a ? omega(n, b) : 0.0);
        ++col;
      }
    }
    pooled.update_assignments();
    out.params = m_step(data, pooled, hyper, m_step_options);
  }
  return out;
}

ElbowScan elbow_scan(const TrajectoryData& data, const std::vector<std::size_t>& k_values, const EmConfig& config,
                     double theta) {
  if (k_values.empty()) throw ConfigError("elbow scan needs at least one K");
  for (std::size_t i = 1; i < k_values.size(); ++i)
    if (k_values[i] <= k_values[i - 1]) throw ConfigError("K values must be strictly increasing");
  ElbowScan scan;
  scan.k_values = k_values;
  for (auto K : k_values) {
    EmConfig c = config;
    c.K = K;
    c.hyper.reset();
    c.seed = derive_seed(config.seed, K);
    scan.fits.push_back(fit(data, c));
    scan.q_values.push_back(scan.fits.back().final_q);
  }
  scan.chosen_k = k_values.back();
  bool chosen = false;
  for (std::size_t i = 0; i + 1 < k_values.size(); ++i) {
    const double gain = (scan.q_values[i + 1] - scan.q_values[i]) / std::abs(scan.q_values[i]);
    scan.rel_improvements.push_back(gain);
    if (!(scan.q_values[i + 1] > scan.q_values[i])) scan.strictly_increasing = false;
    if (!chosen && gain < theta) {
      scan.chosen_k = k_values[i];
      chosen = true;
    }
  }
  return scan;
}

}  // namespace csi
