#include "csi/analytics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "csi/errors.hpp"

namespace csi {

namespace {

void check_args(const SmmParams& params, ClusterId k, int d_max) {
  if (d_max < 1) throw ConfigError("d_max must be >= 1");
  if (k >= params.num_clusters()) throw StructuralError("cluster index out of range");
}

// g[(u * U + l) * T + (d' - 1)] = P_ul H_ul(d')
std::vector<double> step_kernel(const SmmComponent& c, std::size_t U, int T) {
  std::vector<double> g(U * U * static_cast<std::size_t>(T), 0.0);
  for (StateId u = 0; u < U; ++u)
    for (StateId l = 0; l < U; ++l) {
      const double p = c.p(u, l);
      if (p <= 0.0) continue;
      auto h = c.holding_pmf(u, l);
      for (int d = 0; d < T; ++d) g[(u * U + l) * static_cast<std::size_t>(T) + static_cast<std::size_t>(d)] = p * h[static_cast<std::size_t>(d)];
    }
  return g;
}

}  // namespace

double LosDistribution::mean() const {
  double m = 0.0;
  for (std::size_t d = 0; d < pmf.size(); ++d) m += static_cast<double>(d) * pmf[d];
  return m;
}

IntervalTransition interval_transition(const SmmParams& params, ClusterId k, int d_max) {
  check_args(params, k, d_max);
  const auto& c = params.components[k];
  const auto& S = params.states;
  const std::size_t U = S.size();
  const std::size_t nt = S.num_transient();
  const int T = params.max_holding;
  const std::size_t D1 = static_cast<std::size_t>(d_max) + 1;
  const auto g = step_kernel(c, U, T);

  IntervalTransition out;
  out.num_states = U;
  out.d_max = d_max;
  out.values.assign(U * U * D1, 0.0);
  auto at = [&](StateId u, StateId j, std::size_t d) -> double& { return out.values[(u * U + j) * D1 + d]; };

  for (StateId a = nt; a < U; ++a)
    for (std::size_t d = 0; d < D1; ++d) at(a, a, d) = 1.0;

  // holding survival: P(stay in u longer than d)
  std::vector<double> surv(nt * D1, 0.0);
  for (StateId u = 0; u < nt; ++u) {
    double left = 1.0;
    for (std::size_t d = 0; d < D1; ++d) {
      if (d >= 1 && d <= static_cast<std::size_t>(T))
        for (StateId l = 0; l < U; ++l) left -= g[(u * U + l) * static_cast<std::size_t>(T) + d - 1];
      surv[u * D1 + d] = std::max(0.0, left);
    }
  }

  for (std::size_t d = 0; d < D1; ++d) {
    for (StateId u = 0; u < nt; ++u) {
      for (StateId j = 0; j < U; ++j) {
        double v = (u == j) ? surv[u * D1 + d] : 0.0;
        const std::size_t top = std::min<std::size_t>(d, static_cast<std::size_t>(T));
        for (StateId l = 0; l < U; ++l) {
          const double* gl = &g[(u * U + l) * static_cast<std::size_t>(T)];
          for (std::size_t dp = 1; dp <= top; ++dp) {
            const double w = gl[dp - 1];
            if (w != 0.0) v += w * at(l, j, d - dp);
          }
        }
        at(u, j, d) = v;
      }
    }
  }

  out.tail_mass.assign(U, 0.0);
  for (StateId u = 0; u < nt; ++u)
    for (StateId j = 0; j < nt; ++j) out.tail_mass[u] += at(u, j, static_cast<std::size_t>(d_max));
  return out;
}

Occupancy occupancy(const IntervalTransition& phi, const SmmComponent& c) {
  Occupancy out;
  out.num_states = phi.num_states;
  out.d_max = phi.d_max;
  const std::size_t D1 = static_cast<std::size_t>(phi.d_max) + 1;
  out.values.assign(phi.num_states * D1, 0.0);
  for (StateId u = 0; u < phi.num_states; ++u) {
    const double r = c.rho(u);
    if (r == 0.0) continue;
    for (StateId j = 0; j < phi.num_states; ++j)
      for (std::size_t d = 0; d < D1; ++d) out.values[j * D1 + d] += r * phi(u, j, static_cast<int>(d));
  }
  return out;
}

Occupancy occupancy(const SmmParams& params, ClusterId k, int d_max) {
  return occupancy(interval_transition(params, k, d_max), params.components[k]);
}

FirstPassage first_passage(const SmmParams& params, ClusterId k, int d_max) {
  check_args(params, k, d_max);
  const auto& c = params.components[k];
  const std::size_t U = params.states.size();
  const std::size_t nt = params.states.num_transient();
  const int T = params.max_holding;
  const std::size_t D1 = static_cast<std::size_t>(d_max) + 1;
  const auto g = step_kernel(c, U, T);

  FirstPassage out;
  out.num_states = U;
  out.d_max = d_max;
  out.values.assign(U * U * D1, 0.0);
  auto at = [&](StateId u, StateId j, std::size_t d) -> double& { return out.values[(u * U + j) * D1 + d]; };

  for (std::size_t d = 1; d < D1; ++d) {
    const std::size_t top = std::min<std::size_t>(d, static_cast<std::size_t>(T));
    for (StateId u = 0; u < nt; ++u)
      for (StateId j = 0; j < U; ++j) {
        double v = d <= static_cast<std::size_t>(T) ? g[(u * U + j) * static_cast<std::size_t>(T) + d - 1] : 0.0;
        for (StateId l = 0; l < nt; ++l) {
          if (l == j) continue;
          const double* gl = &g[(u * U + l) * static_cast<std::size_t>(T)];
          for (std::size_t dp = 1; dp <= top; ++dp)
            if (gl[dp - 1] != 0.0) v += gl[dp - 1] * at(l, j, d - dp);
        }
        at(u, j, d) = v;
      }
  }
  return out;
}

LosDistribution total_los(const SmmParams& params, ClusterId k, int d_max) {
  const auto f = first_passage(params, k, d_max);
  const auto& c = params.components[k];
  const auto& S = params.states;
  const std::size_t D1 = static_cast<std::size_t>(d_max) + 1;
  LosDistribution out;
  out.d_max = d_max;
  out.pmf.assign(D1, 0.0);
  out.from_state.assign(S.num_transient(), std::vector<double>(D1, 0.0));
  for (StateId u = 0; u < S.num_transient(); ++u)
    for (std::size_t d = 1; d < D1; ++d) {
      double s = 0.0;
      for (StateId a = S.num_transient(); a < S.size(); ++a) s += f(u, a, static_cast<int>(d));
      out.from_state[u][d] = s;
      out.pmf[d] += c.rho(u) * s;
    }
  double total = 0.0;
  for (double x : out.pmf) total += x;
  out.tail_mass = std::max(0.0, 1.0 - total);
  return out;
}

WardDaysMoments ward_days(const SmmParams& params, ClusterId k, int d_max, const WardDaysOptions& options) {
  const auto phi = interval_transition(params, k, d_max);
  const double worst = *std::max_element(phi.tail_mass.begin(), phi.tail_mass.end());
  if (worst > options.tail_tol)
    throw HorizonError("d_max " + std::to_string(d_max) + " leaves tail mass " + std::to_string(worst) +
                       "; increase d_max");

  const auto& c = params.components[k];
  const std::size_t U = params.states.size();
  const std::size_t nt = params.states.num_transient();
  WardDaysMoments out;
  out.num_states = U;
  out.tail_mass = phi.tail_mass;
  out.mean.assign(U * U, 0.0);
  out.second_moment.assign(U * U, 0.0);
  out.variance.assign(U * U, 0.0);
  out.exact_second_moment.assign(U * U, 0.0);
  out.exact_variance.assign(U * U, 0.0);

  const int d0 = options.include_day0 ? 0 : 1;
  for (StateId u = 0; u < nt; ++u)
    for (StateId j = 0; j < nt; ++j) {
      double v = 0.0;
      for (int d = d0; d <= d_max; ++d) v += phi(u, j, d);
      const std::size_t i = u * U + j;
      out.mean[i] = v;
      out.second_moment[i] = v * (2.0 * v - 1.0);
      double var = out.second_moment[i] - v * v;
      if (var < 0.0) {
        ++out.clipped;
        var = 0.0;
      }
      out.variance[i] = var;
    }

  // Exact moments: the days in j are the sum of holding times of the visits to j,
  // a reward accumulated along the jump chain.
  const int T = params.max_holding;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nt));
  for (StateId u = 0; u < nt; ++u)
    for (StateId l = 0; l < nt; ++l) A(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(l)) -= c.p(u, l);
  const auto lu = A.partialPivLu();

  std::vector<double> h1(U * U, 0.0), h2(U * U, 0.0);  // E[nu], E[nu^2] per (u, l)
  for (StateId u = 0; u < nt; ++u)
    for (StateId l = 0; l < U; ++l) {
      auto h = c.holding_pmf(u, l);
      for (int n = 1; n <= T; ++n) {
        h1[u * U + l] += n * h[static_cast<std::size_t>(n - 1)];
        h2[u * U + l] += static_cast<double>(n) * n * h[static_cast<std::size_t>(n - 1)];
      }
    }

  for (StateId j = 0; j < nt; ++j) {
    Eigen::VectorXd b1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nt));
    for (StateId l = 0; l < U; ++l) b1(static_cast<Eigen::Index>(j)) += c.p(j, l) * h1[j * U + l];
    const Eigen::VectorXd m1 = lu.solve(b1);
    Eigen::VectorXd b2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nt));
    for (StateId l = 0; l < U; ++l) {
      const double next = l < nt ? m1(static_cast<Eigen::Index>(l)) : 0.0;
      b2(static_cast<Eigen::Index>(j)) += c.p(j, l) * (h2[j * U + l] + 2.0 * h1[j * U + l] * next);
    }
    const Eigen::VectorXd m2 = lu.solve(b2);
    for (StateId u = 0; u < nt; ++u) {
      double e1 = m1(static_cast<Eigen::Index>(u));
      double e2 = m2(static_cast<Eigen::Index>(u));
      if (!options.include_day0 && u == j) {
        e2 = e2 - 2.0 * e1 + 1.0;
        e1 -= 1.0;
      }
      out.exact_second_moment[u * U + j] = e2;
      out.exact_variance[u * U + j] = std::max(0.0, e2 - e1 * e1);
    }
  }
  return out;
}

std::vector<double> mean_los_exact(const SmmParams& params, ClusterId k) {
  if (k >= params.num_clusters()) throw StructuralError("cluster index out of range");
  const auto& c = params.components[k];
  const std::size_t U = params.states.size();
  const std::size_t nt = params.states.num_transient();
  const int T = params.max_holding;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nt));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nt));
  for (StateId u = 0; u < nt; ++u)
    for (StateId l = 0; l < U; ++l) {
      if (l < nt) A(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(l)) -= c.p(u, l);
      auto h = c.holding_pmf(u, l);
      for (int n = 1; n <= T; ++n) b(static_cast<Eigen::Index>(u)) += c.p(u, l) * n * h[static_cast<std::size_t>(n - 1)];
    }
  const Eigen::VectorXd m = A.partialPivLu().solve(b);
  return std::vector<double>(m.data(), m.data() + m.size());
}

int default_d_max(const SmmParams& params, double tol, std::optional<double> empirical_q99, int hard_cap) {
  const std::size_t U = params.states.size();
  const std::size_t nt = params.states.num_transient();
  const int T = params.max_holding;
  int cap = hard_cap;
  if (empirical_q99) cap = std::min(cap, std::max(1, static_cast<int>(std::ceil(4.0 * *empirical_q99))));

  int best = 1;
  for (ClusterId k = 0; k < params.num_clusters(); ++k) {
    const auto g = step_kernel(params.components[k], U, T);
    // absorption-time pmf per transient start, grown day by day
    std::vector<std::vector<double>> a(nt, std::vector<double>(1, 0.0));
    std::vector<double> absorbed(nt, 0.0);
    int d = 0;
    while (true) {
      ++d;
      const std::size_t top = std::min(d, T);
      std::vector<double> next(nt, 0.0);
      for (StateId u = 0; u < nt; ++u) {
        double v = 0.0;
        const std::size_t dd = static_cast<std::size_t>(d);
        if (dd <= static_cast<std::size_t>(T))
          for (StateId e = nt; e < U; ++e) v += g[(u * U + e) * static_cast<std::size_t>(T) + dd - 1];
        for (StateId l = 0; l < nt; ++l) {
          const double* gl = &g[(u * U + l) * static_cast<std::size_t>(T)];
          for (std::size_t dp = 1; dp <= top; ++dp)
            if (gl[dp - 1] != 0.0) v += gl[dp - 1] * a[l][dd - dp];
        }
        next[u] = v;
      }
      double worst = 0.0;
      for (StateId u = 0; u < nt; ++u) {
        a[u].push_back(next[u]);
        absorbed[u] += next[u];
        worst = std::max(worst, 1.0 - absorbed[u]);
      }
      if (worst < tol || d >= cap) break;
    }
    best = std::max(best, d);
  }
  return std::min(best, cap);
}

}  // namespace csi
