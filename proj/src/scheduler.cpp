#include "csi/scheduler.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "csi/errors.hpp"

namespace csi {

namespace {

constexpr double kFeasTol = 1e-9;

int weekday_offset(int d1, int d2) { return ((d1 - d2) % kDaysPerWeek + kDaysPerWeek) % kDaysPerWeek; }

// ceiling that ignores rounding noise just above an integer
double ceil_clean(double x) { return std::ceil(x - 1e-9); }

double total_capacity_of(const ScheduleInstance& in) {
  return std::accumulate(in.capacities.begin(), in.capacities.end(), 0.0);
}

// E[u * 7 + d] for a full or partial psi
void add_load(std::vector<double>& load, const ScheduleInstance& in, std::size_t k, int d2, int count) {
  if (count == 0) return;
  for (StateId u = 0; u < in.num_wards; ++u)
    for (int d1 = 0; d1 < kDaysPerWeek; ++d1)
      load[u * kDaysPerWeek + static_cast<std::size_t>(d1)] +=
          count * in.folds[k][u * kDaysPerWeek + static_cast<std::size_t>(weekday_offset(d1, d2))];
}

std::vector<double> load_of(const std::vector<int>& psi, const ScheduleInstance& in) {
  std::vector<double> load(in.num_wards * kDaysPerWeek, 0.0);
  for (std::size_t k = 0; k < in.num_types; ++k)
    for (int d = 0; d < kDaysPerWeek; ++d) add_load(load, in, k, d, psi[k * kDaysPerWeek + static_cast<std::size_t>(d)]);
  return load;
}

std::vector<double> hospital_load(const std::vector<double>& load, std::size_t wards) {
  std::vector<double> out(kDaysPerWeek, 0.0);
  for (StateId u = 0; u < wards; ++u)
    for (int d = 0; d < kDaysPerWeek; ++d) out[static_cast<std::size_t>(d)] += load[u * kDaysPerWeek + static_cast<std::size_t>(d)];
  return out;
}

double blocking_of(const std::vector<double>& day_load, const ScheduleInstance& in) {
  const double Z = total_capacity_of(in);
  double B = 0.0;
  for (int d = 0; d < kDaysPerWeek; ++d) {
    const auto& p = in.hospital_emergency[static_cast<std::size_t>(d)];
    const double shift = day_load[static_cast<std::size_t>(d)] - Z;
    for (std::size_t n = 0; n < p.size(); ++n) {
      const double v = ceil_clean(static_cast<double>(n) + shift);
      if (v > 0.0) B += p[n] * v;
    }
  }
  return B;
}

double offunit_cell(double load, double capacity, double eta, double B, const std::vector<double>& p) {
  double O = 0.0;
  const double shift = load - capacity - eta * B;
  for (std::size_t n = 0; n < p.size(); ++n) {
    const double v = ceil_clean(static_cast<double>(n) + shift);
    if (v > 0.0) O += p[n] * v;
  }
  return O;
}


struct LpResult {
  bool ok = false;  // false when the pivot budget ran out
  double value = 0.0;
  std::vector<double> x;
};

// max c.x subject to A x <= b, x >= 0, with b >= 0 so the origin is feasible.
// Dense tableau, Dantzig pricing, Bland's rule after a run of degenerate pivots.
LpResult lp_maximize(const std::vector<double>& c, const std::vector<std::vector<double>>& A, const std::vector<double>& b) {
  const std::size_t m = A.size(), n = c.size(), w = n + m + 1;
  std::vector<double> t((m + 1) * w, 0.0);
  auto at = [&](std::size_t r, std::size_t col) -> double& { return t[r * w + col]; };
  std::vector<std::size_t> basis(m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < n; ++j) at(r, j) = A[r][j];
    at(r, n + r) = 1.0;
    at(r, w - 1) = std::max(0.0, b[r]);
    basis[r] = n + r;
  }
  for (std::size_t j = 0; j < n; ++j) at(m, j) = -c[j];
  int degenerate = 0;
  LpResult out;
  for (int iter = 0; iter < 20000; ++iter) {
    std::size_t enter = w;
    if (degenerate < 20) {
      double most = -1e-12;
      for (std::size_t j = 0; j + 1 < w; ++j)
        if (at(m, j) < most) most = at(m, j), enter = j;
    } else {
      for (std::size_t j = 0; j + 1 < w; ++j)
        if (at(m, j) < -1e-12) {
          enter = j;
          break;
        }
    }
    if (enter == w) {
      out.ok = true;
      out.value = at(m, w - 1);
      out.x.assign(n, 0.0);
      for (std::size_t r = 0; r < m; ++r)
        if (basis[r] < n) out.x[basis[r]] = at(r, w - 1);
      return out;
    }
    std::size_t leave = m;
    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
      const double a = at(r, enter);
      if (a <= 1e-12) continue;
      const double q = at(r, w - 1) / a;
      if (q < ratio - 1e-12 || (q < ratio + 1e-12 && leave < m && basis[r] < basis[leave])) ratio = q, leave = r;
    }
    if (leave == m) return out;  // unbounded cannot happen with variable caps
    degenerate = ratio < 1e-12 ? degenerate + 1 : 0;
    const double piv = at(leave, enter);
    for (std::size_t j = 0; j < w; ++j) at(leave, j) /= piv;
    for (std::size_t r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const double f = at(r, enter);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < w; ++j) at(r, j) -= f * at(leave, j);
    }
    basis[leave] = enter;
  }
  return out;
}

}  // namespace

double ScheduleInstance::total_capacity() const { return total_capacity_of(*this); }

void ScheduleInstance::check() const {
  const std::size_t V = num_types * kDaysPerWeek;
  if (capacities.size() != num_wards || eta.size() != num_wards || offunit_limit.size() != num_wards)
    throw StructuralError("ward vectors must have one entry per ward");
  if (mu.size() != V || mu_cap.size() != V) throw StructuralError("mu and mu_cap need 7 entries per type");
  if (reward.size() != num_types) throw StructuralError("reward needs one entry per type");
  if (folds.size() != num_types) throw StructuralError("need one occupancy fold per type");
  for (const auto& f : folds)
    if (f.size() != num_wards * kDaysPerWeek) throw StructuralError("fold table has wrong size");
  if (ward_emergency.size() != num_wards * kDaysPerWeek || hospital_emergency.size() != kDaysPerWeek)
    throw StructuralError("emergency demand tables have wrong size");
  for (double c : capacities)
    if (!(c >= 0.0)) throw ConfigError("capacities must be nonnegative");
  if (!(blocking_limit >= 0.0)) throw ConfigError("blocking limit must be nonnegative");
  for (double o : offunit_limit)
    if (!(o >= 0.0)) throw ConfigError("off-unit limits must be nonnegative");
  for (std::size_t i = 0; i < V; ++i)
    if (mu[i] < 0 || mu_cap[i] < 0) throw ConfigError("admission volumes must be nonnegative");
  for (double r : reward)
    if (!std::isfinite(r)) throw ConfigError("rewards must be finite");
}

ScheduleInstance build_instance(const std::vector<Occupancy>& gamma_elective, const ArrivalPlan& emergency,
                                const std::vector<Occupancy>& gamma_emergency, const HospitalConfig& hospital) {
  ScheduleInstance in;
  in.num_types = gamma_elective.size();
  in.num_wards = hospital.capacities.size();
  if (in.num_wards == 0) throw ConfigError("hospital needs at least one ward");
  const std::size_t V = in.num_types * kDaysPerWeek;
  in.capacities = hospital.capacities;
  in.blocking_limit = hospital.blocking_limit;
  in.offunit_limit = hospital.offunit_limit.empty() ? std::vector<double>(in.num_wards, 0.0) : hospital.offunit_limit;
  in.mu = hospital.mu.empty() ? std::vector<int>(V, 0) : hospital.mu;
  in.mu_cap = hospital.mu_cap;
  in.reward = hospital.reward.empty() ? std::vector<double>(in.num_types, 1.0) : hospital.reward;
  if (in.mu_cap.size() != V) throw ConfigError("mu_cap needs 7 entries per elective type");

  for (const auto& g : gamma_elective) in.folds.push_back(weekly_folds(g, in.num_wards));

  CensusOptions copt;
  copt.eps_tail = hospital.n_max_tail;
  const auto em = emergency_demand(emergency, gamma_emergency, in.num_wards, copt);
  for (const auto& c : em.cells) in.ward_emergency.push_back(c.pmf);
  for (const auto& c : em.hospital) in.hospital_emergency.push_back(c.pmf);

  if (!hospital.eta.empty()) {
    in.eta = hospital.eta;
  } else {
    const auto base = load_of(in.mu, in);
    std::vector<double> demand(in.num_wards, 0.0);
    double total = 0.0;
    for (StateId u = 0; u < in.num_wards; ++u) {
      for (int d = 0; d < kDaysPerWeek; ++d)
        demand[u] += base[u * kDaysPerWeek + static_cast<std::size_t>(d)] + em.at(u, d).mean;
      total += demand[u];
    }
    in.eta.assign(in.num_wards, total > 0.0 ? 0.0 : 1.0 / static_cast<double>(in.num_wards));
    if (total > 0.0)
      for (StateId u = 0; u < in.num_wards; ++u) in.eta[u] = demand[u] / total;
  }
  in.check();
  return in;
}

std::vector<std::vector<int>> blocking_variables(const std::vector<int>& psi, const ScheduleInstance& in) {
  const auto day = hospital_load(load_of(psi, in), in.num_wards);
  const double Z = in.total_capacity();
  std::vector<std::vector<int>> out(kDaysPerWeek);
  for (int d = 0; d < kDaysPerWeek; ++d) {
    const auto& p = in.hospital_emergency[static_cast<std::size_t>(d)];
    for (std::size_t n = 0; n < p.size(); ++n)
      out[static_cast<std::size_t>(d)].push_back(
          static_cast<int>(std::max(0.0, ceil_clean(static_cast<double>(n) + day[static_cast<std::size_t>(d)] - Z))));
  }
  return out;
}

std::vector<std::vector<int>> offunit_variables(const std::vector<int>& psi, const ScheduleInstance& in) {
  const auto load = load_of(psi, in);
  const double B = blocking_of(hospital_load(load, in.num_wards), in);
  std::vector<std::vector<int>> out(in.num_wards * kDaysPerWeek);
  for (StateId u = 0; u < in.num_wards; ++u)
    for (int d = 0; d < kDaysPerWeek; ++d) {
      const std::size_t c = u * kDaysPerWeek + static_cast<std::size_t>(d);
      for (std::size_t n = 0; n < in.ward_emergency[c].size(); ++n)
        out[c].push_back(static_cast<int>(
            std::max(0.0, ceil_clean(static_cast<double>(n) + load[c] - in.capacities[u] - in.eta[u] * B))));
    }
  return out;
}

ScheduleMetrics evaluate_schedule(const std::vector<int>& psi, const ScheduleInstance& in) {
  in.check();
  if (psi.size() != in.num_types * kDaysPerWeek) throw StructuralError("psi needs 7 entries per type");
  ScheduleMetrics m;
  m.elective_load = load_of(psi, in);
  const auto day = hospital_load(m.elective_load, in.num_wards);
  m.expected_blocking = blocking_of(day, in);
  m.blocking_ok = m.expected_blocking <= in.blocking_limit + kFeasTol;
  m.offunit.assign(in.num_wards * kDaysPerWeek, 0.0);
  double census = 0.0;
  for (StateId u = 0; u < in.num_wards; ++u)
    for (int d = 0; d < kDaysPerWeek; ++d) {
      const std::size_t c = u * kDaysPerWeek + static_cast<std::size_t>(d);
      m.offunit[c] = offunit_cell(m.elective_load[c], in.capacities[u], in.eta[u], m.expected_blocking,
                                  in.ward_emergency[c]);
      if (m.offunit[c] > in.offunit_limit[u] + kFeasTol) m.offunit_ok = false;
      double em = 0.0;
      for (std::size_t n = 0; n < in.ward_emergency[c].size(); ++n) em += static_cast<double>(n) * in.ward_emergency[c][n];
      census += m.elective_load[c] + em;
    }
  const double Z = in.total_capacity();
  m.utilization = Z > 0.0 ? census / (kDaysPerWeek * Z) : 0.0;
  for (std::size_t k = 0; k < in.num_types; ++k) {
    int week = 0, base = 0;
    for (int d = 0; d < kDaysPerWeek; ++d) {
      const std::size_t i = k * kDaysPerWeek + static_cast<std::size_t>(d);
      if (psi[i] < 0 || psi[i] > in.mu_cap[i]) m.caps_ok = false;
      week += psi[i];
      base += in.mu[i];
    }
    if (week < base) m.mix_ok = false;
    m.throughput += week;
    m.objective += in.reward[k] * week;
  }
  return m;
}

namespace {

class BranchAndBound {
 public:
  BranchAndBound(const ScheduleInstance& in, const SolverOptions& opt)
      : in_(in), opt_(opt), V_(in.num_types * kDaysPerWeek), Z_(in.total_capacity()) {
    // per-variable hospital-level contribution to each weekday
    day_coef_.assign(V_ * kDaysPerWeek, 0.0);
    for (std::size_t k = 0; k < in.num_types; ++k)
      for (int d2 = 0; d2 < kDaysPerWeek; ++d2)
        for (StateId u = 0; u < in.num_wards; ++u)
          for (int d1 = 0; d1 < kDaysPerWeek; ++d1)
            day_coef_[(k * kDaysPerWeek + static_cast<std::size_t>(d2)) * kDaysPerWeek + static_cast<std::size_t>(d1)] +=
                in.folds[k][u * kDaysPerWeek + static_cast<std::size_t>(weekday_offset(d1, d2))];
    // any feasible schedule keeps each day's hospital load and each cell's ward load
    // below these (blocking at its limit for the cells)
    for (int d = 0; d < kDaysPerWeek; ++d)
      day_ceiling_.push_back(load_ceiling(in.hospital_emergency[static_cast<std::size_t>(d)], Z_, in.blocking_limit));
    for (StateId u = 0; u < in.num_wards; ++u)
      for (int d = 0; d < kDaysPerWeek; ++d)
        cell_ceiling_.push_back(load_ceiling(in.ward_emergency[u * kDaysPerWeek + static_cast<std::size_t>(d)],
                                             in.capacities[u] + in.eta[u] * in.blocking_limit, in.offunit_limit[u]));
    for (double r : in.reward)
      if (r != std::floor(r)) integral_rewards_ = false;
    for (std::size_t k = 0; k < in.num_types; ++k) {
      required_.push_back(0);
      for (int d = 0; d < kDaysPerWeek; ++d) required_.back() += in.mu[k * kDaysPerWeek + static_cast<std::size_t>(d)];
    }
  }

  ScheduleSolution run() {
    start_ = std::chrono::steady_clock::now();
    greedy_start();
    std::vector<int> lo(V_, 0), hi(in_.mu_cap.begin(), in_.mu_cap.end());
    for (std::size_t v = 0; v < V_; ++v)
      if (in_.reward[v / kDaysPerWeek] <= 0.0) hi[v] = std::min(hi[v], std::max(0, in_.mu[v]));
    root_bound_ = -1.0;
    search(lo, hi, true);
    if (root_bound_ < 0.0) root_bound_ = have_ ? best_obj_ : 0.0;

    ScheduleSolution sol;
    sol.nodes = nodes_;
    sol.bound = timed_out_ ? root_bound_ : (have_ ? best_obj_ : 0.0);
    if (!have_) {
      sol.status = timed_out_ ? limit_status_ : "infeasible";
      if (!timed_out_) sol.infeasible_family = diagnose();
      sol.gap = timed_out_ ? root_bound_ : 0.0;
      return sol;
    }
    sol.status = timed_out_ ? limit_status_ : "optimal";
    sol.psi = best_;
    sol.objective = best_obj_;
    sol.gap = timed_out_ ? std::max(0.0, root_bound_ - best_obj_) : 0.0;
    sol.metrics = evaluate_schedule(best_, in_);
    sol.delta = blocking_variables(best_, in_);
    sol.offu = offunit_variables(best_, in_);
    return sol;
  }

 private:
  double g_value(int d, double day_load) const {
    const auto& p = in_.hospital_emergency[static_cast<std::size_t>(d)];
    double v = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
      const double x = static_cast<double>(n) - Z_ + day_load;
      if (x > 0.0) v += p[n] * x;
    }
    return v;
  }
  double g_slope(int d, double day_load) const {
    const auto& p = in_.hospital_emergency[static_cast<std::size_t>(d)];
    double v = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n)
      if (static_cast<double>(n) - Z_ + day_load >= 0.0) v += p[n];
    return v;
  }

  // largest load x with sum_n p_n max(0, ceil(n + x - base)) <= limit; the left side
  // only grows with x, so bisection finds the edge
  static double load_ceiling(const std::vector<double>& p, double base, double limit) {
    auto f = [&](double x) {
      double v = 0.0;
      for (std::size_t n = 0; n < p.size(); ++n) {
        const double y = ceil_clean(static_cast<double>(n) + x - base);
        if (y > 0.0) v += p[n] * y;
      }
      return v;
    };
    double lo = base - static_cast<double>(p.size()) - 1.0, hi = base + limit + 1.0;
    if (f(lo) > limit + kFeasTol) return lo;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) <= limit + kFeasTol ? lo : hi) = mid;
    }
    return lo + 1e-9;
  }

  bool timed_out() {
    if (timed_out_) return true;
    if (opt_.node_limit > 0 && nodes_ >= opt_.node_limit) {
      timed_out_ = true;
      limit_status_ = "node_limit";
    } else if (std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() >
               opt_.time_limit_seconds) {
      timed_out_ = true;
    }
    return timed_out_;
  }

  bool offer(const std::vector<int>& psi) {
    const auto m = evaluate_schedule(psi, in_);
    if (m.feasible() && (!have_ || m.objective > best_obj_ + 1e-9)) {
      have_ = true;
      best_obj_ = m.objective;
      best_ = psi;
      return true;
    }
    return false;
  }

  // Node = box lo <= psi <= hi. Relaxation: blocking linearised at lo (the blocking
  // function is convex), per-day and per-cell load ceilings; all coefficients are
  // nonnegative, so the box is empty for the relaxation iff lo already breaks a row.
  void search(std::vector<int>& lo, std::vector<int>& hi, bool root = false) {
    ++nodes_;
    if (timed_out()) return;
    for (std::size_t k = 0; k < in_.num_types; ++k) {
      int top = 0;
      for (int d = 0; d < kDaysPerWeek; ++d) top += hi[k * kDaysPerWeek + static_cast<std::size_t>(d)];
      if (top < required_[k]) return;
    }
    const auto load = load_of(lo, in_);
    const auto day = hospital_load(load, in_.num_wards);
    if (blocking_of(day, in_) > in_.blocking_limit + kFeasTol) return;

    std::vector<std::size_t> vars;
    for (std::size_t v = 0; v < V_; ++v)
      if (hi[v] > lo[v]) vars.push_back(v);
    double base_obj = 0.0;
    for (std::size_t v = 0; v < V_; ++v) base_obj += in_.reward[v / kDaysPerWeek] * lo[v];

    std::vector<std::vector<double>> A;
    std::vector<double> b;
    const std::size_t n = vars.size();
    std::vector<double> row(n);
    double used = 0.0;
    std::array<double, kDaysPerWeek> slope{};
    for (int d = 0; d < kDaysPerWeek; ++d) {
      used += g_value(d, day[static_cast<std::size_t>(d)]);
      slope[static_cast<std::size_t>(d)] = g_slope(d, day[static_cast<std::size_t>(d)]);
    }
    auto add_row = [&](double room) {
      if (room < -kFeasTol) return false;
      A.push_back(row);
      b.push_back(room);
      return true;
    };
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = 0.0;
      for (int d = 0; d < kDaysPerWeek; ++d)
        row[j] += slope[static_cast<std::size_t>(d)] * day_coef_[vars[j] * kDaysPerWeek + static_cast<std::size_t>(d)];
    }
    if (!add_row(in_.blocking_limit - used)) return;
    for (int d = 0; d < kDaysPerWeek; ++d) {
      for (std::size_t j = 0; j < n; ++j) row[j] = day_coef_[vars[j] * kDaysPerWeek + static_cast<std::size_t>(d)];
      if (!add_row(day_ceiling_[static_cast<std::size_t>(d)] - day[static_cast<std::size_t>(d)])) return;
    }
    for (StateId u = 0; u < in_.num_wards; ++u)
      for (int d = 0; d < kDaysPerWeek; ++d) {
        const std::size_t cell = u * kDaysPerWeek + static_cast<std::size_t>(d);
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = vars[j] / kDaysPerWeek;
          const int d2 = static_cast<int>(vars[j] % kDaysPerWeek);
          row[j] = in_.folds[k][u * kDaysPerWeek + static_cast<std::size_t>(weekday_offset(d, d2))];
        }
        if (!add_row(cell_ceiling_[cell] - load[cell])) return;
      }
    for (std::size_t j = 0; j < n; ++j) {
      std::fill(row.begin(), row.end(), 0.0);
      row[j] = 1.0;
      add_row(hi[vars[j]] - lo[vars[j]]);
    }
    std::vector<double> c(n);
    for (std::size_t j = 0; j < n; ++j) c[j] = in_.reward[vars[j] / kDaysPerWeek];

    LpResult lp;
    if (n > 0) lp = lp_maximize(c, A, b);
    if (n > 0 && !opt_.use_bound) lp.value = 0.0;
    double bound = base_obj;
    if (n > 0) {
      if (lp.ok && opt_.use_bound) {
        bound += lp.value;
      } else {
        for (std::size_t j = 0; j < n; ++j) bound += std::max(0.0, c[j]) * (hi[vars[j]] - lo[vars[j]]);
      }
    }
    if (root) root_bound_ = bound;
    const double cut = integral_rewards_ ? std::floor(bound + 1e-6) : bound;
    if (have_ && cut <= best_obj_ + 1e-9) return;

    // rounded-down LP point is a cheap candidate
    std::vector<int> point = lo;
    std::size_t frac_var = V_;
    double frac_best = 0.0;
    bool integral = true;
    if (lp.ok)
      for (std::size_t j = 0; j < n; ++j) {
        const double x = lp.x[j];
        const double f = x - std::floor(x + 1e-7);
        point[vars[j]] += static_cast<int>(std::floor(x + 1e-7));
        const double dist = std::min(f, 1.0 - f);
        if (dist > 1e-6) {
          integral = false;
          if (dist > frac_best) frac_best = dist, frac_var = j;
        }
      }
    if (lp_nodes_++ % 64 == 0)
      greedy_fill(point);
    else
      offer(point);
    if (have_ && cut <= best_obj_ + 1e-9) return;
    if (n == 0) return;

    std::size_t v;
    int split;  // children: [lo, split - 1] and [split, hi]
    if (lp.ok && !integral) {
      v = vars[frac_var];
      split = lo[v] + static_cast<int>(std::ceil(lp.x[frac_var]));
    } else {
      // LP point is integral but not feasible (or no LP): split the widest box side
      std::size_t pick = 0;
      int widest = -1;
      for (std::size_t j = 0; j < n; ++j) {
        const int moved = lp.ok ? static_cast<int>(std::lround(lp.x[j])) : 0;
        const int width = hi[vars[j]] - lo[vars[j]] + (moved > 0 ? 1000 : 0);
        if (width > widest) widest = width, pick = j;
      }
      v = vars[pick];
      const int moved = lp.ok ? static_cast<int>(std::lround(lp.x[pick])) : 0;
      split = moved > 0 ? lo[v] + moved : lo[v] + 1;
      if (split <= lo[v]) split = lo[v] + 1;
    }
    const int old_lo = lo[v], old_hi = hi[v];
    hi[v] = split - 1;
    search(lo, hi);
    hi[v] = old_hi;
    lo[v] = split;
    search(lo, hi);
    lo[v] = old_lo;
  }

  // from a feasible psi, keep adding the single admission that leaves the most
  // slack until nothing fits
  void greedy_fill(std::vector<int> psi) {
    if (!evaluate_schedule(psi, in_).feasible()) return;
    for (;;) {
      double best_slack = -1.0;
      std::size_t pick = V_;
      for (std::size_t v = 0; v < V_; ++v) {
        if (psi[v] >= in_.mu_cap[v] || in_.reward[v / kDaysPerWeek] <= 0.0) continue;
        ++psi[v];
        const auto m = evaluate_schedule(psi, in_);
        --psi[v];
        if (!m.feasible()) continue;
        double slack = (in_.blocking_limit - m.expected_blocking) / std::max(in_.blocking_limit, 1e-9);
        for (StateId u = 0; u < in_.num_wards; ++u)
          for (int d = 0; d < kDaysPerWeek; ++d)
            slack = std::min(slack, (in_.offunit_limit[u] - m.offunit[u * kDaysPerWeek + static_cast<std::size_t>(d)]) /
                                        std::max(in_.offunit_limit[u], 1e-9));
        slack *= in_.reward[v / kDaysPerWeek];
        if (slack > best_slack) {
          best_slack = slack;
          pick = v;
        }
      }
      if (pick == V_) break;
      ++psi[pick];
    }
    if (offer(psi)) swap_search(psi);
  }

  // trade one admission for two while that stays feasible
  void swap_search(std::vector<int> psi) {
    bool improved = true;
    while (improved && !timed_out()) {
      improved = false;
      for (std::size_t i = 0; i < V_ && !improved; ++i) {
        if (psi[i] == 0) continue;
        --psi[i];
        for (std::size_t j = 0; j < V_ && !improved; ++j) {
          if (psi[j] >= in_.mu_cap[j]) continue;
          ++psi[j];
          for (std::size_t k = j; k < V_ && !improved; ++k) {
            if (psi[k] >= in_.mu_cap[k]) continue;
            ++psi[k];
            if (offer(psi))
              improved = true;
            else
              --psi[k];
          }
          if (!improved) --psi[j];
        }
        if (!improved) ++psi[i];
      }
    }
  }

  void greedy_start() { greedy_fill(in_.mu); }

  std::string diagnose() const {
    const auto m = evaluate_schedule(in_.mu, in_);
    if (!m.blocking_ok) return "blocking";
    if (!m.offunit_ok) return "off-unit";
    if (!m.caps_ok) return "caps";
    return "mix";
  }

  const ScheduleInstance& in_;
  SolverOptions opt_;
  std::size_t V_;
  double Z_;
  std::vector<double> day_coef_;
  std::vector<double> day_ceiling_;
  std::vector<double> cell_ceiling_;
  std::vector<int> required_;
  bool integral_rewards_ = true;

  std::vector<int> best_;
  double best_obj_ = 0.0;
  bool have_ = false;
  bool timed_out_ = false;
  std::string limit_status_ = "time_limit";
  std::uint64_t nodes_ = 0;
  std::uint64_t lp_nodes_ = 0;
  double root_bound_ = 0.0;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

ScheduleSolution solve_exact(const ScheduleInstance& instance, const SolverOptions& options) {
  instance.check();
  BranchAndBound bb(instance, options);
  return bb.run();
}

}  // namespace csi
