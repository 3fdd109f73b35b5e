#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/path_dynamics.hpp"
#include "mfg/setvalue.hpp"

namespace mfg {

// Path dependent relaxed control: a probability row over the action grid per
// (s, path in X_s).
struct RelaxedControl {
  int T = 0;
  std::vector<std::vector<std::vector<double>>> rows;  // [s][path id][action]

  static RelaxedControl dirac_at(int T, int d, int n_actions, int grid_index = 0) {
    RelaxedControl c;
    c.T = T;
    c.rows.resize(static_cast<std::size_t>(T));
    for (int s = 0; s < T; ++s) {
      PathSpace sp{d, s};
      std::vector<double> row(static_cast<std::size_t>(n_actions), 0.0);
      row[static_cast<std::size_t>(grid_index)] = 1.0;
      c.rows[static_cast<std::size_t>(s)].assign(sp.size(), row);
    }
    return c;
  }

  static RelaxedControl dirac_of(const PathControlIdx& alpha, int d, int n_actions) {
    RelaxedControl c = dirac_at(alpha.T, d, n_actions, 0);
    for (int s = 0; s < alpha.T; ++s) {
      PathSpace sp{d, s};
      for (std::size_t p = 0; p < sp.size(); ++p) {
        auto& row = c.rows[static_cast<std::size_t>(s)][p];
        std::fill(row.begin(), row.end(), 0.0);
        row[static_cast<std::size_t>(alpha.at(s, p))] = 1.0;
      }
    }
    return c;
  }

  std::span<const double> row(int s, std::size_t p) const {
    return rows[static_cast<std::size_t>(s)][p];
  }
  std::vector<double>& slot(int s, std::size_t p) { return rows[static_cast<std::size_t>(s)][p]; }

  void check() const {
    for (const auto& level : rows)
      for (const auto& row : level) {
        double mass = pairwise_sum(row);
        if (std::abs(mass - 1.0) > kMassTol)
          throw ValidationError("relaxed control row mass != 1");
        for (double w : row)
          if (w < -kMassTol) throw ValidationError("negative relaxed row weight");
      }
  }

  bool is_dirac(double tol = kMassTol) const {
    for (const auto& level : rows)
      for (const auto& row : level)
        for (double w : row)
          if (w > tol && w < 1.0 - tol) return false;
    return true;
  }
};

// gamma-averaged step kernel and running cost.
namespace detail {

inline double relaxed_q(const GameSpec& spec, const PathStepCoeffs& co, PathView xs,
                        std::span<const double> row, int y) {
  double total = 0.0;
  for (int ai = 0; ai < spec.actions.size(); ++ai)
    if (row[static_cast<std::size_t>(ai)] != 0.0)
      total += row[static_cast<std::size_t>(ai)] * co.q(xs, spec.actions.at(ai), y);
  return total;
}

inline double relaxed_F(const GameSpec& spec, const PathStepCoeffs& co, PathView xs,
                        std::span<const double> row) {
  double total = 0.0;
  for (int ai = 0; ai < spec.actions.size(); ++ai)
    if (row[static_cast<std::size_t>(ai)] != 0.0)
      total += row[static_cast<std::size_t>(ai)] * co.F(xs, spec.actions.at(ai));
  return total;
}

}  // namespace detail

inline PathFlowRecord relaxed_measure_flow(const GameSpec& spec, int t, const PathMeasure& mu,
                                           const RelaxedControl& gamma) {
  if (!mu.full_support())
    throw NotFullSupport("relaxed measure flow requires a fully supported start");
  if (mu.t() != t) throw DimensionMismatch("initial path measure must live on X_t");
  const int d = spec.d();
  PathFlowRecord flow;
  flow.t = t;
  flow.measures.push_back(mu);
  for (int s = t; s < spec.T(); ++s) {
    const PathMeasure& cur = flow.measures.back();
    PathSpace sp = cur.space();
    PathSpace nxt{d, s + 1};
    PathStepCoeffs co(spec, s, cur);
    std::vector<double> next(nxt.size(), 0.0);
    for (std::size_t p = 0; p < sp.size(); ++p) {
      if (cur[p] == 0.0) continue;
      auto xs = sp.states(p);
      auto row = gamma.row(s, p);
      for (int y = 0; y < d; ++y)
        next[sp.extend(p, y)] += cur[p] * detail::relaxed_q(spec, co, xs, row, y);
    }
    flow.measures.emplace_back(nxt, std::move(next));
  }
  return flow;
}

inline double relaxed_cost_J(const GameSpec& spec, const PathFlowRecord& flow, int s0,
                             std::size_t start, const RelaxedControl& tilde) {
  const int d = spec.d();
  std::vector<double> nu(PathSpace{d, s0}.size(), 0.0);
  nu.at(start) = 1.0;
  double total = 0.0;
  for (int s = s0; s < spec.T(); ++s) {
    PathSpace sp{d, s};
    PathStepCoeffs co(spec, s, flow.at(s));
    std::vector<double> next(PathSpace{d, s + 1}.size(), 0.0);
    for (std::size_t p = 0; p < sp.size(); ++p) {
      if (nu[p] == 0.0) continue;
      auto xs = sp.states(p);
      auto row = tilde.row(s, p);
      total += nu[p] * detail::relaxed_F(spec, co, xs, row);
      for (int y = 0; y < d; ++y)
        next[sp.extend(p, y)] += nu[p] * detail::relaxed_q(spec, co, xs, row, y);
    }
    nu = std::move(next);
  }
  PathSpace spT{d, spec.T()};
  PathTerminalCoeffs ter(spec, flow.at(spec.T()));
  for (std::size_t p = 0; p < spT.size(); ++p) {
    if (nu[p] == 0.0) continue;
    auto xs = spT.states(p);
    total += nu[p] * ter.G(xs);
  }
  return total;
}

inline double relaxed_cost_J_truncated(const GameSpec& spec, const PathFlowRecord& flow,
                                       int T0, const PathTerminalFn& psi, int s0,
                                       std::size_t start, const RelaxedControl& tilde) {
  if (s0 > T0 || T0 > spec.T()) throw ValidationError("truncated cost needs s0 <= T0 <= T");
  const int d = spec.d();
  std::vector<double> nu(PathSpace{d, s0}.size(), 0.0);
  nu.at(start) = 1.0;
  double total = 0.0;
  for (int s = s0; s < T0; ++s) {
    PathSpace sp{d, s};
    PathStepCoeffs co(spec, s, flow.at(s));
    std::vector<double> next(PathSpace{d, s + 1}.size(), 0.0);
    for (std::size_t p = 0; p < sp.size(); ++p) {
      if (nu[p] == 0.0) continue;
      auto xs = sp.states(p);
      auto row = tilde.row(s, p);
      total += nu[p] * detail::relaxed_F(spec, co, xs, row);
      for (int y = 0; y < d; ++y)
        next[sp.extend(p, y)] += nu[p] * detail::relaxed_q(spec, co, xs, row, y);
    }
    nu = std::move(next);
  }
  const PathMeasure& pmT0 = flow.at(T0);
  for (std::size_t p = 0; p < nu.size(); ++p)
    if (nu[p] != 0.0) total += nu[p] * psi(p, pmT0);
  return total;
}

// The deviator's best relaxed response solves a per-step linear program over
// the simplex whose minimum sits at a Dirac row, so the pure-control backward
// recursion computes the relaxed value exactly.
inline PathValueTable relaxed_value_v(const GameSpec& spec, const PathFlowRecord& flow,
                                      int s0) {
  return path_value_v(spec, flow, s0);
}

inline PathValueTable relaxed_value_v_truncated(const GameSpec& spec,
                                                const PathFlowRecord& flow, int T0,
                                                const PathTerminalFn& psi, int s0) {
  return path_value_v_truncated(spec, flow, T0, psi, s0);
}

// Split-at-T0 identity for relaxed costs, an exact property of the recursion.
inline double relaxed_tower_check(const GameSpec& spec, int t, const PathMeasure& mu,
                                  const RelaxedControl& gamma, const RelaxedControl& tilde,
                                  int T0) {
  if (T0 < t || T0 > spec.T()) throw ValidationError("tower split outside [t, T]");
  PathFlowRecord flow = relaxed_measure_flow(spec, t, mu, gamma);
  PathTerminalFn psi = [&](std::size_t p, const PathMeasure&) {
    return relaxed_cost_J(spec, flow, T0, p, tilde);
  };
  double worst = 0.0;
  PathSpace sp{spec.d(), t};
  for (std::size_t p = 0; p < sp.size(); ++p) {
    double direct = relaxed_cost_J(spec, flow, t, p, tilde);
    double split = relaxed_cost_J_truncated(spec, flow, T0, psi, t, p, tilde);
    worst = std::max(worst, std::abs(direct - split));
  }
  return worst;
}

struct RelaxedMfeGap {
  std::vector<double> gap;   // per path in X_t
  std::vector<double> cost;  // J(t, mu, gamma; ., gamma)
  std::vector<double> value;

  double max_gap() const { return *std::max_element(gap.begin(), gap.end()); }
  bool is_eps_mfe(double eps) const { return max_gap() <= eps; }
};

inline RelaxedMfeGap relaxed_mfe_gap(const GameSpec& spec, int t, const PathMeasure& mu,
                                     const RelaxedControl& gamma) {
  PathFlowRecord flow = relaxed_measure_flow(spec, t, mu, gamma);
  PathValueTable vt = relaxed_value_v(spec, flow, t);
  RelaxedMfeGap out;
  PathSpace sp = mu.space();
  for (std::size_t p = 0; p < sp.size(); ++p) {
    double J = relaxed_cost_J(spec, flow, t, p, gamma);
    out.cost.push_back(J);
    out.value.push_back(vt.at(t, p));
    out.gap.push_back(J - vt.at(t, p));
  }
  return out;
}

// Rows with entries k/m over the action grid.
class SimplexGrid {
 public:
  SimplexGrid(int n_actions, int resolution) {
    std::vector<int> counts(static_cast<std::size_t>(n_actions), 0);
    build(counts, 0, resolution, n_actions);
  }

  std::size_t count() const { return rows_.size(); }
  std::span<const double> row(std::size_t i) const { return rows_[i]; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

 private:
  void build(std::vector<int>& counts, int pos, int remaining, int n) {
    if (pos == n - 1) {
      counts[static_cast<std::size_t>(pos)] = remaining;
      std::vector<double> row(static_cast<std::size_t>(n));
      int m = 0;
      for (int c : counts) m += c;
      for (int i = 0; i < n; ++i)
        row[static_cast<std::size_t>(i)] =
            static_cast<double>(counts[static_cast<std::size_t>(i)]) / m;
      rows_.push_back(std::move(row));
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      counts[static_cast<std::size_t>(pos)] = k;
      build(counts, pos + 1, remaining - k, n);
    }
  }

  std::vector<std::vector<double>> rows_;
};

// Assignments of simplex-grid rows to every path node on [t, t_end).
class RelaxedControlEnum {
 public:
  RelaxedControlEnum(const GameSpec& spec, int t, int resolution, int t_end = -1,
                     std::size_t size_guard = 2'000'000)
      : spec_(&spec),
        t_(t),
        t_end_(t_end < 0 ? spec.T() : t_end),
        grid_(spec.actions.size(), resolution) {
    slots_ = 0;
    for (int s = t; s < t_end_; ++s) slots_ += PathSpace{spec.d(), s}.size();
    count_ = 1;
    for (std::size_t k = 0; k < slots_; ++k) {
      if (count_ > size_guard / grid_.count() + 1) {
        count_ = size_guard + 1;
        break;
      }
      count_ *= grid_.count();
    }
    if (count_ > size_guard)
      throw SizeGuardExceeded("relaxed lattice needs " + std::to_string(grid_.count()) + "^" +
                              std::to_string(slots_) + " controls");
  }

  std::size_t count() const { return count_; }
  const SimplexGrid& grid() const { return grid_; }

  RelaxedControl control(std::size_t id) const {
    RelaxedControl c =
        RelaxedControl::dirac_at(spec_->T(), spec_->d(), spec_->actions.size(), 0);
    for (int s = t_; s < t_end_; ++s) {
      PathSpace sp{spec_->d(), s};
      for (std::size_t p = 0; p < sp.size(); ++p) {
        auto row = grid_.row(id % grid_.count());
        id /= grid_.count();
        c.slot(s, p).assign(row.begin(), row.end());
      }
    }
    return c;
  }

 private:
  const GameSpec* spec_;
  int t_;
  int t_end_;
  SimplexGrid grid_;
  std::size_t slots_ = 0;
  std::size_t count_ = 0;
};

struct RelaxedSetValueOptions {
  int resolution = 2;               // lattice rows use masses k/resolution
  double tol_exact = kExactMfeTol;
  std::size_t size_guard = 2'000'000;
  unsigned threads = 0;
};

struct RelaxedSetValueResult {
  SetValueApprox costs;   // generators J(t, mu, g*; ., g*) over X_t
  SetValueApprox values;  // variant family v(mu^{g*}; t, .)
};

inline RelaxedSetValueResult relaxed_set_value(const GameSpec& spec, int t,
                                               const PathMeasure& mu, double eps,
                                               const RelaxedSetValueOptions& opt = {}) {
  if (!mu.full_support())
    throw NotFullSupport("relaxed set value requires a fully supported start");
  RelaxedSetValueResult out;
  out.costs.epsilon = eps;
  out.costs.t = t;
  out.costs.family = "relaxed-lattice-m" + std::to_string(opt.resolution);
  out.values = out.costs;
  RelaxedControlEnum en(spec, t, opt.resolution, -1, opt.size_guard);
  const double threshold = std::max(eps, opt.tol_exact);
  std::vector<char> keep(en.count(), 0);
  std::vector<RelaxedMfeGap> gaps(en.count());
  parallel_for(
      en.count(),
      [&](std::size_t id) {
        RelaxedMfeGap g = relaxed_mfe_gap(spec, t, mu, en.control(id));
        if (g.max_gap() <= threshold) {
          keep[id] = 1;
          gaps[id] = std::move(g);
        }
      },
      opt.threads);
  for (std::size_t id = 0; id < en.count(); ++id) {
    if (!keep[id]) continue;
    out.costs.add_dedup({gaps[id].cost, "gamma#" + std::to_string(id), gaps[id].max_gap()});
    out.values.add_dedup({gaps[id].value, "gamma#" + std::to_string(id), gaps[id].max_gap()});
  }
  return out;
}

inline SetValueApprox relaxed_raw_set_value(const GameSpec& spec, int t, const PathMeasure& mu,
                                            const RelaxedSetValueOptions& opt = {}) {
  SetValueApprox sv = relaxed_set_value(spec, t, mu, 0.0, opt).costs;
  sv.epsilon = 0.0;
  return sv;
}

// Right side of the relaxed set-value recursion at split T0.
inline SetValueApprox relaxed_dpp_rhs(const GameSpec& spec, int t, int T0,
                                      const PathMeasure& mu, double eps,
                                      const RelaxedSetValueOptions& opt = {}) {
  if (t >= T0 || T0 > spec.T()) throw ValidationError("dpp needs t < T0 <= T");
  SetValueApprox out;
  out.epsilon = eps;
  out.t = t;
  out.family = "relaxed-dpp-rhs";
  const double threshold = std::max(eps, opt.tol_exact);
  PathSpace sp_t = mu.space();
  RelaxedControlEnum en(spec, t, opt.resolution, T0, opt.size_guard);
  {
    RelaxedControlEnum cont_probe(spec, T0, opt.resolution, -1, opt.size_guard);
    if (en.count() > opt.size_guard / std::max<std::size_t>(cont_probe.count(), 1))
      throw SizeGuardExceeded("relaxed recursion needs about " + std::to_string(en.count()) +
                              " x " + std::to_string(cont_probe.count()) +
                              " lattice evaluations");
  }
  for (std::size_t id = 0; id < en.count(); ++id) {
    RelaxedControl gstar = en.control(id);
    PathFlowRecord flow = relaxed_measure_flow(spec, t, mu, gstar);
    const PathMeasure& muT0 = flow.at(T0);
    RelaxedSetValueResult cont = relaxed_set_value(spec, T0, muT0, eps, opt);
    for (std::size_t gi = 0; gi < cont.costs.generators.size(); ++gi) {
      const auto& psi_vec = cont.costs.generators[gi].values;
      PathTerminalFn psi = [&psi_vec](std::size_t p, const PathMeasure&) { return psi_vec[p]; };
      PathValueTable vt = relaxed_value_v_truncated(spec, flow, T0, psi, t);
      std::vector<double> J(sp_t.size());
      double worst = 0.0;
      for (std::size_t p = 0; p < sp_t.size(); ++p) {
        J[p] = relaxed_cost_J_truncated(spec, flow, T0, psi, t, p, gstar);
        worst = std::max(worst, J[p] - vt.at(t, p));
      }
      if (worst <= threshold)
        out.add_dedup({std::move(J),
                       "gamma#" + std::to_string(id) + "+psi#" + std::to_string(gi), worst});
    }
  }
  return out;
}

inline DppReport relaxed_dpp_check(const GameSpec& spec, int t, int T0, const PathMeasure& mu,
                                   std::span<const double> eps_list,
                                   const RelaxedSetValueOptions& opt = {}) {
  DppReport rep;
  rep.t = t;
  rep.T0 = T0;
  for (double eps : eps_list) {
    DppEntry e;
    e.eps = eps;
    e.inflation = std::pow(spec.c_q, static_cast<double>(t - T0));
    const double infl_eps = e.inflation * eps;
    SetValueApprox rhs = relaxed_dpp_rhs(spec, t, T0, mu, eps, opt);
    SetValueApprox lhs = relaxed_set_value(spec, t, mu, eps, opt).costs;
    SetValueApprox lhs_infl = relaxed_set_value(spec, t, mu, infl_eps, opt).costs;
    SetValueApprox rhs_infl = relaxed_dpp_rhs(spec, t, T0, mu, infl_eps, opt);
    for (const auto& g : rhs.generators)
      e.forward.worst_defect = std::max(e.forward.worst_defect, lhs_infl.distance(g.values));
    for (const auto& g : lhs.generators)
      e.backward.worst_defect = std::max(e.backward.worst_defect, rhs_infl.distance(g.values));
    e.forward.pass = e.forward.worst_defect <= infl_eps + kDedupTol;
    e.backward.pass = e.backward.worst_defect <= infl_eps + kDedupTol;
    rep.entries.push_back(e);
  }
  return rep;
}

// Averages a path dependent relaxed control over paths sharing the current
// state, weighted by the control's own flow. Defined for state dependent
// coefficients; the projected control is state dependent and reproduces the
// state marginal flow.
inline RelaxedControl state_projection(const GameSpec& spec, int t, const PathMeasure& mu,
                                       const RelaxedControl& gamma) {
  if (spec.path_dependent)
    throw ValidationError("state projection requires state dependent coefficients");
  const int d = spec.d();
  const int A = spec.actions.size();
  PathFlowRecord flow = relaxed_measure_flow(spec, t, mu, gamma);
  RelaxedControl out = RelaxedControl::dirac_at(spec.T(), d, A, 0);
  for (int s = t; s < spec.T(); ++s) {
    PathSpace sp{d, s};
    const PathMeasure& pm = flow.at(s);
    std::vector<std::vector<double>> state_rows(
        static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(A), 0.0));
    std::vector<double> state_mass(static_cast<std::size_t>(d), 0.0);
    for (std::size_t p = 0; p < sp.size(); ++p) {
      int x = sp.state_at(p, s);
      state_mass[static_cast<std::size_t>(x)] += pm[p];
      auto row = gamma.row(s, p);
      for (int ai = 0; ai < A; ++ai)
        state_rows[static_cast<std::size_t>(x)][static_cast<std::size_t>(ai)] +=
            pm[p] * row[static_cast<std::size_t>(ai)];
    }
    for (int x = 0; x < d; ++x) {
      if (state_mass[static_cast<std::size_t>(x)] <= 0.0)
        throw NotFullSupport("state projection hit a zero-mass state");
      for (int ai = 0; ai < A; ++ai)
        state_rows[static_cast<std::size_t>(x)][static_cast<std::size_t>(ai)] /=
            state_mass[static_cast<std::size_t>(x)];
    }
    for (std::size_t p = 0; p < sp.size(); ++p)
      out.slot(s, p) = state_rows[static_cast<std::size_t>(sp.state_at(p, s))];
  }
  return out;
}

struct StatePathEquivalenceReport {
  SetValueApprox path_set;   // raw relaxed set value over the path lattice
  SetValueApprox state_set;  // over the state dependent sub-lattice
  bool state_subset_of_path = true;
  // every path generator certified by a projected state dependent relaxed MFE
  bool path_matched_by_projection = true;
  double worst_projection_cost_gap = 0.0;  // |J(gamma*) - J(projected)| worst case
  double worst_projection_mfe_gap = 0.0;   // equilibrium gap of projections
  bool equivalent() const { return state_subset_of_path && path_matched_by_projection; }
};

// Desk-scale check of the state/path equivalence for relaxed controls: the
// state lattice produces a subset of the path lattice's raw set value, and
// every path-lattice equilibrium projects to a state dependent relaxed MFE
// with the same cost vector. Projections generally leave the lattice, which
// is why the reverse inclusion is certified through them rather than by
// lattice membership.
inline StatePathEquivalenceReport relax_state_path_equivalence(
    const GameSpec& spec, const SimplexMeasure& mu, const RelaxedSetValueOptions& opt = {}) {
  if (spec.path_dependent)
    throw ValidationError("equivalence check requires state dependent coefficients");
  StatePathEquivalenceReport rep;
  PathMeasure mu0 = PathMeasure::from_state_measure(mu);
  const int d = spec.d();
  const int A = spec.actions.size();

  // path lattice side, keeping the witnessing controls
  RelaxedControlEnum en(spec, 0, opt.resolution, -1, opt.size_guard);
  std::vector<RelaxedControl> witnesses;
  rep.path_set.epsilon = 0.0;
  rep.path_set.family = "relaxed-path-lattice";
  for (std::size_t id = 0; id < en.count(); ++id) {
    RelaxedControl g = en.control(id);
    RelaxedMfeGap gap = relaxed_mfe_gap(spec, 0, mu0, g);
    if (gap.max_gap() > opt.tol_exact) continue;
    std::size_t before = rep.path_set.generators.size();
    rep.path_set.add_dedup({gap.cost, "gamma#" + std::to_string(id), gap.max_gap()});
    if (rep.path_set.generators.size() > before) witnesses.push_back(std::move(g));
  }

  // state dependent sub-lattice: one row per (s, x), broadcast to paths
  SimplexGrid grid(A, opt.resolution);
  std::size_t state_slots = static_cast<std::size_t>(spec.T()) * static_cast<std::size_t>(d);
  std::size_t total = 1;
  for (std::size_t k = 0; k < state_slots; ++k) {
    if (total > opt.size_guard / grid.count() + 1)
      throw SizeGuardExceeded("state relaxed lattice too large");
    total *= grid.count();
  }
  rep.state_set.epsilon = 0.0;
  rep.state_set.family = "relaxed-state-lattice";
  for (std::size_t id = 0; id < total; ++id) {
    RelaxedControl g = RelaxedControl::dirac_at(spec.T(), d, A, 0);
    std::size_t rem = id;
    for (int s = 0; s < spec.T(); ++s) {
      PathSpace sp{d, s};
      std::vector<std::span<const double>> per_state;
      for (int x = 0; x < d; ++x) {
        per_state.push_back(grid.row(rem % grid.count()));
        rem /= grid.count();
      }
      for (std::size_t p = 0; p < sp.size(); ++p) {
        auto row = per_state[static_cast<std::size_t>(sp.state_at(p, s))];
        g.slot(s, p).assign(row.begin(), row.end());
      }
    }
    RelaxedMfeGap gap = relaxed_mfe_gap(spec, 0, mu0, g);
    if (gap.max_gap() <= opt.tol_exact)
      rep.state_set.add_dedup({gap.cost, "state-gamma#" + std::to_string(id), gap.max_gap()});
  }

  for (const auto& g : rep.state_set.generators)
    if (rep.path_set.distance(g.values) > kDedupTol) rep.state_subset_of_path = false;

  // project every path witness and certify it as a state dependent MFE with
  // the same cost vector
  for (std::size_t k = 0; k < witnesses.size(); ++k) {
    RelaxedControl proj = state_projection(spec, 0, mu0, witnesses[k]);
    RelaxedMfeGap gap = relaxed_mfe_gap(spec, 0, mu0, proj);
    rep.worst_projection_mfe_gap = std::max(rep.worst_projection_mfe_gap, gap.max_gap());
    double cost_gap = sup_distance(gap.cost, rep.path_set.generators[k].values);
    rep.worst_projection_cost_gap = std::max(rep.worst_projection_cost_gap, cost_gap);
    if (gap.max_gap() > opt.tol_exact || cost_gap > kDedupTol)
      rep.path_matched_by_projection = false;
  }
  return rep;
}

}  // namespace mfg
