#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/path_dynamics.hpp"

namespace mfg {

struct ValueFunction {
  std::vector<double> values;  // indexed by state (or path at the start time)
  std::string provenance;      // generating control id
  double gap = 0.0;            // equilibrium gap of the generating control

  double sup_dist(std::span<const double> other) const {
    return sup_distance(values, other);
  }
};

// V^eps as a finite union of sup-norm eps-balls around generator values.
struct SetValueApprox {
  double epsilon = 0.0;
  int t = 0;
  std::string family;  // control family tag
  std::vector<ValueFunction> generators;

  bool contains(std::span<const double> phi, double slack = 0.0) const {
    return distance(phi) <= epsilon + slack;
  }
  // sup-norm distance to the nearest generator
  double distance(std::span<const double> phi) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : generators) best = std::min(best, g.sup_dist(phi));
    return best;
  }
  void add_dedup(ValueFunction g, double tol = kDedupTol) {
    for (const auto& have : generators)
      if (have.sup_dist(g.values) <= tol) return;
    generators.push_back(std::move(g));
  }
};

// Per-state equilibrium gap J(t, mu, alpha; x, alpha) - v(mu^alpha; t, x).
// Nonnegative up to floating point noise because the backward value minimizes
// over a grid that contains alpha's own actions (holds whenever alpha is a
// grid control).
struct MfeGap {
  std::vector<double> gap;
  std::vector<double> cost;   // J(t, mu, alpha; ., alpha)
  std::vector<double> value;  // v(mu^alpha; t, .)

  double max_gap() const { return *std::max_element(gap.begin(), gap.end()); }
  bool is_eps_mfe(double eps) const { return max_gap() <= eps; }
};

inline MfeGap mfe_gap(const GameSpec& spec, int t, const SimplexMeasure& mu,
                      const PureStateControl& alpha) {
  if (!mu.full_support()) throw NotFullSupport("mfe gap requires mu with full support");
  FlowRecord flow = measure_flow(spec, t, mu, alpha);
  ValueTable vt = value_v(spec, flow, t);
  MfeGap out;
  for (int x = 0; x < spec.d(); ++x) {
    double J = cost_J(spec, flow, t, x, alpha);
    out.cost.push_back(J);
    out.value.push_back(vt.at(t, x));
    out.gap.push_back(J - vt.at(t, x));
  }
  return out;
}

struct SetValueOptions {
  double tol_exact = kExactMfeTol;  // slack treated as an exact equilibrium
  std::size_t size_guard = 2'000'000;
  unsigned threads = 0;
};

// Both generator families of the eps set value: the cost vectors
// J(t, mu, a*; ., a*) and the variant v(mu^{a*}; t, .) family.
struct SetValueResult {
  SetValueApprox costs;
  SetValueApprox values;
};

inline SetValueResult set_value_eps(const GameSpec& spec, int t, const SimplexMeasure& mu,
                                    double eps, const SetValueOptions& opt = {}) {
  if (!mu.full_support()) throw NotFullSupport("set value requires mu with full support");
  SetValueResult out;
  out.costs.epsilon = eps;
  out.costs.t = t;
  out.costs.family = "state-grid";
  out.values = out.costs;
  if (t == spec.T()) {
    // no controls left: the only value is the terminal cost
    ValueFunction g;
    for (int x = 0; x < spec.d(); ++x) g.values.push_back(spec.G(x, mu));
    g.provenance = "terminal";
    out.costs.generators.push_back(g);
    out.values.generators.push_back(std::move(g));
    return out;
  }

  StateControlEnum en(spec, t, -1, opt.size_guard);
  const double threshold = std::max(eps, opt.tol_exact);
  std::vector<char> keep(en.count(), 0);
  std::vector<MfeGap> gaps(en.count());
  parallel_for(
      en.count(),
      [&](std::size_t id) {
        MfeGap g = mfe_gap(spec, t, mu, en.control(id));
        if (g.max_gap() <= threshold) {
          keep[id] = 1;
          gaps[id] = std::move(g);
        }
      },
      opt.threads);
  for (std::size_t id = 0; id < en.count(); ++id) {
    if (!keep[id]) continue;
    ValueFunction gc{gaps[id].cost, "alpha#" + std::to_string(id), gaps[id].max_gap()};
    ValueFunction gv{gaps[id].value, "alpha#" + std::to_string(id), gaps[id].max_gap()};
    out.costs.add_dedup(std::move(gc));
    out.values.add_dedup(std::move(gv));
  }
  return out;
}

// Raw set value: exact equilibria only (within tol_exact).
inline SetValueApprox raw_set_value(const GameSpec& spec, int t, const SimplexMeasure& mu,
                                    double tol_exact = kExactMfeTol,
                                    const SetValueOptions& opt = {}) {
  SetValueOptions o = opt;
  o.tol_exact = tol_exact;
  SetValueApprox sv = set_value_eps(spec, t, mu, 0.0, o).costs;
  sv.epsilon = 0.0;
  sv.family = "state-grid-exact";
  return sv;
}

// Path dependent raw set value at (t, mu); generators are vectors over X_t.
inline SetValueApprox raw_set_value_path(const GameSpec& spec, int t, const PathMeasure& mu,
                                         double tol_exact = kExactMfeTol,
                                         const SetValueOptions& opt = {}) {
  if (!mu.full_support())
    throw NotFullSupport("path set value requires mu with full support");
  PathControlEnum en(spec, t, -1, opt.size_guard);
  PathSpace sp = mu.space();
  SetValueApprox sv;
  sv.epsilon = 0.0;
  sv.t = t;
  sv.family = "path-grid-exact";
  std::vector<char> keep(en.count(), 0);
  std::vector<std::vector<double>> costs(en.count());
  std::vector<double> gapmax(en.count(), 0.0);
  parallel_for(
      en.count(),
      [&](std::size_t id) {
        PurePathControl alpha = en.control(id);
        PathFlowRecord flow = path_measure_flow(spec, t, mu, alpha);
        PathValueTable vt = path_value_v(spec, flow, t);
        std::vector<double> J(sp.size());
        double worst = 0.0;
        for (std::size_t p = 0; p < sp.size(); ++p) {
          J[p] = path_cost_J(spec, flow, t, p, alpha);
          worst = std::max(worst, J[p] - vt.at(t, p));
        }
        if (worst <= tol_exact) {
          keep[id] = 1;
          costs[id] = std::move(J);
          gapmax[id] = worst;
        }
      },
      opt.threads);
  for (std::size_t id = 0; id < en.count(); ++id)
    if (keep[id]) sv.add_dedup({std::move(costs[id]), "alpha#" + std::to_string(id), gapmax[id]});
  return sv;
}

// Right side of the set-value recursion at split time T0: truncated-game
// equilibrium costs J(T0, psi; t, mu, a*; ., a*) over pairs of a grid control
// a* on [t, T0) and a continuation generator psi from the eps set value at
// (T0, mu^{a*}_{T0}).
inline SetValueApprox dpp_rhs(const GameSpec& spec, int t, int T0, const SimplexMeasure& mu,
                              double eps, const SetValueOptions& opt = {}) {
  if (t >= T0 || T0 > spec.T()) throw ValidationError("dpp needs t < T0 <= T");
  SetValueApprox out;
  out.epsilon = eps;
  out.t = t;
  out.family = "dpp-rhs";
  const double threshold = std::max(eps, opt.tol_exact);
  StateControlEnum en(spec, t, T0, opt.size_guard);
  {
    StateControlEnum cont_probe(spec, T0, -1, opt.size_guard);
    if (en.count() > opt.size_guard / std::max<std::size_t>(cont_probe.count(), 1))
      throw SizeGuardExceeded("set-value recursion needs about " + std::to_string(en.count()) +
                              " x " + std::to_string(cont_probe.count()) +
                              " control evaluations");
  }
  for (std::size_t id = 0; id < en.count(); ++id) {
    PureStateControl astar = en.control(id);
    FlowRecord flow = measure_flow(spec, t, mu, astar);
    const SimplexMeasure& muT0 = flow.at(T0);
    SetValueResult cont = set_value_eps(spec, T0, muT0, eps, opt);
    for (std::size_t gi = 0; gi < cont.costs.generators.size(); ++gi) {
      const auto& psi_vec = cont.costs.generators[gi].values;
      TerminalFn psi = [&psi_vec](int y, const SimplexMeasure&) { return psi_vec[static_cast<std::size_t>(y)]; };
      ValueTable vt = value_v_truncated(spec, flow, T0, psi, t);
      std::vector<double> J(static_cast<std::size_t>(spec.d()));
      double worst = 0.0;
      for (int x = 0; x < spec.d(); ++x) {
        J[static_cast<std::size_t>(x)] = cost_J_truncated(spec, flow, T0, psi, t, x, astar);
        worst = std::max(worst, J[static_cast<std::size_t>(x)] - vt.at(t, x));
      }
      if (worst <= threshold)
        out.add_dedup({std::move(J),
                       "alpha#" + std::to_string(id) + "+psi#" + std::to_string(gi), worst});
    }
  }
  return out;
}

struct DppDirection {
  double worst_defect = 0.0;
  bool pass = true;
};

struct DppEntry {
  double eps = 0.0;
  double inflation = 1.0;  // C = c_q^{t - T0}
  DppDirection forward;    // rhs(eps) generators inside lhs(C eps)
  DppDirection backward;   // lhs(eps) generators inside rhs(C eps)
};

struct DppReport {
  int t = 0, T0 = 0;
  std::vector<DppEntry> entries;
  bool all_pass() const {
    for (const auto& e : entries)
      if (!e.forward.pass || !e.backward.pass) return false;
    return true;
  }
};

// Finite-eps inclusions of the set-value recursion, checked with the
// inflation constant C = c_q^{t-T0} the proof provides.
inline DppReport dpp_check(const GameSpec& spec, int t, int T0, const SimplexMeasure& mu,
                           std::span<const double> eps_list, const SetValueOptions& opt = {}) {
  DppReport rep;
  rep.t = t;
  rep.T0 = T0;
  for (double eps : eps_list) {
    DppEntry e;
    e.eps = eps;
    e.inflation = std::pow(spec.c_q, static_cast<double>(t - T0));
    const double infl_eps = e.inflation * eps;
    SetValueApprox rhs = dpp_rhs(spec, t, T0, mu, eps, opt);
    SetValueApprox lhs = set_value_eps(spec, t, mu, eps, opt).costs;
    SetValueApprox lhs_infl = set_value_eps(spec, t, mu, infl_eps, opt).costs;
    SetValueApprox rhs_infl = dpp_rhs(spec, t, T0, mu, infl_eps, opt);
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

// The two-period example separating state dependent and path dependent raw
// set values: d = 2, T = 2, A = [a0, 1-a0], time-0 kernel uniform, time-1
// kernel (a, 1-a), running cost a(1-a) at time 1, terminal cost mu(x0).
inline GameSpec make_example71(double a0, bool include_midpoint = false) {
  if (!(a0 > 0.0 && a0 < 0.5)) throw ValidationError("example71 needs a0 in (0, 1/2)");
  GameSpec spec;
  spec.name = "example71";
  spec.states = StateSpace::of_size(2);
  spec.states.labels = {"lo", "hi"};
  spec.time.T = 2;
  std::vector<double> pts = {a0, 1.0 - a0};
  if (include_midpoint) pts.insert(pts.begin() + 1, 0.5);
  spec.actions = ActionSet::explicit_1d(pts);
  spec.actions.kind = ActionSet::Kind::box;
  spec.actions.lower = {a0};
  spec.actions.upper = {1.0 - a0};
  spec.c_q = a0;
  spec.C0 = 1.0;
  spec.q = [](int s, int, const SimplexMeasure&, ActionView a, int y) {
    if (s == 0) return 0.5;
    return y == 0 ? a[0] : 1.0 - a[0];
  };
  spec.F = [](int s, int, const SimplexMeasure&, ActionView a) {
    return s == 1 ? a[0] * (1.0 - a[0]) : 0.0;
  };
  spec.G = [](int, const SimplexMeasure& mu) { return mu[0]; };
  return spec;
}

struct Example71Report {
  double a0 = 0.0;
  double mu0 = 0.0;  // mu(lo)
  std::vector<double> state_values;    // sorted distinct constants
  std::vector<double> expected_triple; // {a0(2-a0), 1/2 + a0 - a0^2, 1 - a0^2}
  SetValueApprox path_set;
  double path_value = 0.0;  // mu0 a0 + (1-mu0)(1-a0) + a0(1-a0)
  bool path_value_in_path_set = false;
  bool path_value_in_state_set = false;
  bool coincidence = false;  // path value collides with a state value
};

inline Example71Report example71_counterexample(double a0, const SimplexMeasure& mu,
                                                const SetValueOptions& opt = {}) {
  if (mu.dim() != 2) throw DimensionMismatch("example71 needs a two-state measure");
  if (!mu.full_support()) throw NotFullSupport("example71 needs interior mu");
  GameSpec spec = make_example71(a0);
  Example71Report rep;
  rep.a0 = a0;
  rep.mu0 = mu[0];
  rep.expected_triple = {a0 * (2.0 - a0), 0.5 + a0 - a0 * a0, 1.0 - a0 * a0};

  SetValueApprox state_sv = raw_set_value(spec, 0, mu, kExactMfeTol, opt);
  for (const auto& g : state_sv.generators) rep.state_values.push_back(g.values[0]);
  std::sort(rep.state_values.begin(), rep.state_values.end());

  PathMeasure mu_path = PathMeasure::from_state_measure(mu);
  rep.path_set = raw_set_value_path(spec, 0, mu_path, kExactMfeTol, opt);

  rep.path_value = mu[0] * a0 + mu[1] * (1.0 - a0) + a0 * (1.0 - a0);
  std::vector<double> phi(2, rep.path_value);
  rep.path_value_in_path_set = rep.path_set.distance(phi) <= kDedupTol;
  double dist_state = state_sv.distance(phi);
  rep.path_value_in_state_set = dist_state <= kDedupTol;
  rep.coincidence = rep.path_value_in_state_set;
  return rep;
}

}  // namespace mfg
