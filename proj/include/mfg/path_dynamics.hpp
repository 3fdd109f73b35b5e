#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/dynamics.hpp"

namespace mfg {

// Adapted path dependent control: an action per (s, path in X_s).
struct PurePathControl {
  int T = 0;
  std::vector<std::vector<Action>> table;  // [s][path id in X_s]

  static PurePathControl constant(int T, int d, Action a) {
    PurePathControl c;
    c.T = T;
    c.table.resize(static_cast<std::size_t>(T));
    for (int s = 0; s < T; ++s) {
      PathSpace sp{d, s};
      c.table[static_cast<std::size_t>(s)].assign(sp.size(), a);
    }
    return c;
  }

  ActionView at(int s, std::size_t path) const { return table[static_cast<std::size_t>(s)][path]; }
  Action& slot(int s, std::size_t path) { return table[static_cast<std::size_t>(s)][path]; }
};

inline PurePathControl concat_controls(const PurePathControl& a, const PurePathControl& b,
                                       int T0) {
  if (a.T != b.T) throw DimensionMismatch("concat: controls on different horizons");
  if (T0 < 0 || T0 > a.T) throw ValidationError("concat: split point outside [0, T]");
  PurePathControl out = a;
  for (int s = T0; s < a.T; ++s)
    out.table[static_cast<std::size_t>(s)] = b.table[static_cast<std::size_t>(s)];
  return out;
}

// Grid-indexed path control, the hashable form used for global-measure atoms
// and enumeration.
struct PathControlIdx {
  int T = 0;
  std::vector<std::vector<int>> idx;  // [s][path id in X_s] -> action grid index

  static PathControlIdx zeros(int T, int d) {
    PathControlIdx c;
    c.T = T;
    c.idx.resize(static_cast<std::size_t>(T));
    for (int s = 0; s < T; ++s) {
      PathSpace sp{d, s};
      c.idx[static_cast<std::size_t>(s)].assign(sp.size(), 0);
    }
    return c;
  }

  int at(int s, std::size_t path) const { return idx[static_cast<std::size_t>(s)][path]; }
  int& slot(int s, std::size_t path) { return idx[static_cast<std::size_t>(s)][path]; }

  PurePathControl to_control(const ActionSet& actions, int d) const {
    PurePathControl c = PurePathControl::constant(
        T, d, Action(actions.at(0).begin(), actions.at(0).end()));
    for (int s = 0; s < T; ++s)
      for (std::size_t p = 0; p < idx[static_cast<std::size_t>(s)].size(); ++p) {
        ActionView a = actions.at(idx[static_cast<std::size_t>(s)][p]);
        c.slot(s, p) = Action(a.begin(), a.end());
      }
    return c;
  }

};

// Per-step coefficient access: path dependent specs are called directly,
// state dependent ones read the terminal state and the current marginal
// (computed once per step).
struct PathStepCoeffs {
  const GameSpec* spec;
  int s;
  const PathMeasure* pm;
  SimplexMeasure marg;

  PathStepCoeffs(const GameSpec& sp, int s_, const PathMeasure& pm_)
      : spec(&sp), s(s_), pm(&pm_) {
    if (!sp.path_dependent) marg = pm_.terminal_marginal();
  }

  double q(PathView xs, ActionView a, int y) const {
    return spec->path_dependent ? spec->q_path(s, xs, *pm, a, y)
                                : spec->q(s, xs.back(), marg, a, y);
  }
  double F(PathView xs, ActionView a) const {
    return spec->path_dependent ? spec->F_path(s, xs, *pm, a)
                                : spec->F(s, xs.back(), marg, a);
  }
};

struct PathTerminalCoeffs {
  const GameSpec* spec;
  const PathMeasure* pm;
  SimplexMeasure marg;

  PathTerminalCoeffs(const GameSpec& sp, const PathMeasure& pm_) : spec(&sp), pm(&pm_) {
    if (!sp.path_dependent) marg = pm_.terminal_marginal();
  }
  double G(PathView xs) const {
    return spec->path_dependent ? spec->G_path(xs, *pm) : spec->G(xs.back(), marg);
  }
};

struct PathFlowRecord {
  int t = 0;
  std::vector<PathMeasure> measures;  // measures[k] = law of X_{(t+k) ^ .}

  const PathMeasure& at(int s) const {
    if (s < t || s >= t + static_cast<int>(measures.size()))
      throw DimensionMismatch("path flow does not cover time " + std::to_string(s));
    return measures[static_cast<std::size_t>(s - t)];
  }
  int T() const { return t + static_cast<int>(measures.size()) - 1; }
};

namespace detail {

// control_row(s, path, states) returns the action used on that node.
template <class ControlAt>
PathFlowRecord path_flow_impl(const GameSpec& spec, int t, const PathMeasure& mu,
                              ControlAt&& control_at) {
  if (!mu.full_support())
    throw NotFullSupport("path measure flow requires a fully supported start");
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
      Action a = control_at(s, p, xs);
      for (int y = 0; y < d; ++y)
        next[sp.extend(p, y)] += cur[p] * co.q(xs, a, y);
    }
    flow.measures.emplace_back(nxt, std::move(next));
  }
  return flow;
}

}  // namespace detail

inline PathFlowRecord path_measure_flow(const GameSpec& spec, int t, const PathMeasure& mu,
                                        const PurePathControl& alpha) {
  return detail::path_flow_impl(spec, t, mu,
                                [&](int s, std::size_t p, const std::vector<int>&) {
                                  ActionView a = alpha.at(s, p);
                                  return Action(a.begin(), a.end());
                                });
}

// Deviator's law started from a single path in X_{s0}; entry k is a vector
// over X_{s0+k} supported on extensions of the start path.
inline std::vector<std::vector<double>> path_individual_law(const GameSpec& spec,
                                                            const PathFlowRecord& flow, int s0,
                                                            std::size_t start,
                                                            const PurePathControl& tilde) {
  const int d = spec.d();
  std::vector<std::vector<double>> law;
  {
    PathSpace sp{d, s0};
    std::vector<double> nu(sp.size(), 0.0);
    nu.at(start) = 1.0;
    law.push_back(std::move(nu));
  }
  for (int s = s0; s < spec.T(); ++s) {
    PathSpace sp{d, s};
    PathSpace nx{d, s + 1};
    const PathMeasure& pm = flow.at(s);
    PathStepCoeffs co(spec, s, pm);
    const auto& nu = law.back();
    std::vector<double> next(nx.size(), 0.0);
    for (std::size_t p = 0; p < sp.size(); ++p) {
      if (nu[p] == 0.0) continue;
      auto xs = sp.states(p);
      for (int y = 0; y < d; ++y) next[sp.extend(p, y)] += nu[p] * co.q(xs, tilde.at(s, p), y);
    }
    law.push_back(std::move(next));
  }
  return law;
}

inline double path_cost_J(const GameSpec& spec, const PathFlowRecord& flow, int s0,
                          std::size_t start, const PurePathControl& tilde) {
  auto law = path_individual_law(spec, flow, s0, start, tilde);
  const int d = spec.d();
  double total = 0.0;
  for (int s = s0; s < spec.T(); ++s) {
    PathSpace sp{d, s};
    const auto& nu = law[static_cast<std::size_t>(s - s0)];
    PathStepCoeffs co(spec, s, flow.at(s));
    for (std::size_t p = 0; p < sp.size(); ++p) {
      if (nu[p] == 0.0) continue;
      auto xs = sp.states(p);
      total += nu[p] * co.F(xs, tilde.at(s, p));
    }
  }
  PathSpace spT{d, spec.T()};
  const auto& nuT = law.back();
  PathTerminalCoeffs ter(spec, flow.at(spec.T()));
  for (std::size_t p = 0; p < spT.size(); ++p) {
    if (nuT[p] == 0.0) continue;
    auto xs = spT.states(p);
    total += nuT[p] * ter.G(xs);
  }
  return total;
}

using PathTerminalFn = std::function<double(std::size_t path, const PathMeasure&)>;

inline double path_cost_J_truncated(const GameSpec& spec, const PathFlowRecord& flow, int T0,
                                    const PathTerminalFn& psi, int s0, std::size_t start,
                                    const PurePathControl& tilde) {
  if (s0 > T0 || T0 > spec.T()) throw ValidationError("truncated cost needs s0 <= T0 <= T");
  const int d = spec.d();
  std::vector<double> nu;
  {
    PathSpace sp{d, s0};
    nu.assign(sp.size(), 0.0);
    nu.at(start) = 1.0;
  }
  double total = 0.0;
  for (int s = s0; s < T0; ++s) {
    PathSpace sp{d, s};
    PathStepCoeffs co(spec, s, flow.at(s));
    std::vector<double> next(PathSpace{d, s + 1}.size(), 0.0);
    for (std::size_t p = 0; p < sp.size(); ++p) {
      if (nu[p] == 0.0) continue;
      auto xs = sp.states(p);
      total += nu[p] * co.F(xs, tilde.at(s, p));
      for (int y = 0; y < d; ++y) next[sp.extend(p, y)] += nu[p] * co.q(xs, tilde.at(s, p), y);
    }
    nu = std::move(next);
  }
  const PathMeasure& pmT0 = flow.at(T0);
  for (std::size_t p = 0; p < nu.size(); ++p)
    if (nu[p] != 0.0) total += nu[p] * psi(p, pmT0);
  return total;
}

struct PathValueTable {
  int s0 = 0;
  std::vector<std::vector<double>> v;    // [r - s0][path id in X_r]
  std::vector<std::vector<int>> argmin;  // grid index per node, r < horizon

  double at(int r, std::size_t path) const { return v[static_cast<std::size_t>(r - s0)][path]; }
  int argmin_at(int r, std::size_t path) const {
    return argmin[static_cast<std::size_t>(r - s0)][path];
  }
  std::span<const double> row(int r) const { return v[static_cast<std::size_t>(r - s0)]; }
};

inline PathValueTable path_value_v_truncated(const GameSpec& spec, const PathFlowRecord& flow,
                                             int T0, const PathTerminalFn& psi, int s0) {
  if (s0 > T0 || T0 > spec.T()) throw ValidationError("truncated value needs s0 <= T0 <= T");
  const int d = spec.d();
  PathValueTable table;
  table.s0 = s0;
  table.v.resize(static_cast<std::size_t>(T0 - s0 + 1));
  table.argmin.resize(static_cast<std::size_t>(T0 - s0 + 1));
  {
    PathSpace sp{d, T0};
    const PathMeasure& pm = flow.at(T0);
    auto& row = table.v[static_cast<std::size_t>(T0 - s0)];
    row.resize(sp.size());
    for (std::size_t p = 0; p < sp.size(); ++p) row[p] = psi(p, pm);
  }
  for (int r = T0 - 1; r >= s0; --r) {
    PathSpace sp{d, r};
    PathStepCoeffs co(spec, r, flow.at(r));
    const auto& next = table.v[static_cast<std::size_t>(r + 1 - s0)];
    auto& row = table.v[static_cast<std::size_t>(r - s0)];
    auto& arg = table.argmin[static_cast<std::size_t>(r - s0)];
    row.resize(sp.size());
    arg.assign(sp.size(), -1);
    for (std::size_t p = 0; p < sp.size(); ++p) {
      auto xs = sp.states(p);
      double best = 0.0;
      int best_i = -1;
      for (int ai = 0; ai < spec.actions.size(); ++ai) {
        ActionView a = spec.actions.at(ai);
        double val = co.F(xs, a);
        for (int y = 0; y < d; ++y) val += co.q(xs, a, y) * next[sp.extend(p, y)];
        if (best_i < 0 || val < best) {
          best = val;
          best_i = ai;
        }
      }
      row[p] = best;
      arg[p] = best_i;
    }
  }
  return table;
}

inline PathValueTable path_value_v(const GameSpec& spec, const PathFlowRecord& flow, int s0) {
  PathTerminalFn psi = [&spec](std::size_t path, const PathMeasure& pm) {
    PathSpace sp = pm.space();
    auto xs = sp.states(path);
    PathTerminalCoeffs ter(spec, pm);
    return ter.G(xs);
  };
  return path_value_v_truncated(spec, flow, spec.T(), psi, s0);
}

inline double path_tower_check(const GameSpec& spec, int t, const PathMeasure& mu,
                               const PurePathControl& alpha, const PurePathControl& tilde,
                               int T0) {
  if (T0 < t || T0 > spec.T()) throw ValidationError("tower split outside [t, T]");
  PathFlowRecord flow = path_measure_flow(spec, t, mu, alpha);
  PathTerminalFn psi = [&](std::size_t path, const PathMeasure&) {
    return path_cost_J(spec, flow, T0, path, tilde);
  };
  double worst = 0.0;
  PathSpace sp{spec.d(), t};
  for (std::size_t p = 0; p < sp.size(); ++p) {
    double direct = path_cost_J(spec, flow, t, p, tilde);
    double split = path_cost_J_truncated(spec, flow, T0, psi, t, p, tilde);
    worst = std::max(worst, std::abs(direct - split));
  }
  return worst;
}

// Enumeration of grid path controls on [t, t_end); t_end < 0 means T.
class PathControlEnum {
 public:
  PathControlEnum(const GameSpec& spec, int t, int t_end = -1,
                  std::size_t size_guard = 2'000'000)
      : spec_(&spec), t_(t), t_end_(t_end < 0 ? spec.T() : t_end) {
    slots_ = 0;
    for (int s = t; s < t_end_; ++s) slots_ += PathSpace{spec.d(), s}.size();
    const std::size_t n = static_cast<std::size_t>(spec.actions.size());
    count_ = 1;
    for (std::size_t k = 0; k < slots_; ++k) {
      if (count_ > size_guard / n + 1) {
        count_ = size_guard + 1;
        break;
      }
      count_ *= n;
    }
    if (count_ > size_guard)
      throw SizeGuardExceeded("path control enumeration needs " + std::to_string(n) + "^" +
                              std::to_string(slots_) + " controls");
  }

  std::size_t count() const { return count_; }

  PathControlIdx control_idx(std::size_t id) const {
    PathControlIdx c = PathControlIdx::zeros(spec_->T(), spec_->d());
    const std::size_t n = static_cast<std::size_t>(spec_->actions.size());
    for (int s = t_; s < t_end_; ++s) {
      PathSpace sp{spec_->d(), s};
      for (std::size_t p = 0; p < sp.size(); ++p) {
        c.slot(s, p) = static_cast<int>(id % n);
        id /= n;
      }
    }
    return c;
  }

  PurePathControl control(std::size_t id) const {
    return control_idx(id).to_control(spec_->actions, spec_->d());
  }

 private:
  const GameSpec* spec_;
  int t_;
  int t_end_;
  std::size_t slots_ = 0;
  std::size_t count_ = 0;
};

}  // namespace mfg
