#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mfg/core.hpp"

namespace mfg {

// State dependent control alpha: {0,...,T-1} x S -> A. Entries are free box
// points; grid-enumerable controls carry grid actions.
struct PureStateControl {
  std::vector<std::vector<Action>> table;  // [s][x]

  static PureStateControl constant(int T, int d, Action a) {
    PureStateControl c;
    c.table.assign(static_cast<std::size_t>(T),
                   std::vector<Action>(static_cast<std::size_t>(d), a));
    return c;
  }

  ActionView at(int s, int x) const {
    return table[static_cast<std::size_t>(s)][static_cast<std::size_t>(x)];
  }
  Action& slot(int s, int x) {
    return table[static_cast<std::size_t>(s)][static_cast<std::size_t>(x)];
  }
  int horizon() const { return static_cast<int>(table.size()); }
};

inline PureStateControl concat_controls(const PureStateControl& a,
                                        const PureStateControl& b, int T0) {
  if (a.horizon() != b.horizon())
    throw DimensionMismatch("concat: controls on different horizons");
  if (T0 < 0 || T0 > a.horizon())
    throw ValidationError("concat: split point outside [0, T]");
  PureStateControl out = a;
  for (int s = T0; s < a.horizon(); ++s)
    out.table[static_cast<std::size_t>(s)] = b.table[static_cast<std::size_t>(s)];
  return out;
}

// Measure dependent control, either a frozen pure control (the flow reduction)
// or the affine-clipped family
//   alpha(s, x, mu) = clip(beta0[s][x] + beta1[s][x] * <w, mu>),
// whose W1-Lipschitz constant is certifiable from the coefficients.
class MuControl {
 public:
  enum class Kind { frozen, affine_clipped };

  static MuControl frozen(PureStateControl c) {
    MuControl m;
    m.kind_ = Kind::frozen;
    m.frozen_ = std::move(c);
    return m;
  }

  static MuControl affine(std::vector<std::vector<Action>> beta0,
                          std::vector<std::vector<Action>> beta1,
                          std::vector<double> w, ActionSet box) {
    if (box.kind != ActionSet::Kind::box)
      throw ValidationError("affine-clipped control needs a box action set");
    MuControl m;
    m.kind_ = Kind::affine_clipped;
    m.beta0_ = std::move(beta0);
    m.beta1_ = std::move(beta1);
    m.w_ = std::move(w);
    m.box_ = std::move(box);
    return m;
  }

  Kind kind() const { return kind_; }

  Action at(int s, int x, const SimplexMeasure& mu) const {
    if (kind_ == Kind::frozen) {
      ActionView a = frozen_.at(s, x);
      return Action(a.begin(), a.end());
    }
    double m = 0.0;
    for (int i = 0; i < mu.dim(); ++i) m += w_[static_cast<std::size_t>(i)] * mu[i];
    const Action& b0 = beta0_[static_cast<std::size_t>(s)][static_cast<std::size_t>(x)];
    const Action& b1 = beta1_[static_cast<std::size_t>(s)][static_cast<std::size_t>(x)];
    Action a(b0.size());
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = b0[k] + b1[k] * m;
    return box_.clip(a);
  }

  // Certified Lipschitz constant in W1: clipping is nonexpansive and
  // |<w, mu - nu>| <= max|w| * W1(mu, nu).
  double lipschitz_constant() const {
    if (kind_ == Kind::frozen) return 0.0;
    double wmax = 0.0;
    for (double x : w_) wmax = std::max(wmax, std::abs(x));
    double bmax = 0.0;
    for (const auto& row : beta1_)
      for (const auto& b : row) {
        double n2 = 0.0;
        for (double c : b) n2 += c * c;
        bmax = std::max(bmax, std::sqrt(n2));
      }
    return bmax * wmax;
  }

 private:
  Kind kind_ = Kind::frozen;
  PureStateControl frozen_;
  std::vector<std::vector<Action>> beta0_, beta1_;
  std::vector<double> w_;
  ActionSet box_;
};

// Population flow mu_s for s = t, ..., T together with its provenance.
struct FlowRecord {
  int t = 0;
  std::vector<SimplexMeasure> measures;  // measures[k] = mu_{t+k}

  const SimplexMeasure& at(int s) const {
    if (s < t || s >= t + static_cast<int>(measures.size()))
      throw DimensionMismatch("flow does not cover time " + std::to_string(s));
    return measures[static_cast<std::size_t>(s - t)];
  }
  int T() const { return t + static_cast<int>(measures.size()) - 1; }
};

namespace detail {

template <class ControlAt>
FlowRecord flow_impl(const GameSpec& spec, int t, const SimplexMeasure& mu,
                     ControlAt&& control_at) {
  if (!mu.full_support())
    throw NotFullSupport("measure flow requires a fully supported start");
  if (t < 0 || t >= spec.T()) throw ValidationError("flow start time outside [0, T)");
  const int d = spec.d();
  FlowRecord flow;
  flow.t = t;
  flow.measures.push_back(mu);
  for (int s = t; s < spec.T(); ++s) {
    const SimplexMeasure& cur = flow.measures.back();
    std::vector<double> next(static_cast<std::size_t>(d), 0.0);
    for (int x = 0; x < d; ++x) {
      Action a = control_at(s, x, cur);
      for (int y = 0; y < d; ++y)
        next[static_cast<std::size_t>(y)] += cur[x] * spec.q(s, x, cur, a, y);
    }
    flow.measures.emplace_back(std::move(next));
  }
  return flow;
}

}  // namespace detail

inline FlowRecord measure_flow(const GameSpec& spec, int t, const SimplexMeasure& mu,
                               const PureStateControl& alpha) {
  return detail::flow_impl(spec, t, mu, [&](int s, int x, const SimplexMeasure&) {
    ActionView a = alpha.at(s, x);
    return Action(a.begin(), a.end());
  });
}

inline FlowRecord measure_flow(const GameSpec& spec, int t, const SimplexMeasure& mu,
                               const MuControl& alpha) {
  return detail::flow_impl(spec, t, mu, [&](int s, int x, const SimplexMeasure& cur) {
    return alpha.at(s, x, cur);
  });
}

// Freezes the measure argument along the control's own flow (the reduction
// that turns a measure-dependent control into a plain state control with the
// identical flow).
inline PureStateControl freeze_mu_dependence(const GameSpec& spec, int t,
                                             const SimplexMeasure& mu,
                                             const MuControl& alpha) {
  FlowRecord flow = measure_flow(spec, t, mu, alpha);
  PureStateControl out =
      PureStateControl::constant(spec.T(), spec.d(), Action(spec.actions.at(0).begin(),
                                                            spec.actions.at(0).end()));
  for (int s = t; s < spec.T(); ++s)
    for (int x = 0; x < spec.d(); ++x) out.slot(s, x) = alpha.at(s, x, flow.at(s));
  return out;
}

// Marginals of a single deviating player started at (s0, x) with control
// tilde_alpha, while the population follows the recorded flow.
inline std::vector<SimplexMeasure> individual_law(const GameSpec& spec,
                                                  const FlowRecord& flow, int s0, int x,
                                                  const PureStateControl& tilde_alpha) {
  const int d = spec.d();
  std::vector<SimplexMeasure> law;
  law.push_back(SimplexMeasure::dirac(d, x));
  for (int s = s0; s < spec.T(); ++s) {
    const SimplexMeasure& nu = law.back();
    const SimplexMeasure& mus = flow.at(s);
    std::vector<double> next(static_cast<std::size_t>(d), 0.0);
    for (int z = 0; z < d; ++z) {
      if (nu[z] == 0.0) continue;
      for (int y = 0; y < d; ++y)
        next[static_cast<std::size_t>(y)] += nu[z] * spec.q(s, z, mus, tilde_alpha.at(s, z), y);
    }
    law.emplace_back(std::move(next));
  }
  return law;
}

// Expected cost of the deviator under the recorded flow.
inline double cost_J(const GameSpec& spec, const FlowRecord& flow, int s0, int x,
                     const PureStateControl& tilde_alpha) {
  auto law = individual_law(spec, flow, s0, x, tilde_alpha);
  double total = 0.0;
  for (int s = s0; s < spec.T(); ++s) {
    const SimplexMeasure& nu = law[static_cast<std::size_t>(s - s0)];
    const SimplexMeasure& mus = flow.at(s);
    for (int z = 0; z < spec.d(); ++z)
      if (nu[z] != 0.0) total += nu[z] * spec.F(s, z, mus, tilde_alpha.at(s, z));
  }
  const SimplexMeasure& nuT = law.back();
  const SimplexMeasure& muT = flow.at(spec.T());
  for (int z = 0; z < spec.d(); ++z)
    if (nuT[z] != 0.0) total += nuT[z] * spec.G(z, muT);
  return total;
}

// Terminal functional for truncated problems; only its value at the flow's
// time-T0 measure is ever used.
using TerminalFn = std::function<double(int x, const SimplexMeasure&)>;

inline double cost_J_truncated(const GameSpec& spec, const FlowRecord& flow, int T0,
                               const TerminalFn& psi, int s0, int x,
                               const PureStateControl& tilde_alpha) {
  if (s0 > T0 || T0 > spec.T())
    throw ValidationError("truncated cost needs s0 <= T0 <= T");
  const int d = spec.d();
  std::vector<SimplexMeasure> law;
  law.push_back(SimplexMeasure::dirac(d, x));
  double total = 0.0;
  for (int s = s0; s < T0; ++s) {
    const SimplexMeasure& nu = law.back();
    const SimplexMeasure& mus = flow.at(s);
    std::vector<double> next(static_cast<std::size_t>(d), 0.0);
    for (int z = 0; z < d; ++z) {
      if (nu[z] == 0.0) continue;
      total += nu[z] * spec.F(s, z, mus, tilde_alpha.at(s, z));
      for (int y = 0; y < d; ++y)
        next[static_cast<std::size_t>(y)] += nu[z] * spec.q(s, z, mus, tilde_alpha.at(s, z), y);
    }
    law.emplace_back(std::move(next));
  }
  const SimplexMeasure& nuT0 = law.back();
  const SimplexMeasure& muT0 = flow.at(T0);
  for (int z = 0; z < d; ++z)
    if (nuT0[z] != 0.0) total += nuT0[z] * psi(z, muT0);
  return total;
}

// Backward dynamic program for the deviator's value along a fixed flow.
// v[r][x] for r = s0..T, argmin over the action grid, ties to the lowest
// grid index.
struct ValueTable {
  int s0 = 0;
  std::vector<std::vector<double>> v;     // [r - s0][x]
  std::vector<std::vector<int>> argmin;   // [r - s0][x], empty row at r == T

  double at(int r, int x) const {
    return v[static_cast<std::size_t>(r - s0)][static_cast<std::size_t>(x)];
  }
  int argmin_at(int r, int x) const {
    return argmin[static_cast<std::size_t>(r - s0)][static_cast<std::size_t>(x)];
  }
  std::span<const double> row(int r) const { return v[static_cast<std::size_t>(r - s0)]; }

  // The minimizing grid control on [s0, T).
  PureStateControl greedy_control(const ActionSet& actions, int T, int d) const {
    PureStateControl c = PureStateControl::constant(
        T, d, Action(actions.at(0).begin(), actions.at(0).end()));
    for (int r = s0; r < T; ++r)
      for (int x = 0; x < d; ++x) {
        ActionView a = actions.at(argmin_at(r, x));
        c.slot(r, x) = Action(a.begin(), a.end());
      }
    return c;
  }
};

inline ValueTable value_v_truncated(const GameSpec& spec, const FlowRecord& flow, int T0,
                                    const TerminalFn& psi, int s0) {
  if (s0 > T0 || T0 > spec.T())
    throw ValidationError("truncated value needs s0 <= T0 <= T");
  const int d = spec.d();
  ValueTable table;
  table.s0 = s0;
  table.v.assign(static_cast<std::size_t>(T0 - s0 + 1),
                 std::vector<double>(static_cast<std::size_t>(d), 0.0));
  table.argmin.assign(static_cast<std::size_t>(T0 - s0 + 1),
                      std::vector<int>(static_cast<std::size_t>(d), -1));
  const SimplexMeasure& muT0 = flow.at(T0);
  for (int x = 0; x < d; ++x)
    table.v[static_cast<std::size_t>(T0 - s0)][static_cast<std::size_t>(x)] = psi(x, muT0);
  for (int r = T0 - 1; r >= s0; --r) {
    const SimplexMeasure& mur = flow.at(r);
    const auto& next = table.v[static_cast<std::size_t>(r + 1 - s0)];
    for (int x = 0; x < d; ++x) {
      double best = 0.0;
      int best_i = -1;
      for (int ai = 0; ai < spec.actions.size(); ++ai) {
        ActionView a = spec.actions.at(ai);
        double val = spec.F(r, x, mur, a);
        for (int y = 0; y < d; ++y)
          val += spec.q(r, x, mur, a, y) * next[static_cast<std::size_t>(y)];
        if (best_i < 0 || val < best) {
          best = val;
          best_i = ai;
        }
      }
      table.v[static_cast<std::size_t>(r - s0)][static_cast<std::size_t>(x)] = best;
      table.argmin[static_cast<std::size_t>(r - s0)][static_cast<std::size_t>(x)] = best_i;
    }
  }
  return table;
}

inline ValueTable value_v(const GameSpec& spec, const FlowRecord& flow, int s0) {
  return value_v_truncated(
      spec, flow, spec.T(), [&spec](int x, const SimplexMeasure& mu) { return spec.G(x, mu); },
      s0);
}

// Tower identity residual: splitting the cost at T0 against the continuation
// functional psi(y, nu) = J(T0, nu, alpha; y, tilde_alpha) is an exact
// algebraic identity of the recursion; the residual is pure floating point
// noise. Maximized over the deviator's start state.
inline double tower_check(const GameSpec& spec, int t, const SimplexMeasure& mu,
                          const PureStateControl& alpha, const PureStateControl& tilde_alpha,
                          int T0) {
  if (T0 < t || T0 > spec.T()) throw ValidationError("tower split outside [t, T]");
  FlowRecord flow = measure_flow(spec, t, mu, alpha);
  TerminalFn psi = [&](int y, const SimplexMeasure&) {
    return cost_J(spec, flow, T0, y, tilde_alpha);
  };
  double worst = 0.0;
  for (int x = 0; x < spec.d(); ++x) {
    double direct = cost_J(spec, flow, t, x, tilde_alpha);
    double split = cost_J_truncated(spec, flow, T0, psi, t, x, tilde_alpha);
    worst = std::max(worst, std::abs(direct - split));
  }
  return worst;
}

// Enumeration of grid controls on [t, t_end) x S, one action-grid digit per
// slot; t_end < 0 means the full horizon.
class StateControlEnum {
 public:
  StateControlEnum(const GameSpec& spec, int t, int t_end = -1,
                   std::size_t size_guard = 2'000'000)
      : spec_(&spec), t_(t), t_end_(t_end < 0 ? spec.T() : t_end) {
    slots_ = static_cast<std::size_t>(t_end_ - t) * static_cast<std::size_t>(spec.d());
    count_ = 1;
    const std::size_t n = static_cast<std::size_t>(spec.actions.size());
    for (std::size_t k = 0; k < slots_; ++k) {
      if (count_ > size_guard / n + 1) {
        count_ = size_guard + 1;
        break;
      }
      count_ *= n;
    }
    if (count_ > size_guard)
      throw SizeGuardExceeded("control enumeration needs about " + std::to_string(slots_) +
                              " grid digits (" + std::to_string(n) + "^" +
                              std::to_string(slots_) + " controls)");
  }

  std::size_t count() const { return count_; }

  PureStateControl control(std::size_t id) const {
    const int T = spec_->T(), d = spec_->d();
    PureStateControl c = PureStateControl::constant(
        T, d, Action(spec_->actions.at(0).begin(), spec_->actions.at(0).end()));
    const std::size_t n = static_cast<std::size_t>(spec_->actions.size());
    for (int s = t_; s < t_end_; ++s)
      for (int x = 0; x < d; ++x) {
        int ai = static_cast<int>(id % n);
        id /= n;
        ActionView a = spec_->actions.at(ai);
        c.slot(s, x) = Action(a.begin(), a.end());
      }
    return c;
  }

 private:
  const GameSpec* spec_;
  int t_;
  int t_end_;
  std::size_t slots_ = 0;
  std::size_t count_ = 0;
};

}  // namespace mfg
