#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/path_dynamics.hpp"
#include "mfg/relaxed.hpp"

namespace mfg {

// Action values on the nodes reachable from root path x in X_t, in a fixed
// (s ascending, path id ascending) order; two controls with equal keys act
// identically on every trajectory out of x.
inline std::vector<double> descendant_action_key(const PurePathControl& alpha, int d, int t,
                                                 std::size_t x) {
  std::vector<double> key;
  for (int s = t; s < alpha.T; ++s) {
    PathSpace sp{d, s};
    for (std::size_t p = 0; p < sp.size(); ++p)
      if (sp.restrict_to(p, t) == x) {
        ActionView a = alpha.at(s, p);
        key.insert(key.end(), a.begin(), a.end());
      }
  }
  return key;
}

// Finite-support measure on X_t x path controls: a weighted list of
// (initial path, whole path-control) atoms with total mass one. The per-path
// mass Lambda(x, .) is the induced initial law. Atom controls carry action
// values; they are grid-valued whenever they come from lifts of grid objects.
struct GlobalMeasure {
  int t = 0;
  int d = 0;
  int T = 0;

  struct Atom {
    std::size_t x = 0;      // path id in X_t
    PurePathControl alpha;  // read on descendants of x
    double weight = 0.0;
  };
  std::vector<Atom> atoms;

  double total_mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.weight;
    return m;
  }
  double mass_at(std::size_t x) const {
    double m = 0.0;
    for (const auto& a : atoms)
      if (a.x == x) m += a.weight;
    return m;
  }

  PathMeasure initial_measure() const {
    PathSpace sp{d, t};
    std::vector<double> w(sp.size(), 0.0);
    for (const auto& a : atoms) w.at(a.x) += a.weight;
    return PathMeasure(sp, std::move(w));
  }

  void check() const {
    if (std::abs(total_mass() - 1.0) > kMassTol)
      throw ValidationError("global measure mass != 1");
    for (const auto& a : atoms)
      if (a.weight < -kMassTol) throw ValidationError("negative atom weight");
  }

  // Merge atoms acting identically out of their initial path; deterministic
  // (x ascending, then key lexicographic) ordering.
  GlobalMeasure canonical() const {
    std::map<std::pair<std::size_t, std::vector<double>>, double> merged;
    for (const auto& a : atoms)
      merged[{a.x, descendant_action_key(a.alpha, d, t, a.x)}] += a.weight;
    GlobalMeasure out;
    out.t = t;
    out.d = d;
    out.T = T;
    for (const auto& a : atoms) {
      auto key = std::make_pair(a.x, descendant_action_key(a.alpha, d, t, a.x));
      auto it = merged.find(key);
      if (it == merged.end()) continue;
      Atom na = a;
      na.weight = it->second;
      out.atoms.push_back(std::move(na));
      merged.erase(it);
    }
    std::sort(out.atoms.begin(), out.atoms.end(), [this](const Atom& l, const Atom& r) {
      if (l.x != r.x) return l.x < r.x;
      return descendant_action_key(l.alpha, d, t, l.x) <
             descendant_action_key(r.alpha, d, t, r.x);
    });
    return out;
  }
};

// Total-variation style distance between two global measures after
// canonical merging; 0 iff they have identical atoms and weights.
inline double global_measure_distance(const GlobalMeasure& A, const GlobalMeasure& B) {
  auto key_weights = [](const GlobalMeasure& G) {
    std::map<std::pair<std::size_t, std::vector<double>>, double> kw;
    for (const auto& a : G.atoms)
      kw[{a.x, descendant_action_key(a.alpha, G.d, G.t, a.x)}] += a.weight;
    return kw;
  };
  auto ka = key_weights(A), kb = key_weights(B);
  double dist = 0.0;
  for (const auto& [k, w] : ka) {
    auto it = kb.find(k);
    dist += std::abs(w - (it == kb.end() ? 0.0 : it->second));
    if (it != kb.end()) kb.erase(it);
  }
  for (const auto& [k, w] : kb) dist += std::abs(w);
  return dist;
}

namespace detail {

struct LambdaFlowDetail {
  PathFlowRecord flow;
  // per atom, per time offset, the product kernel mass Q^t_s on X_s
  std::vector<std::vector<std::vector<double>>> Q;
};

inline LambdaFlowDetail lambda_flow_detail(const GameSpec& spec, const GlobalMeasure& L) {
  L.check();
  const int d = spec.d();
  const int t = L.t;
  LambdaFlowDetail out;
  out.flow.t = t;
  out.flow.measures.push_back(L.initial_measure());
  out.Q.resize(L.atoms.size());
  for (std::size_t ai = 0; ai < L.atoms.size(); ++ai) {
    std::vector<double> q0(PathSpace{d, t}.size(), 0.0);
    q0.at(L.atoms[ai].x) = 1.0;
    out.Q[ai].push_back(std::move(q0));
  }
  for (int s = t; s < spec.T(); ++s) {
    const PathMeasure& cur = out.flow.measures.back();
    PathSpace sp{d, s};
    PathSpace nx{d, s + 1};
    PathStepCoeffs co(spec, s, cur);
    std::vector<double> mass(nx.size(), 0.0);
    for (std::size_t ai = 0; ai < L.atoms.size(); ++ai) {
      const auto& atom = L.atoms[ai];
      const auto& Qs = out.Q[ai].back();
      std::vector<double> Qn(nx.size(), 0.0);
      for (std::size_t p = 0; p < sp.size(); ++p) {
        if (Qs[p] == 0.0) continue;
        auto xs = sp.states(p);
        ActionView a = atom.alpha.at(s, p);
        for (int y = 0; y < d; ++y) Qn[sp.extend(p, y)] += Qs[p] * co.q(xs, a, y);
      }
      for (std::size_t p = 0; p < nx.size(); ++p) mass[p] += atom.weight * Qn[p];
      out.Q[ai].push_back(std::move(Qn));
    }
    out.flow.measures.emplace_back(nx, std::move(mass));
  }
  return out;
}

}  // namespace detail

inline PathFlowRecord lambda_measure_flow(const GameSpec& spec, const GlobalMeasure& L) {
  return detail::lambda_flow_detail(spec, L).flow;
}

// Relaxed control induced by a global measure: the kernel-weighted mixture of
// the atoms' actions along each reached path.
inline RelaxedControl gamma_from_lambda(const GameSpec& spec, const GlobalMeasure& L) {
  auto det = detail::lambda_flow_detail(spec, L);
  const int d = spec.d();
  const int A = spec.actions.size();
  RelaxedControl out = RelaxedControl::dirac_at(spec.T(), d, A, 0);
  for (int s = L.t; s < spec.T(); ++s) {
    PathSpace sp{d, s};
    const PathMeasure& pm = det.flow.at(s);
    for (std::size_t p = 0; p < sp.size(); ++p) {
      std::vector<double> row(static_cast<std::size_t>(A), 0.0);
      std::size_t root = sp.restrict_to(p, L.t);
      double mass = 0.0;
      for (std::size_t ai = 0; ai < L.atoms.size(); ++ai) {
        const auto& atom = L.atoms[ai];
        if (atom.x != root) continue;
        double m = atom.weight * det.Q[ai][static_cast<std::size_t>(s - L.t)][p];
        auto idx = spec.actions.find(atom.alpha.at(s, p));
        if (!idx)
          throw ValidationError("gamma_from_lambda needs grid-valued atom controls");
        row[static_cast<std::size_t>(*idx)] += m;
        mass += m;
      }
      if (mass <= 0.0) {
        if (pm[p] > 0.0)
          throw NotFullSupport("reached path carries no control mass");
        continue;  // unreachable path, keep the default Dirac row
      }
      for (double& w : row) w /= mass;
      out.slot(s, p) = std::move(row);
    }
  }
  return out;
}

// Product measure of a relaxed control's rows over the initial path's
// descendant nodes. Support explodes multiplicatively; guarded.
inline GlobalMeasure lambda_from_gamma(const GameSpec& spec, int t, const PathMeasure& mu,
                                       const RelaxedControl& gamma,
                                       std::size_t support_guard = 100'000) {
  if (!mu.full_support()) throw NotFullSupport("lambda lift requires full support");
  const int d = spec.d();
  const int A = spec.actions.size();
  GlobalMeasure out;
  out.t = t;
  out.d = d;
  out.T = spec.T();
  PathSpace sp_t{d, t};

  // estimate total support first
  double est_total = 0.0;
  for (std::size_t x = 0; x < sp_t.size(); ++x) {
    double prod = 1.0;
    for (int s = t; s < spec.T(); ++s) {
      PathSpace sp{d, s};
      for (std::size_t p = 0; p < sp.size(); ++p) {
        if (sp.restrict_to(p, t) != x) continue;
        int nz = 0;
        auto row = gamma.row(s, p);
        for (int ai = 0; ai < A; ++ai)
          if (row[static_cast<std::size_t>(ai)] > 0.0) ++nz;
        prod *= nz;
        if (prod > static_cast<double>(support_guard)) break;
      }
      if (prod > static_cast<double>(support_guard)) break;
    }
    est_total += prod;
    if (est_total > static_cast<double>(support_guard))
      throw SizeGuardExceeded("lambda lift support would exceed " +
                              std::to_string(support_guard) + " atoms");
  }

  for (std::size_t x = 0; x < sp_t.size(); ++x) {
    // nodes reachable from x, with their nonzero action choices
    std::vector<std::pair<int, std::size_t>> nodes;  // (s, path)
    for (int s = t; s < spec.T(); ++s) {
      PathSpace sp{d, s};
      for (std::size_t p = 0; p < sp.size(); ++p)
        if (sp.restrict_to(p, t) == x) nodes.emplace_back(s, p);
    }
    std::vector<std::vector<int>> choices(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      auto row = gamma.row(nodes[k].first, nodes[k].second);
      for (int ai = 0; ai < A; ++ai)
        if (row[static_cast<std::size_t>(ai)] > 0.0) choices[k].push_back(ai);
    }
    std::vector<std::size_t> pick(nodes.size(), 0);
    while (true) {
      GlobalMeasure::Atom atom;
      atom.x = x;
      atom.alpha = PurePathControl::constant(
          spec.T(), d, Action(spec.actions.at(0).begin(), spec.actions.at(0).end()));
      double w = mu[x];
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        int ai = choices[k][pick[k]];
        ActionView av = spec.actions.at(ai);
        atom.alpha.slot(nodes[k].first, nodes[k].second) = Action(av.begin(), av.end());
        w *= gamma.row(nodes[k].first, nodes[k].second)[static_cast<std::size_t>(ai)];
      }
      atom.weight = w;
      if (w > 0.0) out.atoms.push_back(std::move(atom));
      // odometer over the choice lists
      std::size_t k = 0;
      while (k < nodes.size()) {
        if (++pick[k] < choices[k].size()) break;
        pick[k] = 0;
        ++k;
      }
      if (k == nodes.size()) break;
    }
  }
  return out;
}

// Averaged optimality gap per initial path (the integral runs over the atom
// weights, whose per-path total is mu(x), not 1).
struct GlobalMfeGap {
  std::vector<double> gap;         // per path in X_t
  std::vector<double> value;       // v(t, Lambda; .)
  std::vector<double> atom_costs;  // J(t, Lambda; x_i, alpha_i) per atom

  double max_gap() const { return *std::max_element(gap.begin(), gap.end()); }
  bool is_eps_mfe(double eps) const { return max_gap() <= eps; }
};

inline GlobalMfeGap global_mfe_gap(const GameSpec& spec, const GlobalMeasure& L) {
  auto det = detail::lambda_flow_detail(spec, L);
  PathValueTable vt = path_value_v(spec, det.flow, L.t);
  PathSpace sp{spec.d(), L.t};
  GlobalMfeGap out;
  out.gap.assign(sp.size(), 0.0);
  out.value.resize(sp.size());
  for (std::size_t p = 0; p < sp.size(); ++p) out.value[p] = vt.at(L.t, p);
  for (const auto& atom : L.atoms) {
    double J = path_cost_J(spec, det.flow, L.t, atom.x, atom.alpha);
    out.atom_costs.push_back(J);
    out.gap[atom.x] += atom.weight * (J - out.value[atom.x]);
  }
  return out;
}

struct GlobalSetValueResult {
  SetValueApprox values;  // generators v(t, Lambda*; .) over X_t
};

// Global set value sampled over the lifts of a relaxed-control lattice. The
// relaxed and global formulations share one set value, so these lifts form a
// complete generator family up to a 1/c_mu tolerance inflation.
inline GlobalSetValueResult global_set_value(const GameSpec& spec, int t,
                                             const PathMeasure& mu, double eps,
                                             const RelaxedSetValueOptions& opt = {},
                                             std::size_t support_guard = 100'000) {
  GlobalSetValueResult out;
  out.values.epsilon = eps;
  out.values.t = t;
  out.values.family = "global-lattice-m" + std::to_string(opt.resolution);
  RelaxedControlEnum en(spec, t, opt.resolution, -1, opt.size_guard);
  const double threshold = std::max(eps, opt.tol_exact);
  for (std::size_t id = 0; id < en.count(); ++id) {
    GlobalMeasure L = lambda_from_gamma(spec, t, mu, en.control(id), support_guard);
    GlobalMfeGap g = global_mfe_gap(spec, L);
    if (g.max_gap() <= threshold)
      out.values.add_dedup({g.value, "Lambda(gamma#" + std::to_string(id) + ")", g.max_gap()});
  }
  return out;
}

// Probe for the one-sided inverse: gamma^(Lambda^gamma) = gamma always holds,
// while Lambda^(gamma^Lambda) = Lambda may fail; returns the distance.
inline double lambda_roundtrip_distance(const GameSpec& spec, const GlobalMeasure& L,
                                        std::size_t support_guard = 100'000) {
  RelaxedControl g = gamma_from_lambda(spec, L);
  GlobalMeasure back = lambda_from_gamma(spec, L.t, L.initial_measure(), g, support_guard);
  return global_measure_distance(L.canonical(), back.canonical());
}

}  // namespace mfg
