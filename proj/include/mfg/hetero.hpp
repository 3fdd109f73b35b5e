#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/global.hpp"
#include "mfg/path_dynamics.hpp"
#include "mfg/relaxed.hpp"
#include "mfg/rng.hpp"

namespace mfg {

// Path control that may read the population's path law through a Lipschitz
// statistic; frozen pure controls carry L = 0.
class MuPathControl {
 public:
  enum class Kind { frozen, affine_clipped };

  static MuPathControl frozen(PurePathControl c) {
    MuPathControl m;
    m.kind_ = Kind::frozen;
    m.frozen_ = std::move(c);
    return m;
  }

  // alpha(s, p, mu) = clip(beta0[s][p] + beta1[s][p] * <w, state marginal>)
  static MuPathControl affine(std::vector<std::vector<Action>> beta0,
                              std::vector<std::vector<Action>> beta1, std::vector<double> w,
                              ActionSet box) {
    if (box.kind != ActionSet::Kind::box)
      throw ValidationError("affine-clipped path control needs a box action set");
    MuPathControl m;
    m.kind_ = Kind::affine_clipped;
    m.beta0_ = std::move(beta0);
    m.beta1_ = std::move(beta1);
    m.w_ = std::move(w);
    m.box_ = std::move(box);
    return m;
  }

  Kind kind() const { return kind_; }
  bool is_pure() const { return kind_ == Kind::frozen; }
  const PurePathControl& pure() const { return frozen_; }

  Action at(int s, std::size_t p, const PathMeasure& pm) const {
    if (kind_ == Kind::frozen) {
      ActionView a = frozen_.at(s, p);
      return Action(a.begin(), a.end());
    }
    SimplexMeasure marg = pm.terminal_marginal();
    double m = 0.0;
    for (int i = 0; i < marg.dim(); ++i) m += w_[static_cast<std::size_t>(i)] * marg[i];
    const Action& b0 = beta0_[static_cast<std::size_t>(s)][p];
    const Action& b1 = beta1_[static_cast<std::size_t>(s)][p];
    Action a(b0.size());
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = b0[k] + b1[k] * m;
    return box_.clip(a);
  }

  double lipschitz_constant() const {
    if (kind_ == Kind::frozen) return 0.0;
    double wmax = 0.0;
    for (double x : w_) wmax = std::max(wmax, std::abs(x));
    double bmax = 0.0;
    for (const auto& level : beta1_)
      for (const auto& b : level) {
        double n2 = 0.0;
        for (double c : b) n2 += c * c;
        bmax = std::max(bmax, std::sqrt(n2));
      }
    return bmax * wmax;
  }

 private:
  Kind kind_ = Kind::frozen;
  PurePathControl frozen_;
  std::vector<std::vector<Action>> beta0_, beta1_;
  std::vector<double> w_;
  ActionSet box_;
};

// N players with possibly distinct path controls.
struct HeteroProfile {
  int t = 0;
  std::vector<std::size_t> start;      // paths in X_t
  std::vector<MuPathControl> controls;

  int N() const { return static_cast<int>(start.size()); }
  void check(int d) const {
    if (start.empty()) throw ValidationError("profile needs N >= 1");
    if (controls.size() != start.size())
      throw DimensionMismatch("one control per player required");
    PathSpace sp{d, t};
    std::vector<int> count(sp.size(), 0);
    for (std::size_t x : start) count.at(x)++;
    for (int c : count)
      if (c == 0) throw NotFullSupport("profile start must cover every path in X_t");
  }

  PathMeasure empirical(int d) const {
    return empirical_path_measure(start, PathSpace{d, t});
  }
};

// Lambda^N: the empirical measure of (start path, control) pairs; requires
// pure (measure-free) controls. Atom weights are exact multiples of 1/N.
inline GlobalMeasure lambda_N_from_profile(const GameSpec& spec, const HeteroProfile& prof) {
  prof.check(spec.d());
  GlobalMeasure L;
  L.t = prof.t;
  L.d = spec.d();
  L.T = spec.T();
  const int N = prof.N();
  // group players by (start, descendant action key)
  std::vector<int> counted(static_cast<std::size_t>(N), 0);
  for (int i = 0; i < N; ++i) {
    if (counted[static_cast<std::size_t>(i)]) continue;
    if (!prof.controls[static_cast<std::size_t>(i)].is_pure())
      throw ValidationError("lambda_N_from_profile needs pure controls; use bar_lambda_lift");
    auto key_i = descendant_action_key(prof.controls[static_cast<std::size_t>(i)].pure(),
                                       spec.d(), prof.t, prof.start[static_cast<std::size_t>(i)]);
    int count = 0;
    for (int j = i; j < N; ++j) {
      if (counted[static_cast<std::size_t>(j)]) continue;
      if (prof.start[static_cast<std::size_t>(j)] != prof.start[static_cast<std::size_t>(i)])
        continue;
      if (!prof.controls[static_cast<std::size_t>(j)].is_pure())
        throw ValidationError("lambda_N_from_profile needs pure controls");
      if (descendant_action_key(prof.controls[static_cast<std::size_t>(j)].pure(), spec.d(),
                                prof.t, prof.start[static_cast<std::size_t>(j)]) == key_i) {
        counted[static_cast<std::size_t>(j)] = 1;
        ++count;
      }
    }
    GlobalMeasure::Atom atom;
    atom.x = prof.start[static_cast<std::size_t>(i)];
    atom.alpha = prof.controls[static_cast<std::size_t>(i)].pure();
    atom.weight = static_cast<double>(count) / static_cast<double>(N);
    L.atoms.push_back(std::move(atom));
  }
  return L;
}

// The lift of a (possibly measure dependent) profile: the deterministic flow
// nu^N freezing every control along itself, and the global measure with the
// frozen controls reweighted to the target law.
struct BarLambdaLift {
  PathFlowRecord nuN;
  GlobalMeasure bar_lambda;
};

inline BarLambdaLift bar_lambda_lift(const GameSpec& spec, const HeteroProfile& prof,
                                     const PathMeasure& mu_target) {
  prof.check(spec.d());
  if (!mu_target.full_support()) throw NotFullSupport("lift target must have full support");
  const int d = spec.d();
  const int t = prof.t;
  const int N = prof.N();

  BarLambdaLift out;
  out.nuN.t = t;
  out.nuN.measures.push_back(prof.empirical(d));
  // per player kernel-product masses on descendants of its start
  std::vector<std::vector<double>> Q(static_cast<std::size_t>(N));
  std::vector<PurePathControl> frozen(
      static_cast<std::size_t>(N),
      PurePathControl::constant(spec.T(), d,
                                Action(spec.actions.at(0).begin(), spec.actions.at(0).end())));
  for (int i = 0; i < N; ++i) {
    Q[static_cast<std::size_t>(i)].assign(PathSpace{d, t}.size(), 0.0);
    Q[static_cast<std::size_t>(i)].at(prof.start[static_cast<std::size_t>(i)]) = 1.0;
  }
  for (int s = t; s < spec.T(); ++s) {
    const PathMeasure& cur = out.nuN.measures.back();
    PathSpace sp{d, s};
    PathSpace nx{d, s + 1};
    PathStepCoeffs co(spec, s, cur);
    std::vector<double> mass(nx.size(), 0.0);
    for (int i = 0; i < N; ++i) {
      std::vector<double> Qn(nx.size(), 0.0);
      for (std::size_t p = 0; p < sp.size(); ++p) {
        double q = Q[static_cast<std::size_t>(i)][p];
        if (q == 0.0) continue;
        auto xs = sp.states(p);
        Action a = prof.controls[static_cast<std::size_t>(i)].at(s, p, cur);
        frozen[static_cast<std::size_t>(i)].slot(s, p) = a;
        for (int y = 0; y < d; ++y) Qn[sp.extend(p, y)] += q * co.q(xs, a, y);
      }
      for (std::size_t p = 0; p < nx.size(); ++p)
        mass[p] += Qn[p] / static_cast<double>(N);
      Q[static_cast<std::size_t>(i)] = std::move(Qn);
    }
    out.nuN.measures.emplace_back(nx, std::move(mass));
  }
  // freeze also the nodes a player never reaches, evaluated along nu^N
  for (int i = 0; i < N; ++i)
    for (int s = t; s < spec.T(); ++s) {
      PathSpace sp{d, s};
      for (std::size_t p = 0; p < sp.size(); ++p)
        frozen[static_cast<std::size_t>(i)].slot(s, p) =
            prof.controls[static_cast<std::size_t>(i)].at(s, p, out.nuN.at(s));
    }

  out.bar_lambda.t = t;
  out.bar_lambda.d = d;
  out.bar_lambda.T = spec.T();
  PathSpace sp_t{d, t};
  std::vector<int> I(sp_t.size(), 0);
  for (std::size_t x : prof.start) I.at(x)++;
  for (int i = 0; i < N; ++i) {
    GlobalMeasure::Atom atom;
    atom.x = prof.start[static_cast<std::size_t>(i)];
    atom.alpha = frozen[static_cast<std::size_t>(i)];
    atom.weight = mu_target[atom.x] / static_cast<double>(I.at(atom.x));
    out.bar_lambda.atoms.push_back(std::move(atom));
  }
  return out;
}

// ---- Exact and Monte Carlo path N-player games -------------------------------

namespace detail {

// exact joint law over configurations of N paths; saturates instead of
// wrapping so the exact/Monte-Carlo gate stays sound for large N
inline std::size_t path_pow(std::size_t base, int exp) {
  const std::size_t cap = std::size_t(1) << 62;
  std::size_t r = 1;
  for (int k = 0; k < exp; ++k) {
    if (r > cap / base) return cap;
    r *= base;
  }
  return r;
}

struct PathGameExact {
  const GameSpec* spec;
  int t;
  std::vector<std::size_t> start;

  // per-time joint distribution, configs encoded base-|X_s| per player
  std::vector<std::vector<double>> law;
  std::vector<std::vector<double>> Ji;  // running cost accumulators per player

  void run(const std::vector<const MuPathControl*>& ctls, std::size_t cap) {
    const int d = spec->d();
    const int N = static_cast<int>(start.size());
    std::vector<double> dist;
    {
      PathSpace sp{d, t};
      std::size_t M = path_pow(sp.size(), N);
      if (M > cap)
        throw SizeGuardExceeded("exact path game needs " + std::to_string(M) +
                                " configurations");
      dist.assign(M, 0.0);
      std::size_t code = 0;
      for (int j = N - 1; j >= 0; --j)
        code = code * sp.size() + start[static_cast<std::size_t>(j)];
      dist[code] = 1.0;
    }
    Ji.assign(1, std::vector<double>(static_cast<std::size_t>(N), 0.0));
    law.push_back(dist);
    for (int s = t; s < spec->T(); ++s) {
      PathSpace sp{d, s};
      PathSpace nx{d, s + 1};
      std::size_t M = path_pow(sp.size(), N);
      std::size_t Mn = path_pow(nx.size(), N);
      if (Mn > cap)
        throw SizeGuardExceeded("exact path game needs " + std::to_string(Mn) +
                                " configurations");
      std::vector<double> next(Mn, 0.0);
      std::vector<double> Jrow(static_cast<std::size_t>(N), 0.0);
      for (std::size_t code = 0; code < M; ++code) {
        if (dist[code] == 0.0) continue;
        // decode
        std::vector<std::size_t> ps(static_cast<std::size_t>(N));
        std::size_t rem = code;
        for (int j = 0; j < N; ++j) {
          ps[static_cast<std::size_t>(j)] = rem % sp.size();
          rem /= sp.size();
        }
        PathMeasure muN = empirical_path_measure(ps, sp);
        PathStepCoeffs co(*spec, s, muN);
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(N));
        for (int j = 0; j < N; ++j) {
          auto xs = sp.states(ps[static_cast<std::size_t>(j)]);
          Action a = ctls[static_cast<std::size_t>(j)]->at(s, ps[static_cast<std::size_t>(j)], muN);
          Jrow[static_cast<std::size_t>(j)] += dist[code] * co.F(xs, a);
          auto& row = rows[static_cast<std::size_t>(j)];
          row.resize(static_cast<std::size_t>(d));
          for (int y = 0; y < d; ++y) row[static_cast<std::size_t>(y)] = co.q(xs, a, y);
        }
        std::vector<int> ys(static_cast<std::size_t>(N), 0);
        while (true) {
          double p = dist[code];
          for (int j = 0; j < N; ++j)
            p *= rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(ys[static_cast<std::size_t>(j)])];
          if (p != 0.0) {
            std::size_t ncode = 0;
            for (int j = N - 1; j >= 0; --j)
              ncode = ncode * nx.size() +
                      sp.extend(ps[static_cast<std::size_t>(j)], ys[static_cast<std::size_t>(j)]);
            next[ncode] += p;
          }
          int j = 0;
          while (j < N && ++ys[static_cast<std::size_t>(j)] == d) {
            ys[static_cast<std::size_t>(j)] = 0;
            ++j;
          }
          if (j == N) break;
        }
      }
      Ji.push_back(Jrow);
      dist = std::move(next);
      law.push_back(dist);
    }
  }

  std::vector<double> total_costs() const {
    const int d = spec->d();
    const int N = static_cast<int>(start.size());
    PathSpace spT{d, spec->T()};
    std::vector<double> J(static_cast<std::size_t>(N), 0.0);
    for (const auto& row : Ji)
      for (int j = 0; j < N; ++j) J[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];
    const auto& dist = law.back();
    for (std::size_t code = 0; code < dist.size(); ++code) {
      if (dist[code] == 0.0) continue;
      std::vector<std::size_t> ps(static_cast<std::size_t>(N));
      std::size_t rem = code;
      for (int j = 0; j < N; ++j) {
        ps[static_cast<std::size_t>(j)] = rem % spT.size();
        rem /= spT.size();
      }
      PathMeasure muN = empirical_path_measure(ps, spT);
      PathTerminalCoeffs ter(*spec, muN);
      for (int j = 0; j < N; ++j) {
        auto xs = spT.states(ps[static_cast<std::size_t>(j)]);
        J[static_cast<std::size_t>(j)] += dist[code] * ter.G(xs);
      }
    }
    return J;
  }
};

// one Monte Carlo replication of the path game
inline void simulate_path_replication(const GameSpec& spec, int t,
                                      std::span<const std::size_t> start,
                                      const std::vector<const MuPathControl*>& ctls,
                                      const CounterRng& rng, std::uint64_t rep,
                                      std::vector<std::vector<std::size_t>>& paths) {
  const int d = spec.d();
  const int N = static_cast<int>(start.size());
  const int steps = spec.T() - t;
  paths.assign(static_cast<std::size_t>(steps) + 1,
               std::vector<std::size_t>(start.begin(), start.end()));
  for (int k = 0; k < steps; ++k) {
    const int s = t + k;
    PathSpace sp{d, s};
    const auto& cur = paths[static_cast<std::size_t>(k)];
    auto& nxt = paths[static_cast<std::size_t>(k) + 1];
    PathMeasure muN = empirical_path_measure(cur, sp);
    PathStepCoeffs co(spec, s, muN);
    for (int j = 0; j < N; ++j) {
      auto xs = sp.states(cur[static_cast<std::size_t>(j)]);
      Action a = ctls[static_cast<std::size_t>(j)]->at(s, cur[static_cast<std::size_t>(j)], muN);
      double u = rng.uniform(static_cast<std::uint64_t>(N), rep, static_cast<std::uint64_t>(j),
                             static_cast<std::uint64_t>(s));
      double acc = 0.0;
      int y = d - 1;
      for (int yy = 0; yy < d; ++yy) {
        acc += co.q(xs, a, yy);
        if (u < acc) {
          y = yy;
          break;
        }
      }
      nxt[static_cast<std::size_t>(j)] = sp.extend(cur[static_cast<std::size_t>(j)], y);
    }
  }
}

}  // namespace detail

struct PathGameOptions {
  std::size_t exact_cap = 1 << 16;
  int samples = 4'000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct HeteroCosts {
  std::vector<double> J;   // per player
  std::vector<double> ci;  // zero in exact mode
  bool exact = false;
};

// Costs of every player; exact when the configuration space fits, Monte Carlo
// otherwise.
inline HeteroCosts hetero_costs(const GameSpec& spec, const HeteroProfile& prof,
                                const PathGameOptions& opt = {}) {
  const int d = spec.d();
  const int N = prof.N();
  std::vector<const MuPathControl*> ctls;
  for (const auto& c : prof.controls) ctls.push_back(&c);
  std::size_t Mfinal = detail::path_pow(PathSpace{d, spec.T()}.size(), N);
  if (Mfinal <= opt.exact_cap) {
    detail::PathGameExact game{&spec, prof.t, prof.start, {}, {}};
    game.run(ctls, opt.exact_cap);
    return {game.total_costs(), std::vector<double>(static_cast<std::size_t>(N), 0.0), true};
  }
  CounterRng rng(opt.seed);
  std::vector<std::vector<double>> costs(static_cast<std::size_t>(opt.samples));
  parallel_for(
      static_cast<std::size_t>(opt.samples),
      [&](std::size_t rep) {
        std::vector<std::vector<std::size_t>> paths;
        detail::simulate_path_replication(spec, prof.t, prof.start, ctls, rng, rep, paths);
        std::vector<double> J(static_cast<std::size_t>(N), 0.0);
        for (int s = prof.t; s < spec.T(); ++s) {
          PathSpace sp{d, s};
          const auto& cur = paths[static_cast<std::size_t>(s - prof.t)];
          PathMeasure muN = empirical_path_measure(cur, sp);
          PathStepCoeffs co(spec, s, muN);
          for (int j = 0; j < N; ++j) {
            auto xs = sp.states(cur[static_cast<std::size_t>(j)]);
            Action a = ctls[static_cast<std::size_t>(j)]->at(s, cur[static_cast<std::size_t>(j)], muN);
            J[static_cast<std::size_t>(j)] += co.F(xs, a);
          }
        }
        PathSpace spT{d, spec.T()};
        PathMeasure muT = empirical_path_measure(paths.back(), spT);
        PathTerminalCoeffs ter(spec, muT);
        for (int j = 0; j < N; ++j)
          J[static_cast<std::size_t>(j)] += ter.G(spT.states(paths.back()[static_cast<std::size_t>(j)]));
        costs[rep] = std::move(J);
      },
      opt.threads);
  std::vector<double> mean(static_cast<std::size_t>(N), 0.0);
  std::vector<double> ci(static_cast<std::size_t>(N), 0.0);
  for (const auto& J : costs)
    for (int j = 0; j < N; ++j) mean[static_cast<std::size_t>(j)] += J[static_cast<std::size_t>(j)];
  for (auto& m : mean) m /= static_cast<double>(opt.samples);
  for (int j = 0; j < N; ++j) {
    double ss = 0.0;
    for (const auto& J : costs) {
      double e = J[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)];
      ss += e * e;
    }
    if (opt.samples > 1)
      ci[static_cast<std::size_t>(j)] =
          1.96 * std::sqrt(ss / (opt.samples - 1.0) / opt.samples);
  }
  return {mean, ci, false};
}

struct HeteroEqReport {
  double averaged_gap = 0.0;     // (1/N) sum_i [J_i - v^{N,L}_i upper]
  double averaged_gap_ci = 0.0;  // Monte Carlo half width, zero in exact mode
  std::vector<double> gaps;      // per player
  double sqrt_eps_fraction = 0.0;  // fraction of players with gap >= sqrt(eps)
  bool chebyshev_ok = true;        // fraction <= sqrt(eps) whenever avg <= eps
  bool verdict = false;
};

// Averaged (eps, L)-equilibrium check with a supplied deviation family for
// the best-response upper bracket.
inline HeteroEqReport hetero_eq_check(const GameSpec& spec, const HeteroProfile& prof,
                                      double eps, std::span<const MuPathControl> family,
                                      const PathGameOptions& opt = {}) {
  if (family.empty()) throw ValidationError("hetero check needs a deviation family");
  prof.check(spec.d());
  const int N = prof.N();
  HeteroCosts base = hetero_costs(spec, prof, opt);
  HeteroEqReport rep;
  rep.gaps.assign(static_cast<std::size_t>(N), 0.0);
  double ci_sum = 0.0;
  for (int i = 0; i < N; ++i) {
    double best = std::numeric_limits<double>::infinity();
    double best_ci = 0.0;
    for (const auto& dev : family) {
      HeteroProfile devprof = prof;
      devprof.controls[static_cast<std::size_t>(i)] = dev;
      HeteroCosts Jd = hetero_costs(spec, devprof, opt);
      if (Jd.J[static_cast<std::size_t>(i)] < best) {
        best = Jd.J[static_cast<std::size_t>(i)];
        best_ci = Jd.ci[static_cast<std::size_t>(i)];
      }
    }
    rep.gaps[static_cast<std::size_t>(i)] = base.J[static_cast<std::size_t>(i)] - best;
    ci_sum += base.ci[static_cast<std::size_t>(i)] + best_ci;
  }
  rep.averaged_gap = pairwise_sum(rep.gaps) / static_cast<double>(N);
  rep.averaged_gap_ci = ci_sum / static_cast<double>(N);
  double thresh = std::sqrt(std::max(eps, 0.0));
  int count = 0;
  for (double gap : rep.gaps)
    if (gap >= thresh && thresh > 0.0) ++count;
  rep.sqrt_eps_fraction = static_cast<double>(count) / static_cast<double>(N);
  rep.verdict = rep.averaged_gap <= eps;
  if (rep.verdict && thresh > 0.0 && rep.sqrt_eps_fraction > thresh + 1e-12)
    rep.chebyshev_ok = false;
  return rep;
}

// Membership object for the heterogeneous set value: per initial path, the
// bag of best-response values of the co-located players; phi is a member when
// some passing profile matches it at every path through SOME co-located
// player (the max-min reading) .
struct HeteroSetValue {
  double epsilon = 0.0;
  int t = 0;
  // per passing profile: per path in X_t, the values v^{N,L}_i of players i
  // located there
  std::vector<std::vector<std::vector<double>>> profiles_values;

  bool is_member(std::span<const double> phi, bool max_max_variant = false) const {
    for (const auto& per_path : profiles_values) {
      bool ok = true;
      for (std::size_t x = 0; x < per_path.size() && ok; ++x) {
        if (per_path[x].empty()) {
          ok = false;
          break;
        }
        if (max_max_variant) {
          for (double v : per_path[x])
            if (std::abs(phi[x] - v) > epsilon) ok = false;
        } else {
          double best = std::numeric_limits<double>::infinity();
          for (double v : per_path[x]) best = std::min(best, std::abs(phi[x] - v));
          if (best > epsilon) ok = false;
        }
      }
      if (ok) return true;
    }
    return false;
  }
};

// Builds the membership object from a family of candidate profiles.
inline HeteroSetValue hetero_set_value(const GameSpec& spec,
                                       std::span<const HeteroProfile> candidates, double eps,
                                       std::span<const MuPathControl> family,
                                       const PathGameOptions& opt = {}) {
  HeteroSetValue out;
  out.epsilon = eps;
  for (const auto& prof : candidates) {
    out.t = prof.t;
    prof.check(spec.d());
    const int N = prof.N();
    HeteroCosts base = hetero_costs(spec, prof, opt);
    std::vector<double> vN(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& dev : family) {
        HeteroProfile devprof = prof;
        devprof.controls[static_cast<std::size_t>(i)] = dev;
        best = std::min(best, hetero_costs(spec, devprof, opt).J[static_cast<std::size_t>(i)]);
      }
      vN[static_cast<std::size_t>(i)] = best;
    }
    double avg = 0.0;
    for (int i = 0; i < N; ++i)
      avg += (base.J[static_cast<std::size_t>(i)] - vN[static_cast<std::size_t>(i)]) / N;
    if (avg > eps) continue;
    PathSpace sp{spec.d(), prof.t};
    std::vector<std::vector<double>> per_path(sp.size());
    for (int i = 0; i < N; ++i)
      per_path[prof.start[static_cast<std::size_t>(i)]].push_back(vN[static_cast<std::size_t>(i)]);
    out.profiles_values.push_back(std::move(per_path));
  }
  return out;
}

// ---- Discretization pipeline: relaxed control -> profile ---------------------

struct DiscretizeReport {
  std::vector<std::vector<int>> clusters;  // grid indices merged per representative
  std::vector<int> representatives;        // one grid index per cluster
  RelaxedControl gamma_eps;
  double eps = 0.0;
};

// Merges grid atoms within eps (sup-norm on action coordinates) onto cluster
// representatives; the identity when eps is below the grid spacing. Rows stay
// on the grid, so the partition is the grid itself and no residual cell is
// needed.
inline DiscretizeReport discretize_relaxed(const GameSpec& spec, const RelaxedControl& gamma,
                                           double eps) {
  DiscretizeReport rep;
  rep.eps = eps;
  const int A = spec.actions.size();
  std::vector<int> owner(static_cast<std::size_t>(A), -1);
  for (int i = 0; i < A; ++i) {
    if (owner[static_cast<std::size_t>(i)] >= 0) continue;
    int cluster = static_cast<int>(rep.representatives.size());
    rep.representatives.push_back(i);
    rep.clusters.emplace_back();
    ActionView ri = spec.actions.at(i);
    for (int j = i; j < A; ++j) {
      if (owner[static_cast<std::size_t>(j)] >= 0) continue;
      ActionView rj = spec.actions.at(j);
      double dist = 0.0;
      for (std::size_t k = 0; k < ri.size(); ++k)
        dist = std::max(dist, std::abs(ri[k] - rj[k]));
      if (dist <= eps) {
        owner[static_cast<std::size_t>(j)] = cluster;
        rep.clusters.back().push_back(j);
      }
    }
  }
  rep.gamma_eps = gamma;
  for (auto& level : rep.gamma_eps.rows)
    for (auto& row : level) {
      std::vector<double> merged(row.size(), 0.0);
      for (int ai = 0; ai < A; ++ai)
        merged[static_cast<std::size_t>(
            rep.representatives[static_cast<std::size_t>(owner[static_cast<std::size_t>(ai)])])] +=
            row[static_cast<std::size_t>(ai)];
      row = std::move(merged);
    }
  return rep;
}

// Continuum pathway into the discretization pipeline: quantile representatives
// of a one-dimensional action density, each carrying mass 1/n. The returned
// atoms feed an explicit action grid and atomic relaxed rows, after which the
// standard discretize/round/expand machinery applies.
inline std::vector<std::pair<double, double>> quantile_atomize(
    const std::function<double(double)>& density, double lo, double hi, int n_atoms,
    int panels = 4096) {
  if (n_atoms < 1) throw ValidationError("quantile atomization needs n >= 1");
  std::vector<double> cdf(static_cast<std::size_t>(panels) + 1, 0.0);
  const double h = (hi - lo) / panels;
  for (int k = 0; k < panels; ++k) {
    double a = lo + (k + 0.5) * h;
    double w = std::max(density(a), 0.0) * h;
    cdf[static_cast<std::size_t>(k) + 1] = cdf[static_cast<std::size_t>(k)] + w;
  }
  double total = cdf.back();
  if (total <= 0.0) throw ValidationError("density integrates to zero");
  std::vector<std::pair<double, double>> atoms;
  for (int j = 0; j < n_atoms; ++j) {
    double target = total * (j + 0.5) / n_atoms;  // midpoint quantile per cell
    int k = 0;
    while (k < panels && cdf[static_cast<std::size_t>(k) + 1] < target) ++k;
    double span = cdf[static_cast<std::size_t>(k) + 1] - cdf[static_cast<std::size_t>(k)];
    double within = span > 0.0 ? (target - cdf[static_cast<std::size_t>(k)]) / span : 0.5;
    atoms.emplace_back(lo + (k + within) * h, 1.0 / n_atoms);
  }
  return atoms;
}

// Rounds Lambda^{gamma^eps} to integer multiplicities of 1/N per initial
// path: rescale each path's atom masses to the empirical mass, then apply
// largest-remainder rounding with ties by atom index. Per-atom deviation
// stays within 1/N + |mu^N(x) - mu(x)|.
struct RoundingReport {
  GlobalMeasure lambda_eps;
  double max_deviation = 0.0;
  double bound = 0.0;  // max over x of 1/N + |mu^N(x) - mu(x)|
};

inline RoundingReport lambda_eps_rounding(const GameSpec& spec,
                                          std::span<const std::size_t> start,
                                          const GlobalMeasure& Lg) {
  const int d = spec.d();
  PathSpace sp{d, Lg.t};
  const int N = static_cast<int>(start.size());
  std::vector<int> I(sp.size(), 0);
  for (std::size_t x : start) I.at(x)++;
  for (int c : I)
    if (c == 0) throw NotFullSupport("rounding start must cover X_t");

  RoundingReport rep;
  rep.lambda_eps.t = Lg.t;
  rep.lambda_eps.d = d;
  rep.lambda_eps.T = Lg.T;
  GlobalMeasure canon = Lg.canonical();
  for (std::size_t x = 0; x < sp.size(); ++x) {
    std::vector<std::size_t> idx;
    double mass_mu = 0.0;
    for (std::size_t k = 0; k < canon.atoms.size(); ++k)
      if (canon.atoms[k].x == x) {
        idx.push_back(k);
        mass_mu += canon.atoms[k].weight;
      }
    double muN_x = static_cast<double>(I[x]) / N;
    rep.bound = std::max(rep.bound, 1.0 / N + std::abs(muN_x - mass_mu));
    // rescale to sum N*muN(x), floor, distribute remainder by largest
    // fractional part (ties by atom index)
    std::vector<double> target(idx.size());
    std::vector<int> mult(idx.size());
    int assigned = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      target[k] = N * canon.atoms[idx[k]].weight * (muN_x / mass_mu);
      mult[k] = static_cast<int>(std::floor(target[k] + 1e-12));
      assigned += mult[k];
    }
    int missing = I[x] - assigned;
    std::vector<std::size_t> order(idx.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return target[a] - std::floor(target[a]) > target[b] - std::floor(target[b]);
    });
    for (int m = 0; m < missing; ++m) mult[order[static_cast<std::size_t>(m)]] += 1;
    if (missing < 0)
      throw ValidationError("rounding produced too much mass");  // cannot happen with floors
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (mult[k] == 0) continue;
      GlobalMeasure::Atom atom = canon.atoms[idx[k]];
      atom.weight = static_cast<double>(mult[k]) / N;
      rep.max_deviation =
          std::max(rep.max_deviation, std::abs(atom.weight - canon.atoms[idx[k]].weight));
      rep.lambda_eps.atoms.push_back(std::move(atom));
    }
  }
  return rep;
}

// Expands a rounded global measure into a concrete profile: within each
// initial path, ascending player indices receive the atoms in canonical
// order, each with its integer multiplicity.
inline HeteroProfile profile_from_lambda(const GameSpec& spec,
                                         std::span<const std::size_t> start,
                                         const GlobalMeasure& Leps) {
  const int N = static_cast<int>(start.size());
  HeteroProfile prof;
  prof.t = Leps.t;
  prof.start.assign(start.begin(), start.end());
  prof.controls.assign(
      static_cast<std::size_t>(N),
      MuPathControl::frozen(PurePathControl::constant(
          spec.T(), spec.d(), Action(spec.actions.at(0).begin(), spec.actions.at(0).end()))));
  PathSpace sp{spec.d(), Leps.t};
  GlobalMeasure canon = Leps.canonical();
  for (std::size_t x = 0; x < sp.size(); ++x) {
    std::vector<int> players;
    for (int j = 0; j < N; ++j)
      if (start[static_cast<std::size_t>(j)] == x) players.push_back(j);
    std::size_t cursor = 0;
    for (const auto& atom : canon.atoms) {
      if (atom.x != x) continue;
      double scaled = atom.weight * N;
      int mult = static_cast<int>(std::llround(scaled));
      if (std::abs(scaled - mult) > 1e-9)
        throw ValidationError("profile expansion needs integer multiplicities");
      for (int m = 0; m < mult; ++m) {
        if (cursor >= players.size())
          throw ValidationError("multiplicities exceed player count at a path");
        prof.controls[static_cast<std::size_t>(players[cursor++])] =
            MuPathControl::frozen(atom.alpha);
      }
    }
    if (cursor != players.size())
      throw ValidationError("multiplicities do not add up to the player count");
  }
  return prof;
}

// ---- Convergence experiment ---------------------------------------------------

struct HeteroConvergenceRow {
  int N = 0;
  double averaged_gap = 0.0;      // constructed profile, averaged gap
  double averaged_gap_ci = 0.0;
  double sqrt_eps_fraction = 0.0;
  bool chebyshev_ok = true;
  double bar_lambda_gap = 0.0;    // global gap of the lifted profile
  double round_trip_distance = 0.0;  // Lambda^N vs rounded lift
};

// Both pipeline directions on one relaxed eps-MFE: discretize, round and
// expand into profiles per N (tracking the averaged N-player gap), and lift
// the same profiles back to global measures (tracking the global gap).
inline std::vector<HeteroConvergenceRow> hetero_convergence_experiment(
    const GameSpec& spec, int t, const PathMeasure& mu, const RelaxedControl& gamma,
    double eps, std::span<const int> N_list, std::uint64_t seed,
    std::span<const MuPathControl> family, const PathGameOptions& opt_in = {}) {
  std::vector<HeteroConvergenceRow> rows;
  DiscretizeReport disc = discretize_relaxed(spec, gamma, eps);
  GlobalMeasure Lg = lambda_from_gamma(spec, t, mu, disc.gamma_eps);
  CounterRng rng(seed);
  PathSpace sp{spec.d(), t};
  for (int N : N_list) {
    // start paths sampled i.i.d. from mu until every path is covered
    std::vector<std::size_t> start;
    for (std::uint64_t round = 0;; ++round) {
      start.clear();
      for (int j = 0; j < N; ++j) {
        double u = rng.uniform(static_cast<std::uint64_t>(N), round,
                               static_cast<std::uint64_t>(j), 500'000);
        double acc = 0.0;
        std::size_t pick = sp.size() - 1;
        for (std::size_t p = 0; p < sp.size(); ++p) {
          acc += mu[p];
          if (u < acc) {
            pick = p;
            break;
          }
        }
        start.push_back(pick);
      }
      std::vector<int> count(sp.size(), 0);
      for (std::size_t x : start) count.at(x)++;
      bool full = true;
      for (int c : count)
        if (c == 0) full = false;
      if (full) break;
    }
    RoundingReport rounding = lambda_eps_rounding(spec, start, Lg);
    HeteroProfile prof = profile_from_lambda(spec, start, rounding.lambda_eps);
    HeteroConvergenceRow row;
    row.N = N;
    row.round_trip_distance =
        global_measure_distance(lambda_N_from_profile(spec, prof), rounding.lambda_eps);
    PathGameOptions opt = opt_in;
    opt.seed = seed;
    HeteroEqReport eq = hetero_eq_check(spec, prof, eps, family, opt);
    row.averaged_gap = eq.averaged_gap;
    row.averaged_gap_ci = eq.averaged_gap_ci;
    row.sqrt_eps_fraction = eq.sqrt_eps_fraction;
    row.chebyshev_ok = eq.chebyshev_ok;
    BarLambdaLift lift = bar_lambda_lift(spec, prof, mu);
    row.bar_lambda_gap = global_mfe_gap(spec, lift.bar_lambda).max_gap();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mfg
