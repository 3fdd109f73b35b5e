#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mfg/common.hpp"
#include "mfg/rng.hpp"

namespace mfg {

// One-dimensional drift-controlled model with unit diffusion on a truncated
// domain. The measure enters the coefficients only through declared
// 1-Lipschitz statistics, which keeps the W1-Lipschitz continuity checkable
// and the grid and particle couplings consistent.
struct DiffusionSpec {
  std::string name = "diffusion";
  double T = 1.0;
  double x_min = -5.0, x_max = 5.0;
  int nx = 201;
  double dt = 2e-3;
  double a_min = -1.0, a_max = 1.0;
  int n_action_grid = 5;
  double C0 = 1.0;      // bound on |f|, |g| over the domain
  double b_bound = 1.0;  // bound on |b|, separate so steep costs don't tax dt
  double L0 = 1.0;       // Lipschitz constant in (x, stats, a) over the domain

  enum class StatKind { mean, abs_mean, tanh_mean };
  std::vector<StatKind> stats;

  // (t, x, stat values, a)
  std::function<double(double, double, std::span<const double>, double)> b;
  std::function<double(double, double, std::span<const double>, double)> f;
  std::function<double(double, std::span<const double>)> g;

  int nt() const { return static_cast<int>(std::llround(T / dt)); }
  double dx() const { return (x_max - x_min) / (nx - 1); }
  double node(int i) const { return x_min + i * dx(); }
  double action(int k) const {
    return n_action_grid == 1
               ? a_min
               : a_min + (a_max - a_min) * static_cast<double>(k) / (n_action_grid - 1);
  }

  double stat_fn(StatKind kind, double x) const {
    switch (kind) {
      case StatKind::mean: return x;
      case StatKind::abs_mean: return std::abs(x);
      case StatKind::tanh_mean: return std::tanh(x);
    }
    return 0.0;
  }

  std::vector<double> stats_of(std::span<const double> mass) const {
    std::vector<double> out(stats.size(), 0.0);
    for (std::size_t j = 0; j < stats.size(); ++j)
      for (int i = 0; i < nx; ++i)
        out[j] += mass[static_cast<std::size_t>(i)] * stat_fn(stats[j], node(i));
    return out;
  }

  std::vector<double> stats_of_particles(std::span<const double> xs) const {
    std::vector<double> out(stats.size(), 0.0);
    for (std::size_t j = 0; j < stats.size(); ++j) {
      for (double x : xs) out[j] += stat_fn(stats[j], x);
      out[j] /= static_cast<double>(xs.size());
    }
    return out;
  }

  // explicit-scheme stability bound for both solvers
  void check_stability() const {
    double bound = dt * (1.0 / (dx() * dx()) + b_bound / dx());
    if (bound > 1.0) {
      double suggested = 0.9 / (1.0 / (dx() * dx()) + b_bound / dx());
      throw ValidationError("grid scheme unstable: dt <= " + std::to_string(suggested) +
                            " required");
    }
  }
};

// Sampling probes for the declared bounds; never throws.
struct DiffusionValidation {
  bool accepted = true;
  double max_abs_b = 0.0, max_abs_f = 0.0, max_abs_g = 0.0;
  double max_slope = 0.0;  // worst finite-difference Lipschitz estimate
  std::vector<std::string> issues;
};

inline DiffusionValidation validate_diffusion_spec(const DiffusionSpec& spec) {
  DiffusionValidation rep;
  try {
    spec.check_stability();
  } catch (const Error& e) {
    rep.accepted = false;
    rep.issues.push_back(e.what());
  }
  std::vector<double> probe_stats(spec.stats.size(), 0.0);
  std::vector<double> probe_stats2(spec.stats.size(), 0.5);
  const int px = 21, pa = 5;
  for (int it = 0; it <= 2; ++it) {
    double t = spec.T * it / 2.0;
    for (int i = 0; i < px; ++i) {
      double x = spec.x_min + (spec.x_max - spec.x_min) * i / (px - 1);
      rep.max_abs_g = std::max(rep.max_abs_g, std::abs(spec.g(x, probe_stats)));
      for (int k = 0; k < pa; ++k) {
        double a = spec.a_min + (spec.a_max - spec.a_min) * k / (pa - 1);
        rep.max_abs_b = std::max(rep.max_abs_b, std::abs(spec.b(t, x, probe_stats, a)));
        rep.max_abs_f = std::max(rep.max_abs_f, std::abs(spec.f(t, x, probe_stats, a)));
        double h = 1e-4;
        double bdx = (spec.b(t, x + h, probe_stats, a) - spec.b(t, x, probe_stats, a)) / h;
        rep.max_slope = std::max(rep.max_slope, std::abs(bdx));
        if (!spec.stats.empty()) {
          double bm = (spec.b(t, x, probe_stats2, a) - spec.b(t, x, probe_stats, a)) / 0.5;
          rep.max_slope = std::max(rep.max_slope, std::abs(bm));
        }
      }
    }
  }
  if (rep.max_abs_f > spec.C0 + 1e-9 || rep.max_abs_g > spec.C0 + 1e-9) {
    rep.accepted = false;
    rep.issues.push_back("cost probe exceeds declared C0");
  }
  if (rep.max_abs_b > spec.b_bound + 1e-9) {
    rep.accepted = false;
    rep.issues.push_back("drift probe exceeds declared bound");
  }
  if (rep.max_slope > spec.L0 + 1e-6) {
    rep.accepted = false;
    rep.issues.push_back("Lipschitz probe exceeds declared L0");
  }
  return rep;
}

// Control on the space-time grid, linearly interpolated in x; the slope table
// certifies its Lipschitz constant.
struct TimedControl {
  int k0 = 0;                               // first time index
  std::vector<std::vector<double>> values;  // [k - k0][node]

  static TimedControl constant(const DiffusionSpec& spec, int k0, double a) {
    TimedControl c;
    c.k0 = k0;
    c.values.assign(static_cast<std::size_t>(spec.nt() - k0),
                    std::vector<double>(static_cast<std::size_t>(spec.nx), a));
    return c;
  }

  double at(const DiffusionSpec& spec, int k, double x) const {
    const auto& row = values.at(static_cast<std::size_t>(std::min(
        k - k0, static_cast<int>(values.size()) - 1)));
    double pos = (x - spec.x_min) / spec.dx();
    int i = std::clamp(static_cast<int>(std::floor(pos)), 0, spec.nx - 2);
    double w = std::clamp(pos - i, 0.0, 1.0);
    return (1.0 - w) * row[static_cast<std::size_t>(i)] + w * row[static_cast<std::size_t>(i + 1)];
  }

  double at_node(int k, int i) const {
    return values.at(static_cast<std::size_t>(std::min(
        k - k0, static_cast<int>(values.size()) - 1)))[static_cast<std::size_t>(i)];
  }

  double max_slope(const DiffusionSpec& spec) const {
    double worst = 0.0;
    for (const auto& row : values)
      for (std::size_t i = 0; i + 1 < row.size(); ++i)
        worst = std::max(worst, std::abs(row[i + 1] - row[i]) / spec.dx());
    return worst;
  }

  double sup_distance_to(const TimedControl& other) const {
    double worst = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k)
      for (std::size_t i = 0; i < values[k].size(); ++i)
        worst = std::max(worst, std::abs(values[k][i] - other.values[k][i]));
    return worst;
  }
};

// Cell masses per retained time step plus the statistics they induce.
struct GridFlow {
  int k0 = 0;
  std::vector<std::vector<double>> mass;        // [k - k0][node]
  std::vector<std::vector<double>> stat_values; // [k - k0][stat]

  std::span<const double> at(int k) const { return mass.at(static_cast<std::size_t>(k - k0)); }
  std::span<const double> stats_at(int k) const {
    return stat_values.at(static_cast<std::size_t>(k - k0));
  }
};

inline std::vector<double> gaussian_mass(const DiffusionSpec& spec, double mean, double sd) {
  std::vector<double> m(static_cast<std::size_t>(spec.nx));
  double total = 0.0;
  for (int i = 0; i < spec.nx; ++i) {
    double z = (spec.node(i) - mean) / sd;
    m[static_cast<std::size_t>(i)] = std::exp(-0.5 * z * z);
    total += m[static_cast<std::size_t>(i)];
  }
  for (auto& v : m) v /= total;
  return m;
}

// Forward Fokker-Planck solve in conservative flux form with reflecting
// boundaries: drift from b with the statistics refreshed off the current
// density each step, unit diffusion, upwinded advection. Mass is conserved
// to rounding and the scheme is positivity preserving under the stability
// bound.
inline GridFlow mkv_flow(const DiffusionSpec& spec, int k0, std::vector<double> mass0,
                         const TimedControl& alpha) {
  spec.check_stability();
  if (static_cast<int>(mass0.size()) != spec.nx)
    throw DimensionMismatch("initial mass must live on the grid");
  const double dx = spec.dx();
  const double dt = spec.dt;
  GridFlow flow;
  flow.k0 = k0;
  flow.mass.push_back(std::move(mass0));
  flow.stat_values.push_back(spec.stats_of(flow.mass.back()));
  std::vector<double> drift(static_cast<std::size_t>(spec.nx));
  std::vector<double> flux(static_cast<std::size_t>(spec.nx) - 1);
  for (int k = k0; k < spec.nt(); ++k) {
    const auto& m = flow.mass.back();
    const auto& st = flow.stat_values.back();
    double t = k * dt;
    for (int i = 0; i < spec.nx; ++i)
      drift[static_cast<std::size_t>(i)] =
          spec.b(t, spec.node(i), st, alpha.at_node(k, i));
    for (int i = 0; i + 1 < spec.nx; ++i) {
      double bf = 0.5 * (drift[static_cast<std::size_t>(i)] + drift[static_cast<std::size_t>(i + 1)]);
      double adv = (bf > 0.0 ? bf * m[static_cast<std::size_t>(i)]
                             : bf * m[static_cast<std::size_t>(i + 1)]) /
                   dx;
      double dif = 0.5 * (m[static_cast<std::size_t>(i)] - m[static_cast<std::size_t>(i + 1)]) /
                   (dx * dx);
      flux[static_cast<std::size_t>(i)] = adv + dif;
    }
    std::vector<double> next(static_cast<std::size_t>(spec.nx));
    for (int i = 0; i < spec.nx; ++i) {
      double in = i > 0 ? flux[static_cast<std::size_t>(i - 1)] : 0.0;
      double out = i + 1 < spec.nx ? flux[static_cast<std::size_t>(i)] : 0.0;
      next[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(i)] + dt * (in - out);
    }
    flow.mass.push_back(std::move(next));
    flow.stat_values.push_back(spec.stats_of(flow.mass.back()));
  }
  return flow;
}

struct HjbSolution {
  int k0 = 0;
  std::vector<std::vector<double>> v;         // [k - k0][node]
  std::vector<std::vector<double>> feedback;  // argmin action per node, k < nt

  std::span<const double> at(int k) const { return v.at(static_cast<std::size_t>(k - k0)); }

  TimedControl feedback_control() const {
    TimedControl c;
    c.k0 = k0;
    c.values = feedback;
    return c;
  }

  double max_slope(double dx) const {
    double worst = 0.0;
    for (const auto& row : v)
      for (std::size_t i = 0; i + 1 < row.size(); ++i)
        worst = std::max(worst, std::abs(row[i + 1] - row[i]) / dx);
    return worst;
  }
};

namespace detail {

// Backward explicit solve shared by the HJB (minimize over the action grid)
// and the linear equation (fixed control): upwind first derivative, Neumann
// second derivative at the walls.
inline HjbSolution backward_solve(const DiffusionSpec& spec, const GridFlow& flow, int k0,
                                  const TimedControl* fixed,
                                  std::span<const double> terminal) {
  spec.check_stability();
  const double dx = spec.dx();
  const double dt = spec.dt;
  const int nt = spec.nt();
  HjbSolution sol;
  sol.k0 = k0;
  sol.v.assign(static_cast<std::size_t>(nt - k0) + 1,
               std::vector<double>(static_cast<std::size_t>(spec.nx), 0.0));
  sol.feedback.assign(static_cast<std::size_t>(nt - k0),
                      std::vector<double>(static_cast<std::size_t>(spec.nx), spec.a_min));
  sol.v.back().assign(terminal.begin(), terminal.end());
  for (int k = nt - 1; k >= k0; --k) {
    const auto& vn = sol.v[static_cast<std::size_t>(k + 1 - k0)];
    auto& vc = sol.v[static_cast<std::size_t>(k - k0)];
    auto& fb = sol.feedback[static_cast<std::size_t>(k - k0)];
    auto st = flow.stats_at(k);
    double t = k * dt;
    for (int i = 0; i < spec.nx; ++i) {
      double x = spec.node(i);
      double v_m = i > 0 ? vn[static_cast<std::size_t>(i - 1)] : vn[0];
      double v_p = i + 1 < spec.nx ? vn[static_cast<std::size_t>(i + 1)] : vn.back();
      double lap = (v_p - 2.0 * vn[static_cast<std::size_t>(i)] + v_m) / (dx * dx);
      double best = 0.0, best_a = spec.a_min;
      const int n_cand = fixed ? 1 : spec.n_action_grid;
      for (int c = 0; c < n_cand; ++c) {
        double a = fixed ? fixed->at_node(k, i) : spec.action(c);
        double bd = spec.b(t, x, st, a);
        double grad;
        if (bd > 0.0)
          grad = i + 1 < spec.nx
                     ? (vn[static_cast<std::size_t>(i + 1)] - vn[static_cast<std::size_t>(i)]) / dx
                     : (vn[static_cast<std::size_t>(i)] - vn[static_cast<std::size_t>(i - 1)]) / dx;
        else
          grad = i > 0
                     ? (vn[static_cast<std::size_t>(i)] - vn[static_cast<std::size_t>(i - 1)]) / dx
                     : (vn[static_cast<std::size_t>(i + 1)] - vn[static_cast<std::size_t>(i)]) / dx;
        double val = bd * grad + spec.f(t, x, st, a);
        if (c == 0 || val < best) {
          best = val;
          best_a = a;
        }
      }
      vc[static_cast<std::size_t>(i)] = vn[static_cast<std::size_t>(i)] + dt * (0.5 * lap + best);
      fb[static_cast<std::size_t>(i)] = best_a;
    }
  }
  return sol;
}

inline std::vector<double> terminal_g(const DiffusionSpec& spec, const GridFlow& flow) {
  std::vector<double> g(static_cast<std::size_t>(spec.nx));
  auto st = flow.stats_at(spec.nt());
  for (int i = 0; i < spec.nx; ++i) g[static_cast<std::size_t>(i)] = spec.g(spec.node(i), st);
  return g;
}

}  // namespace detail

// Value function and feedback for the deviator against a fixed flow.
inline HjbSolution hjb_solve(const DiffusionSpec& spec, const GridFlow& flow, int k0) {
  return detail::backward_solve(spec, flow, k0, nullptr, detail::terminal_g(spec, flow));
}

// Deviator cost J(mu^alpha; ., ., tilde) for a fixed deviation.
inline HjbSolution linear_solve(const DiffusionSpec& spec, const GridFlow& flow, int k0,
                                const TimedControl& tilde) {
  return detail::backward_solve(spec, flow, k0, &tilde, detail::terminal_g(spec, flow));
}

inline HjbSolution hjb_solve_truncated(const DiffusionSpec& spec, const GridFlow& flow, int k0,
                                       int k_end, std::span<const double> psi) {
  DiffusionSpec sub = spec;
  sub.T = k_end * spec.dt;
  return detail::backward_solve(sub, flow, k0, nullptr, psi);
}

inline HjbSolution linear_solve_truncated(const DiffusionSpec& spec, const GridFlow& flow,
                                          int k0, int k_end, const TimedControl& tilde,
                                          std::span<const double> psi) {
  DiffusionSpec sub = spec;
  sub.T = k_end * spec.dt;
  return detail::backward_solve(sub, flow, k0, &tilde, psi);
}

// Integrated equilibrium gap of Eq-(6.5) type: the L1(mu) average of the
// deviator's suboptimality when everyone plays alpha.
struct ContMfeGap {
  double gap = 0.0;              // integral of (J - v) against mu
  double prob_above_eps = 0.0;   // mu{x : J - v > eps}, the alternate reading
  std::vector<double> J;         // J(t, mu, alpha; ., alpha) on the grid
  std::vector<double> v;         // v(mu^alpha; t, .) on the grid
};

inline ContMfeGap cont_mfe_gap(const DiffusionSpec& spec, int k0,
                               std::span<const double> mu, const TimedControl& alpha,
                               double eps_for_probability = 0.0) {
  GridFlow flow = mkv_flow(spec, k0, std::vector<double>(mu.begin(), mu.end()), alpha);
  HjbSolution v = hjb_solve(spec, flow, k0);
  HjbSolution u = linear_solve(spec, flow, k0, alpha);
  ContMfeGap out;
  out.J.assign(u.at(k0).begin(), u.at(k0).end());
  out.v.assign(v.at(k0).begin(), v.at(k0).end());
  for (int i = 0; i < spec.nx; ++i) {
    double diff = out.J[static_cast<std::size_t>(i)] - out.v[static_cast<std::size_t>(i)];
    out.gap += mu[static_cast<std::size_t>(i)] * diff;
    if (diff > eps_for_probability) out.prob_above_eps += mu[static_cast<std::size_t>(i)];
  }
  return out;
}

// Damped iteration flow -> feedback -> flow, collecting distinct limit points
// across starts; each candidate ships with its own certified gap.
struct FixedPointCandidate {
  TimedControl control;
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline std::vector<FixedPointCandidate> mfe_fixed_point(
    const DiffusionSpec& spec, int k0, std::span<const double> mu,
    std::span<const TimedControl> starts, int iterations = 40, double damping = 0.5,
    double tol = 1e-9, double dedup_tol = 1e-6) {
  std::vector<FixedPointCandidate> out;
  for (const auto& start : starts) {
    TimedControl alpha = start;
    bool converged = false;
    int used = iterations;
    for (int it = 0; it < iterations; ++it) {
      GridFlow flow = mkv_flow(spec, k0, std::vector<double>(mu.begin(), mu.end()), alpha);
      HjbSolution v = hjb_solve(spec, flow, k0);
      TimedControl next = v.feedback_control();
      double move = 0.0;
      for (std::size_t k = 0; k < alpha.values.size(); ++k)
        for (std::size_t i = 0; i < alpha.values[k].size(); ++i) {
          double blended = damping * alpha.values[k][i] + (1.0 - damping) * next.values[k][i];
          move = std::max(move, std::abs(blended - alpha.values[k][i]));
          alpha.values[k][i] = blended;
        }
      if (move < tol) {
        converged = true;
        used = it + 1;
        break;
      }
    }
    FixedPointCandidate cand;
    cand.control = alpha;
    cand.gap = cont_mfe_gap(spec, k0, mu, alpha).gap;
    cand.iterations = used;
    cand.converged = converged;
    bool dup = false;
    for (const auto& have : out)
      if (have.control.sup_distance_to(alpha) <= dedup_tol) dup = true;
    if (!dup) out.push_back(std::move(cand));
  }
  return out;
}

inline std::vector<TimedControl> constant_control_seeds(const DiffusionSpec& spec, int k0,
                                                        int count) {
  std::vector<TimedControl> seeds;
  for (int k = 0; k < count; ++k) {
    double a = count == 1 ? spec.a_min
                          : spec.a_min + (spec.a_max - spec.a_min) * k / (count - 1);
    seeds.push_back(TimedControl::constant(spec, k0, a));
  }
  return seeds;
}

// Sampled lower approximation of the set value, with L1(mu) membership.
struct ContSetValueSample {
  double eps = 0.0;
  std::vector<double> mu;
  std::vector<std::vector<double>> generators;  // J profiles on the grid
  std::vector<double> gaps;
  bool empty_flagged = false;

  double l1_distance(std::span<const double> phi) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& gen : generators) {
      double dist = 0.0;
      for (std::size_t i = 0; i < gen.size(); ++i)
        dist += mu[i] * std::abs(phi[i] - gen[i]);
      best = std::min(best, dist);
    }
    return best;
  }
  bool is_member(std::span<const double> phi) const { return l1_distance(phi) <= eps; }
};

inline ContSetValueSample cont_set_value_sample(const DiffusionSpec& spec, int k0,
                                                std::span<const double> mu, double eps,
                                                std::span<const TimedControl> starts,
                                                int iterations = 40, double damping = 0.5) {
  ContSetValueSample out;
  out.eps = eps;
  out.mu.assign(mu.begin(), mu.end());
  auto cands = mfe_fixed_point(spec, k0, mu, starts, iterations, damping);
  for (const auto& cand : cands) {
    if (cand.gap > eps) continue;
    ContMfeGap g = cont_mfe_gap(spec, k0, mu, cand.control);
    bool dup = false;
    for (const auto& have : out.generators) {
      double dist = 0.0;
      for (std::size_t i = 0; i < have.size(); ++i)
        dist += out.mu[i] * std::abs(have[i] - g.J[i]);
      if (dist <= 1e-9) dup = true;
    }
    if (!dup) {
      out.generators.push_back(g.J);
      out.gaps.push_back(cand.gap);
    }
  }
  out.empty_flagged = out.generators.empty();
  return out;
}

// Sampled recombination probe of the set-value recursion: candidates on
// [t, T0) stitched to continuation candidates at (T0, mu^{a*}_{T0}) via the
// concatenated control; reports gap additivity and the tower residual.
struct ContDppRow {
  double trunc_gap = 0.0;   // gap of a* in the truncated game with psi
  double cont_gap = 0.0;    // gap of the continuation candidate
  double concat_gap = 0.0;  // gap of the concatenated control, full horizon
  double tower_residual = 0.0;
  bool pass = false;
};

struct ContDppReport {
  std::vector<ContDppRow> rows;
  bool all_pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return !rows.empty();
  }
};

inline ContDppReport cont_dpp_probe(const DiffusionSpec& spec, int k0, int k_split,
                                    std::span<const double> mu, double eps,
                                    int seed_count = 3, int iterations = 30) {
  ContDppReport rep;
  auto seeds = constant_control_seeds(spec, k0, seed_count);
  auto cands = mfe_fixed_point(spec, k0, mu, seeds, iterations);
  for (const auto& cand : cands) {
    if (cand.gap > eps) continue;
    GridFlow flow =
        mkv_flow(spec, k0, std::vector<double>(mu.begin(), mu.end()), cand.control);
    std::vector<double> mu_split(flow.at(k_split).begin(), flow.at(k_split).end());
    auto cont_seeds = constant_control_seeds(spec, k_split, seed_count);
    auto cont_cands = mfe_fixed_point(spec, k_split, mu_split, cont_seeds, iterations);
    for (const auto& cont : cont_cands) {
      if (cont.gap > eps) continue;
      // psi = continuation equilibrium cost on the grid
      GridFlow cont_flow = mkv_flow(spec, k_split, mu_split, cont.control);
      HjbSolution cont_u = linear_solve(spec, cont_flow, k_split, cont.control);
      std::vector<double> psi(cont_u.at(k_split).begin(), cont_u.at(k_split).end());

      // concatenated control on the full horizon
      TimedControl concat = cand.control;
      for (int k = k_split; k < spec.nt(); ++k)
        concat.values[static_cast<std::size_t>(k - k0)] =
            cont.control.values[static_cast<std::size_t>(k - k_split)];

      ContDppRow row;
      row.cont_gap = cont.gap;
      ContMfeGap full = cont_mfe_gap(spec, k0, mu, concat);
      row.concat_gap = full.gap;

      GridFlow concat_flow =
          mkv_flow(spec, k0, std::vector<double>(mu.begin(), mu.end()), concat);
      HjbSolution trunc_v = hjb_solve_truncated(spec, concat_flow, k0, k_split, psi);
      HjbSolution trunc_u =
          linear_solve_truncated(spec, concat_flow, k0, k_split, cand.control, psi);
      double trunc_gap = 0.0, tower = 0.0;
      for (int i = 0; i < spec.nx; ++i) {
        trunc_gap += mu[static_cast<std::size_t>(i)] *
                     (trunc_u.at(k0)[static_cast<std::size_t>(i)] -
                      trunc_v.at(k0)[static_cast<std::size_t>(i)]);
        tower += mu[static_cast<std::size_t>(i)] *
                 std::abs(trunc_u.at(k0)[static_cast<std::size_t>(i)] -
                          full.J[static_cast<std::size_t>(i)]);
      }
      row.trunc_gap = trunc_gap;
      row.tower_residual = tower;
      double solver_tol = 10.0 * (spec.dx() * spec.dx() + spec.dt);
      row.pass = row.concat_gap <= 4.0 * eps + solver_tol && row.tower_residual <= solver_tol;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

// ---- Particle systems ---------------------------------------------------------

// Atomless initial draws: inverse-CDF sampling with uniform spreading inside
// cells (the W1-optimal one-dimensional coupling is the sorted-quantile one).
inline std::vector<double> sample_positions(const DiffusionSpec& spec,
                                            std::span<const double> mass, int N,
                                            const CounterRng& rng, std::uint64_t rep) {
  std::vector<double> cum(static_cast<std::size_t>(spec.nx), 0.0);
  double acc = 0.0;
  for (int i = 0; i < spec.nx; ++i) {
    acc += mass[static_cast<std::size_t>(i)];
    cum[static_cast<std::size_t>(i)] = acc;
  }
  std::vector<double> xs(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) {
    double u = rng.uniform(static_cast<std::uint64_t>(N), rep, static_cast<std::uint64_t>(j),
                           900'000);
    int i = 0;
    while (i + 1 < spec.nx && cum[static_cast<std::size_t>(i)] < u) ++i;
    double lo = i > 0 ? cum[static_cast<std::size_t>(i - 1)] : 0.0;
    double within = mass[static_cast<std::size_t>(i)] > 0.0
                        ? (u - lo) / mass[static_cast<std::size_t>(i)]
                        : 0.5;
    xs[static_cast<std::size_t>(j)] =
        std::clamp(spec.node(i) + (within - 0.5) * spec.dx(), spec.x_min, spec.x_max);
  }
  return xs;
}

struct McEstimateD {
  double mean = 0.0;
  double half_ci = 0.0;
};

inline McEstimateD summarize_d(std::span<const double> xs) {
  McEstimateD e;
  e.mean = pairwise_sum(xs) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  if (xs.size() > 1)
    e.half_ci = 1.96 * std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) /
                                 static_cast<double>(xs.size()));
  return e;
}

// Euler-Maruyama with empirical-measure coupling and reflecting walls.
// One replication; fills positions[k][j].
inline void simulate_particles(const DiffusionSpec& spec, int k0,
                               std::span<const double> start, const TimedControl& alpha,
                               const CounterRng& rng, std::uint64_t rep,
                               std::vector<std::vector<double>>& positions,
                               const TimedControl* deviator = nullptr,
                               int deviator_index = -1) {
  const int N = static_cast<int>(start.size());
  const int steps = spec.nt() - k0;
  const double sdt = std::sqrt(spec.dt);
  positions.assign(static_cast<std::size_t>(steps) + 1,
                   std::vector<double>(start.begin(), start.end()));
  for (int k = 0; k < steps; ++k) {
    const auto& cur = positions[static_cast<std::size_t>(k)];
    auto& nxt = positions[static_cast<std::size_t>(k) + 1];
    auto st = spec.stats_of_particles(cur);
    double t = (k0 + k) * spec.dt;
    for (int j = 0; j < N; ++j) {
      const TimedControl& ctl = (j == deviator_index && deviator) ? *deviator : alpha;
      double a = ctl.at(spec, k0 + k, cur[static_cast<std::size_t>(j)]);
      double drift = spec.b(t, cur[static_cast<std::size_t>(j)], st, a);
      double noise = rng.normal(static_cast<std::uint64_t>(N), rep,
                                static_cast<std::uint64_t>(j),
                                static_cast<std::uint64_t>(k0 + k));
      double x = cur[static_cast<std::size_t>(j)] + drift * spec.dt + sdt * noise;
      // reflect into the domain
      while (x < spec.x_min || x > spec.x_max) {
        if (x < spec.x_min) x = 2.0 * spec.x_min - x;
        if (x > spec.x_max) x = 2.0 * spec.x_max - x;
      }
      nxt[static_cast<std::size_t>(j)] = x;
    }
  }
}

struct ParticleResult {
  std::vector<McEstimateD> J;        // per player cost over replications
  McEstimateD mean_sq_displacement;  // at the final time, vs the start
};

inline ParticleResult particle_system(const DiffusionSpec& spec, int k0,
                                      std::span<const double> start,
                                      const TimedControl& alpha, int replications,
                                      std::uint64_t seed, unsigned threads = 0,
                                      const TimedControl* deviator = nullptr,
                                      int deviator_index = -1) {
  const int N = static_cast<int>(start.size());
  CounterRng rng(seed);
  std::vector<std::vector<double>> costs(static_cast<std::size_t>(replications));
  std::vector<double> disp(static_cast<std::size_t>(replications));
  parallel_for(
      static_cast<std::size_t>(replications),
      [&](std::size_t rep) {
        std::vector<std::vector<double>> pos;
        simulate_particles(spec, k0, start, alpha, rng, rep, pos, deviator, deviator_index);
        std::vector<double> J(static_cast<std::size_t>(N), 0.0);
        for (int k = 0; k + 1 < static_cast<int>(pos.size()); ++k) {
          const auto& cur = pos[static_cast<std::size_t>(k)];
          auto st = spec.stats_of_particles(cur);
          double t = (k0 + k) * spec.dt;
          for (int j = 0; j < N; ++j) {
            const TimedControl& ctl = (j == deviator_index && deviator) ? *deviator : alpha;
            double a = ctl.at(spec, k0 + k, cur[static_cast<std::size_t>(j)]);
            J[static_cast<std::size_t>(j)] +=
                spec.dt * spec.f(t, cur[static_cast<std::size_t>(j)], st, a);
          }
        }
        const auto& fin = pos.back();
        auto stT = spec.stats_of_particles(fin);
        double d2 = 0.0;
        for (int j = 0; j < N; ++j) {
          J[static_cast<std::size_t>(j)] += spec.g(fin[static_cast<std::size_t>(j)], stT);
          double dx = fin[static_cast<std::size_t>(j)] - start[static_cast<std::size_t>(j)];
          d2 += dx * dx;
        }
        disp[rep] = d2 / N;
        costs[rep] = std::move(J);
      },
      threads);
  ParticleResult out;
  out.J.resize(static_cast<std::size_t>(N));
  std::vector<double> per(static_cast<std::size_t>(replications));
  for (int j = 0; j < N; ++j) {
    for (int r = 0; r < replications; ++r)
      per[static_cast<std::size_t>(r)] = costs[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
    out.J[static_cast<std::size_t>(j)] = summarize_d(per);
  }
  out.mean_sq_displacement = summarize_d(disp);
  return out;
}

// Exact W1 between two finite atomic measures on the line (CDF area between
// the union of the atoms).
inline double w1_atoms(std::span<const double> xa, std::span<const double> wa,
                       std::span<const double> xb, std::span<const double> wb) {
  struct Ev {
    double x, da, db;
  };
  std::vector<Ev> ev;
  ev.reserve(xa.size() + xb.size());
  for (std::size_t i = 0; i < xa.size(); ++i) ev.push_back({xa[i], wa[i], 0.0});
  for (std::size_t i = 0; i < xb.size(); ++i) ev.push_back({xb[i], 0.0, wb[i]});
  std::sort(ev.begin(), ev.end(), [](const Ev& l, const Ev& r) { return l.x < r.x; });
  double Fa = 0.0, Fb = 0.0, total = 0.0;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    Fa += ev[k].da;
    Fb += ev[k].db;
    if (k + 1 < ev.size()) total += std::abs(Fa - Fb) * (ev[k + 1].x - ev[k].x);
  }
  return total;
}

inline double w1_particles_vs_grid(const DiffusionSpec& spec, std::span<const double> xs,
                                   std::span<const double> mass) {
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> wa(sorted.size(), 1.0 / static_cast<double>(sorted.size()));
  std::vector<double> nodes(static_cast<std::size_t>(spec.nx));
  for (int i = 0; i < spec.nx; ++i) nodes[static_cast<std::size_t>(i)] = spec.node(i);
  return w1_atoms(sorted, wa, nodes, mass);
}

struct ContConvergenceRow {
  int N = 0;
  double w1_max = 0.0;  // max over retained times of E[W1(mu^N_s, mu^alpha_s)]
  double w1_ci = 0.0;
  double x_norm2 = 0.0;  // mean of ||vec x||_2 across replications
  double avg_gap = 0.0;  // averaged deviation gap over representatives
  double avg_gap_ci = 0.0;
};

struct ContConvergenceTable {
  std::vector<ContConvergenceRow> rows;
  double slope = 0.0;
  double r2 = 0.0;
};

// Particle empirical measures against the grid flow, with a per-N averaged
// deviation gap estimated on representative players over a finite deviation
// family (constant-action controls plus the control itself).
inline ContConvergenceTable cont_convergence_experiment(
    const DiffusionSpec& spec, int k0, std::span<const double> mu, const TimedControl& alpha,
    std::span<const int> N_list, int replications, std::uint64_t seed,
    int gap_replications = 0, int gap_representatives = 4, unsigned threads = 0) {
  GridFlow flow = mkv_flow(spec, k0, std::vector<double>(mu.begin(), mu.end()), alpha);
  const int steps = spec.nt() - k0;
  // compare at a handful of times (every quarter horizon)
  std::vector<int> check_ks;
  for (int q = 1; q <= 4; ++q) check_ks.push_back(k0 + (steps * q) / 4);

  ContConvergenceTable table;
  CounterRng rng(seed);
  std::vector<TimedControl> family = constant_control_seeds(spec, k0, 3);
  family.push_back(alpha);
  std::vector<int> Ns(N_list.begin(), N_list.end());
  std::vector<double> maxw1;
  for (int N : N_list) {
    ContConvergenceRow row;
    row.N = N;
    std::vector<std::vector<double>> w1(check_ks.size(),
                                        std::vector<double>(static_cast<std::size_t>(replications)));
    std::vector<double> xnorm(static_cast<std::size_t>(replications));
    parallel_for(
        static_cast<std::size_t>(replications),
        [&](std::size_t rep) {
          auto start = sample_positions(spec, mu, N, rng, rep);
          double n2 = 0.0;
          for (double x : start) n2 += x * x;
          xnorm[rep] = std::sqrt(n2 / N);
          std::vector<std::vector<double>> pos;
          simulate_particles(spec, k0, start, alpha, rng, rep, pos);
          for (std::size_t c = 0; c < check_ks.size(); ++c) {
            int k = check_ks[c];
            w1[c][rep] = w1_particles_vs_grid(spec, pos[static_cast<std::size_t>(k - k0)],
                                              flow.at(k));
          }
        },
        threads);
    double worst = 0.0, worst_ci = 0.0;
    for (std::size_t c = 0; c < check_ks.size(); ++c) {
      McEstimateD e = summarize_d(w1[c]);
      if (e.mean > worst) {
        worst = e.mean;
        worst_ci = e.half_ci;
      }
    }
    row.w1_max = worst;
    row.w1_ci = worst_ci;
    row.x_norm2 = pairwise_sum(xnorm) / replications;

    if (gap_replications > 0) {
      auto start = sample_positions(spec, mu, N, rng, 777);
      ParticleResult base =
          particle_system(spec, k0, start, alpha, gap_replications, seed + 1, threads);
      int reps_count = std::min(gap_representatives, N);
      double gap_sum = 0.0, ci_sum = 0.0;
      for (int r = 0; r < reps_count; ++r) {
        int i = (N / reps_count) * r;
        double best = std::numeric_limits<double>::infinity();
        double best_ci = 0.0;
        for (const auto& dev : family) {
          ParticleResult devres = particle_system(spec, k0, start, alpha, gap_replications,
                                                  seed + 1, threads, &dev, i);
          if (devres.J[static_cast<std::size_t>(i)].mean < best) {
            best = devres.J[static_cast<std::size_t>(i)].mean;
            best_ci = devres.J[static_cast<std::size_t>(i)].half_ci;
          }
        }
        gap_sum += base.J[static_cast<std::size_t>(i)].mean - best;
        ci_sum += base.J[static_cast<std::size_t>(i)].half_ci + best_ci;
      }
      row.avg_gap = gap_sum / reps_count;
      row.avg_gap_ci = ci_sum / reps_count;
    }
    table.rows.push_back(row);
    maxw1.push_back(row.w1_max);
  }
  fit_loglog(Ns, maxw1, 4, table.slope, table.r2);
  return table;
}

}  // namespace mfg
