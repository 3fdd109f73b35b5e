#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/rng.hpp"
#include "mfg/setvalue.hpp"

namespace mfg {

// Start data of an N-player game; exact mode walks the product chain on S^N,
// Monte Carlo samples trajectories with counter-based draws.
struct NConfig {
  std::vector<int> start;  // x in S^N with fully supported empirical measure
  enum class Mode { exact, monte_carlo };
  Mode mode = Mode::exact;
  std::uint64_t seed = 0;
  int samples = 10'000;
  // largest d^N handled exactly; each exact step walks d^N x d^N transitions
  std::size_t exact_cap = 1 << 14;

  int N() const { return static_cast<int>(start.size()); }
  void check(int d) const {
    if (start.empty()) throw ValidationError("N-player game needs N >= 1");
    if (!empirical_measure(start, d).full_support())
      throw NotFullSupport("initial configuration must cover every state");
  }
};

namespace detail {

inline std::size_t pow_sz(int base, int exp) {
  std::size_t r = 1;
  for (int k = 0; k < exp; ++k) r *= static_cast<std::size_t>(base);
  return r;
}

inline std::vector<int> decode_config(std::size_t code, int d, int N) {
  std::vector<int> xs(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) {
    xs[static_cast<std::size_t>(j)] = static_cast<int>(code % static_cast<std::size_t>(d));
    code /= static_cast<std::size_t>(d);
  }
  return xs;
}

inline std::size_t encode_config(std::span<const int> xs, int d) {
  std::size_t code = 0;
  for (int j = static_cast<int>(xs.size()) - 1; j >= 0; --j)
    code = code * static_cast<std::size_t>(d) + static_cast<std::size_t>(xs[static_cast<std::size_t>(j)]);
  return code;
}

}  // namespace detail

// Exact joint law of the product chain; distributions over S^N per time.
// Controls: one shared control plus an optional deviator.
inline std::vector<std::vector<double>> nplayer_law_exact(
    const GameSpec& spec, int t, const NConfig& cfg, const MuControl& alpha,
    const MuControl* deviator = nullptr, int deviator_index = -1) {
  const int d = spec.d();
  const int N = cfg.N();
  const std::size_t M = detail::pow_sz(d, N);
  if (M > cfg.exact_cap)
    throw SizeGuardExceeded("exact N-player law needs " + std::to_string(M) +
                            " joint states; use Monte Carlo");
  std::vector<std::vector<double>> law;
  std::vector<double> dist(M, 0.0);
  dist[detail::encode_config(cfg.start, d)] = 1.0;
  law.push_back(dist);
  for (int s = t; s < spec.T(); ++s) {
    std::vector<double> next(M, 0.0);
    for (std::size_t code = 0; code < M; ++code) {
      if (dist[code] == 0.0) continue;
      auto xs = detail::decode_config(code, d, N);
      SimplexMeasure muN = empirical_measure(xs, d);
      // per-player kernel rows
      std::vector<std::vector<double>> rows(static_cast<std::size_t>(N));
      for (int j = 0; j < N; ++j) {
        const MuControl& ctl = (j == deviator_index && deviator) ? *deviator : alpha;
        Action a = ctl.at(s, xs[static_cast<std::size_t>(j)], muN);
        auto& row = rows[static_cast<std::size_t>(j)];
        row.resize(static_cast<std::size_t>(d));
        for (int y = 0; y < d; ++y)
          row[static_cast<std::size_t>(y)] = spec.q(s, xs[static_cast<std::size_t>(j)], muN, a, y);
      }
      // distribute over product successors
      std::vector<int> ys(static_cast<std::size_t>(N), 0);
      while (true) {
        double p = dist[code];
        for (int j = 0; j < N; ++j)
          p *= rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(ys[static_cast<std::size_t>(j)])];
        if (p != 0.0) next[detail::encode_config(ys, d)] += p;
        int j = 0;
        while (j < N && ++ys[static_cast<std::size_t>(j)] == d) {
          ys[static_cast<std::size_t>(j)] = 0;
          ++j;
        }
        if (j == N) break;
      }
    }
    dist = std::move(next);
    law.push_back(dist);
  }
  return law;
}

// Exact costs of every player in one sweep of the joint law.
inline std::vector<double> nplayer_cost_exact_all(const GameSpec& spec, int t,
                                                  const NConfig& cfg, const MuControl& alpha,
                                                  const MuControl* deviator = nullptr,
                                                  int deviator_index = -1) {
  const int d = spec.d();
  const int N = cfg.N();
  auto law = nplayer_law_exact(spec, t, cfg, alpha, deviator, deviator_index);
  std::vector<double> J(static_cast<std::size_t>(N), 0.0);
  for (int s = t; s <= spec.T(); ++s) {
    const auto& dist = law[static_cast<std::size_t>(s - t)];
    for (std::size_t code = 0; code < dist.size(); ++code) {
      if (dist[code] == 0.0) continue;
      auto xs = detail::decode_config(code, d, N);
      SimplexMeasure muN = empirical_measure(xs, d);
      for (int j = 0; j < N; ++j) {
        int xj = xs[static_cast<std::size_t>(j)];
        if (s == spec.T()) {
          J[static_cast<std::size_t>(j)] += dist[code] * spec.G(xj, muN);
        } else {
          const MuControl& ctl = (j == deviator_index && deviator) ? *deviator : alpha;
          Action a = ctl.at(s, xj, muN);
          J[static_cast<std::size_t>(j)] += dist[code] * spec.F(s, xj, muN, a);
        }
      }
    }
  }
  return J;
}

inline double nplayer_cost_exact(const GameSpec& spec, int t, const NConfig& cfg,
                                 const MuControl& alpha, int i,
                                 const MuControl* deviator = nullptr,
                                 int deviator_index = -1) {
  return nplayer_cost_exact_all(spec, t, cfg, alpha, deviator,
                                deviator_index)[static_cast<std::size_t>(i)];
}

struct McEstimate {
  double mean = 0.0;
  double half_ci = 0.0;  // 1.96 standard errors
  int samples = 0;
};

namespace detail {

// One replication of the product chain; fills states[k][j] for k = 0..T-t.
// Draws are keyed by (seed, N, rep, player, step), so the trajectory set is
// independent of scheduling and common across deviation candidates.
inline void simulate_replication(const GameSpec& spec, int t, std::span<const int> start,
                                 const MuControl& alpha, const MuControl* deviator,
                                 int deviator_index, const CounterRng& rng, std::uint64_t rep,
                                 std::vector<std::vector<int>>& states) {
  const int d = spec.d();
  const int N = static_cast<int>(start.size());
  const int steps = spec.T() - t;
  states.assign(static_cast<std::size_t>(steps) + 1, std::vector<int>(start.begin(), start.end()));
  std::vector<double> row(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> state_rows;  // cache per current state
  for (int k = 0; k < steps; ++k) {
    const int s = t + k;
    const auto& cur = states[static_cast<std::size_t>(k)];
    auto& nxt = states[static_cast<std::size_t>(k) + 1];
    SimplexMeasure muN = empirical_measure(cur, d);
    state_rows.assign(static_cast<std::size_t>(d), {});
    for (int j = 0; j < N; ++j) {
      int xj = cur[static_cast<std::size_t>(j)];
      const bool is_dev = (j == deviator_index && deviator);
      const std::vector<double>* row_ptr = nullptr;
      if (!is_dev && !state_rows[static_cast<std::size_t>(xj)].empty()) {
        row_ptr = &state_rows[static_cast<std::size_t>(xj)];
      } else {
        const MuControl& ctl = is_dev ? *deviator : alpha;
        Action a = ctl.at(s, xj, muN);
        row.resize(static_cast<std::size_t>(d));
        for (int y = 0; y < d; ++y) row[static_cast<std::size_t>(y)] = spec.q(s, xj, muN, a, y);
        if (!is_dev) {
          state_rows[static_cast<std::size_t>(xj)] = row;
          row_ptr = &state_rows[static_cast<std::size_t>(xj)];
        } else {
          row_ptr = &row;
        }
      }
      double u = rng.uniform(static_cast<std::uint64_t>(N), rep, static_cast<std::uint64_t>(j),
                             static_cast<std::uint64_t>(s));
      double acc = 0.0;
      int y = d - 1;
      for (int yy = 0; yy < d; ++yy) {
        acc += (*row_ptr)[static_cast<std::size_t>(yy)];
        if (u < acc) {
          y = yy;
          break;
        }
      }
      nxt[static_cast<std::size_t>(j)] = y;
    }
  }
}

inline McEstimate summarize(std::span<const double> xs) {
  McEstimate e;
  e.samples = static_cast<int>(xs.size());
  e.mean = pairwise_sum(xs) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  if (xs.size() > 1)
    e.half_ci = 1.96 * std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) /
                                 static_cast<double>(xs.size()));
  return e;
}

}  // namespace detail

// Monte Carlo cost of player i; replications are deterministic in
// (seed, N, rep, player, step) and independent of the worker count.
inline McEstimate nplayer_cost_mc(const GameSpec& spec, int t, const NConfig& cfg,
                                  const MuControl& alpha, int i,
                                  const MuControl* deviator = nullptr, int deviator_index = -1,
                                  unsigned threads = 0) {
  const int d = spec.d();
  CounterRng rng(cfg.seed);
  std::vector<double> costs(static_cast<std::size_t>(cfg.samples), 0.0);
  parallel_for(
      static_cast<std::size_t>(cfg.samples),
      [&](std::size_t rep) {
        std::vector<std::vector<int>> states;
        detail::simulate_replication(spec, t, cfg.start, alpha, deviator, deviator_index, rng,
                                     rep, states);
        double total = 0.0;
        for (int s = t; s < spec.T(); ++s) {
          const auto& cur = states[static_cast<std::size_t>(s - t)];
          SimplexMeasure muN = empirical_measure(cur, d);
          int xi = cur[static_cast<std::size_t>(i)];
          const MuControl& ctl = (i == deviator_index && deviator) ? *deviator : alpha;
          total += spec.F(s, xi, muN, ctl.at(s, xi, muN));
        }
        const auto& fin = states.back();
        total += spec.G(fin[static_cast<std::size_t>(i)], empirical_measure(fin, d));
        costs[rep] = total;
      },
      threads);
  return detail::summarize(costs);
}

// Best-response bracket: the upper bound minimizes over a supplied deviation
// family, the lower bound relaxes the deviator to full-information feedback
// on the joint configuration. upper >= inf over the family's closure covers
// >= lower always.
struct BestResponseBracket {
  double upper = 0.0;
  double lower = 0.0;
  std::size_t upper_argmin = 0;  // index into the family
};

// family entries are deviation controls (MuControl wraps both pure and
// measure-dependent candidates).
inline BestResponseBracket best_response_value(const GameSpec& spec, int t, const NConfig& cfg,
                                               const MuControl& alpha, int i,
                                               std::span<const MuControl> family) {
  if (family.empty()) throw ValidationError("best response needs a nonempty family");
  const int d = spec.d();
  const int N = cfg.N();
  BestResponseBracket out;
  out.upper = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < family.size(); ++k) {
    double J = nplayer_cost_exact(spec, t, cfg, alpha, i, &family[k], i);
    if (J < out.upper) {
      out.upper = J;
      out.upper_argmin = k;
    }
  }

  // full-information dynamic program on the joint chain
  const std::size_t M = detail::pow_sz(d, N);
  if (M > cfg.exact_cap)
    throw SizeGuardExceeded("full-information bracket needs " + std::to_string(M) +
                            " joint states");
  std::vector<double> W(M), Wn(M);
  for (std::size_t code = 0; code < M; ++code) {
    auto xs = detail::decode_config(code, d, N);
    W[code] = spec.G(xs[static_cast<std::size_t>(i)], empirical_measure(xs, d));
  }
  for (int s = spec.T() - 1; s >= t; --s) {
    for (std::size_t code = 0; code < M; ++code) {
      auto xs = detail::decode_config(code, d, N);
      SimplexMeasure muN = empirical_measure(xs, d);
      // others' rows are fixed by the shared control
      std::vector<std::vector<double>> rows(static_cast<std::size_t>(N));
      for (int j = 0; j < N; ++j) {
        if (j == i) continue;
        Action a = alpha.at(s, xs[static_cast<std::size_t>(j)], muN);
        auto& row = rows[static_cast<std::size_t>(j)];
        row.resize(static_cast<std::size_t>(d));
        for (int y = 0; y < d; ++y)
          row[static_cast<std::size_t>(y)] = spec.q(s, xs[static_cast<std::size_t>(j)], muN, a, y);
      }
      double best = std::numeric_limits<double>::infinity();
      for (int ai = 0; ai < spec.actions.size(); ++ai) {
        ActionView a = spec.actions.at(ai);
        auto& row_i = rows[static_cast<std::size_t>(i)];
        row_i.resize(static_cast<std::size_t>(d));
        for (int y = 0; y < d; ++y)
          row_i[static_cast<std::size_t>(y)] = spec.q(s, xs[static_cast<std::size_t>(i)], muN, a, y);
        // expectation over the product of rows
        double exp_next = 0.0;
        std::vector<int> ys(static_cast<std::size_t>(N), 0);
        while (true) {
          double p = 1.0;
          for (int j = 0; j < N; ++j)
            p *= rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(ys[static_cast<std::size_t>(j)])];
          exp_next += p * W[detail::encode_config(ys, d)];
          int j = 0;
          while (j < N && ++ys[static_cast<std::size_t>(j)] == d) {
            ys[static_cast<std::size_t>(j)] = 0;
            ++j;
          }
          if (j == N) break;
        }
        best = std::min(best, spec.F(s, xs[static_cast<std::size_t>(i)], muN, a) + exp_next);
      }
      Wn[code] = best;
    }
    std::swap(W, Wn);
  }
  out.lower = W[detail::encode_config(cfg.start, d)];
  return out;
}

// All grid controls on [t, T) wrapped as deviation candidates.
inline std::vector<MuControl> grid_deviation_family(const GameSpec& spec, int t,
                                                    std::size_t size_guard = 100'000) {
  StateControlEnum en(spec, t, -1, size_guard);
  std::vector<MuControl> fam;
  fam.reserve(en.count());
  for (std::size_t id = 0; id < en.count(); ++id)
    fam.push_back(MuControl::frozen(en.control(id)));
  return fam;
}

struct HomoEqReport {
  std::vector<double> gaps;        // per player, J_i - upper bracket
  std::vector<double> lower_gaps;  // per player, J_i - lower bracket
  bool verdict = false;            // all gaps <= eps (family-certified)
  double max_gap() const { return *std::max_element(gaps.begin(), gaps.end()); }
};

inline HomoEqReport homo_eq_check(const GameSpec& spec, int t, const NConfig& cfg,
                                  const MuControl& alpha, double eps,
                                  std::span<const MuControl> family) {
  cfg.check(spec.d());
  auto J = nplayer_cost_exact_all(spec, t, cfg, alpha);
  HomoEqReport rep;
  for (int i = 0; i < cfg.N(); ++i) {
    BestResponseBracket br = best_response_value(spec, t, cfg, alpha, i, family);
    rep.gaps.push_back(J[static_cast<std::size_t>(i)] - br.upper);
    rep.lower_gaps.push_back(J[static_cast<std::size_t>(i)] - br.lower);
  }
  rep.verdict = rep.max_gap() <= eps;
  return rep;
}

// Homogeneous N-player set value over the grid family; generators are the
// state-indexed reductions J^N(t, ., mu^N, a*).
inline SetValueApprox nplayer_set_value(const GameSpec& spec, int t, const NConfig& cfg,
                                        double eps, const SetValueOptions& opt = {}) {
  cfg.check(spec.d());
  const int d = spec.d();
  StateControlEnum en(spec, t, -1, opt.size_guard);
  auto family = grid_deviation_family(spec, t, opt.size_guard);
  SetValueApprox sv;
  sv.epsilon = eps;
  sv.t = t;
  sv.family = "nplayer-homogeneous-grid";
  const double threshold = std::max(eps, opt.tol_exact);
  // representative player per state
  std::vector<int> rep_player(static_cast<std::size_t>(d), -1);
  for (int j = 0; j < cfg.N(); ++j)
    if (rep_player[static_cast<std::size_t>(cfg.start[static_cast<std::size_t>(j)])] < 0)
      rep_player[static_cast<std::size_t>(cfg.start[static_cast<std::size_t>(j)])] = j;
  for (std::size_t id = 0; id < en.count(); ++id) {
    MuControl alpha = MuControl::frozen(en.control(id));
    auto J = nplayer_cost_exact_all(spec, t, cfg, alpha);
    double worst = 0.0;
    for (int j = 0; j < cfg.N(); ++j) {
      BestResponseBracket br = best_response_value(spec, t, cfg, alpha, j, family);
      worst = std::max(worst, J[static_cast<std::size_t>(j)] - br.upper);
      if (worst > threshold) break;
    }
    if (worst > threshold) continue;
    std::vector<double> gen(static_cast<std::size_t>(d));
    for (int x = 0; x < d; ++x)
      gen[static_cast<std::size_t>(x)] =
          J[static_cast<std::size_t>(rep_player[static_cast<std::size_t>(x)])];
    sv.add_dedup({std::move(gen), "alpha#" + std::to_string(id), worst});
  }
  return sv;
}

// ---- Convergence experiments ------------------------------------------------

struct MeasureConvergenceRow {
  int N = 0;
  int s = 0;
  double estimate = 0.0;  // E[W1(mu^N_s, mu^alpha_s)]
  double ci = 0.0;
  double theta_init = 0.0;  // mean W1(mu^N_{vec x}, mu)
};

struct MeasureConvergenceTable {
  std::vector<MeasureConvergenceRow> rows;
  std::vector<int> N_list;
  std::vector<double> max_over_s;  // per N
  double slope = 0.0;              // log-log fit over the largest <= 4 N
  double r2 = 0.0;
};

namespace detail {

// i.i.d. initial configuration from mu, keyed off (seed, N, rep, player).
inline std::vector<int> sample_start(const SimplexMeasure& mu, int N, const CounterRng& rng,
                                     std::uint64_t rep) {
  std::vector<int> xs(static_cast<std::size_t>(N));
  for (int j = 0; j < N; ++j) {
    double u = rng.uniform(static_cast<std::uint64_t>(N), rep, static_cast<std::uint64_t>(j),
                           1'000'000);
    double acc = 0.0;
    int pick = mu.dim() - 1;
    for (int x = 0; x < mu.dim(); ++x) {
      acc += mu[x];
      if (u < acc) {
        pick = x;
        break;
      }
    }
    xs[static_cast<std::size_t>(j)] = pick;
  }
  return xs;
}

}  // namespace detail

// Monte Carlo estimates of E[W1(mu^N_s, mu^alpha_s)] with i.i.d.-from-mu
// starts, optionally with one deviating player.
inline MeasureConvergenceTable convergence_measures(
    const GameSpec& spec, int t, const SimplexMeasure& mu, const MuControl& alpha,
    std::span<const int> N_list, int samples, std::uint64_t seed,
    const MuControl* deviator = nullptr, unsigned threads = 0) {
  FlowRecord flow = measure_flow(spec, t, mu, alpha);
  MeasureConvergenceTable table;
  CounterRng rng(seed);
  const int steps = spec.T() - t;
  for (int N : N_list) {
    table.N_list.push_back(N);
    std::vector<std::vector<double>> w1s(static_cast<std::size_t>(steps) + 1,
                                         std::vector<double>(static_cast<std::size_t>(samples)));
    std::vector<double> init_w1(static_cast<std::size_t>(samples));
    parallel_for(
        static_cast<std::size_t>(samples),
        [&](std::size_t rep) {
          auto start = detail::sample_start(mu, N, rng, rep);
          init_w1[rep] = w1_finite(empirical_measure(start, spec.d()), mu);
          std::vector<std::vector<int>> states;
          detail::simulate_replication(spec, t, start, alpha, deviator, deviator ? 0 : -1, rng,
                                       rep, states);
          for (int k = 0; k <= steps; ++k)
            w1s[static_cast<std::size_t>(k)][rep] =
                w1_finite(empirical_measure(states[static_cast<std::size_t>(k)], spec.d()),
                          flow.at(t + k));
        },
        threads);
    double theta0 = pairwise_sum(init_w1) / samples;
    double worst = 0.0;
    for (int k = 0; k <= steps; ++k) {
      McEstimate e = detail::summarize(w1s[static_cast<std::size_t>(k)]);
      table.rows.push_back({N, t + k, e.mean, e.half_ci, theta0});
      worst = std::max(worst, e.mean);
    }
    table.max_over_s.push_back(worst);
  }
  fit_loglog(table.N_list, table.max_over_s, 4, table.slope, table.r2);
  return table;
}

struct ValueConvergenceRow {
  int N = 0;
  double cost_gap = 0.0;     // max_x |J_i - J|
  double cost_gap_ci = 0.0;
  double value_gap = 0.0;    // max_x |v^{N,L}_i(upper) - v|
};

// Per-N distance between N-player costs/values and their mean field limits.
// Exact joint laws below the cap, Monte Carlo above it.
inline std::vector<ValueConvergenceRow> convergence_values(
    const GameSpec& spec, int t, const SimplexMeasure& mu, const MuControl& alpha,
    std::span<const int> N_list, int samples, std::uint64_t seed,
    std::span<const MuControl> family, unsigned threads = 0) {
  PureStateControl frozen = freeze_mu_dependence(spec, t, mu, alpha);
  FlowRecord flow = measure_flow(spec, t, mu, alpha);
  ValueTable vt = value_v(spec, flow, t);
  std::vector<double> Jmfg(static_cast<std::size_t>(spec.d()));
  for (int x = 0; x < spec.d(); ++x) Jmfg[static_cast<std::size_t>(x)] = cost_J(spec, flow, t, x, frozen);

  std::vector<ValueConvergenceRow> rows;
  CounterRng rng(seed);
  for (int N : N_list) {
    // a deterministic full-support start sampled from mu
    std::vector<int> start;
    for (std::uint64_t rep = 0;; ++rep) {
      start = detail::sample_start(mu, N, rng, 10'000'000 + rep);
      if (empirical_measure(start, spec.d()).full_support()) break;
    }
    NConfig cfg;
    cfg.start = start;
    cfg.seed = seed;
    cfg.samples = samples;
    ValueConvergenceRow row;
    row.N = N;
    // the quadratic per-step sweep caps exact mode well below the law cap
    const bool exact = detail::pow_sz(spec.d(), N) <= 2048;
    for (int x = 0; x < spec.d(); ++x) {
      int i = -1;
      for (int j = 0; j < N; ++j)
        if (start[static_cast<std::size_t>(j)] == x) {
          i = j;
          break;
        }
      double Ji, Ji_ci = 0.0;
      if (exact) {
        Ji = nplayer_cost_exact(spec, t, cfg, alpha, i);
      } else {
        McEstimate e = nplayer_cost_mc(spec, t, cfg, alpha, i, nullptr, -1, threads);
        Ji = e.mean;
        Ji_ci = e.half_ci;
      }
      row.cost_gap = std::max(row.cost_gap, std::abs(Ji - Jmfg[static_cast<std::size_t>(x)]));
      row.cost_gap_ci = std::max(row.cost_gap_ci, Ji_ci);
      double vn;
      if (exact) {
        vn = best_response_value(spec, t, cfg, alpha, i, family).upper;
      } else {
        vn = std::numeric_limits<double>::infinity();
        for (const auto& dev : family) {
          McEstimate e = nplayer_cost_mc(spec, t, cfg, alpha, i, &dev, i, threads);
          vn = std::min(vn, e.mean);
        }
      }
      row.value_gap = std::max(row.value_gap, std::abs(vn - vt.at(t, x)));
    }
    rows.push_back(row);
  }
  return rows;
}

struct AveragedGapRow {
  int N = 0;
  double averaged_gap = 0.0;  // (1/N) sum_i [J_i - v^{N,0}_i upper]
  double ci = 0.0;
};

// Averaged equilibrium gap of a fixed control across N, Monte Carlo with a
// supplied deviation family (family-certified upper bracket).
inline std::vector<AveragedGapRow> averaged_gap_curve(
    const GameSpec& spec, int t, const SimplexMeasure& mu, const MuControl& alpha,
    std::span<const int> N_list, int samples, std::uint64_t seed,
    std::span<const MuControl> family, unsigned threads = 0) {
  std::vector<AveragedGapRow> rows;
  CounterRng rng(seed);
  for (int N : N_list) {
    std::vector<int> start;
    for (std::uint64_t rep = 0;; ++rep) {
      start = detail::sample_start(mu, N, rng, 20'000'000 + rep);
      if (empirical_measure(start, spec.d()).full_support()) break;
    }
    NConfig cfg;
    cfg.start = start;
    cfg.seed = seed;
    cfg.samples = samples;
    SimplexMeasure muN = empirical_measure(start, spec.d());
    // per-state representative players; the homogeneous game's gaps depend on
    // the player only through its state
    AveragedGapRow row;
    row.N = N;
    for (int x = 0; x < spec.d(); ++x) {
      int i = -1;
      for (int j = 0; j < N; ++j)
        if (start[static_cast<std::size_t>(j)] == x) {
          i = j;
          break;
        }
      McEstimate Ji = nplayer_cost_mc(spec, t, cfg, alpha, i, nullptr, -1, threads);
      double best = std::numeric_limits<double>::infinity();
      double best_ci = 0.0;
      for (const auto& dev : family) {
        McEstimate e = nplayer_cost_mc(spec, t, cfg, alpha, i, &dev, i, threads);
        if (e.mean < best) {
          best = e.mean;
          best_ci = e.half_ci;
        }
      }
      row.averaged_gap += muN[x] * (Ji.mean - best);
      row.ci += muN[x] * (Ji.half_ci + best_ci);
    }
    rows.push_back(row);
  }
  return rows;
}

struct SetValueConvergenceRow {
  std::size_t generator = 0;
  int first_passing_N = -1;  // smallest N with gap <= eps and distance <= eps
  bool stays_below = false;  // passes for every larger tested N
  std::vector<double> gaps;       // per N: max over states of the player gap
  std::vector<double> distances;  // per N: sup distance of J^N to the generator
};

// Right inclusion of the set-value convergence at finite scale: each MFG
// eps/2-generator, with its witnessing control, should enter the N-player
// eps set value once N is large enough and stay there.
inline std::vector<SetValueConvergenceRow> set_value_convergence(
    const GameSpec& spec, int t, const SimplexMeasure& mu, double eps,
    std::span<const int> N_list, int samples, std::uint64_t seed,
    const SetValueOptions& opt = {}, unsigned threads = 0) {
  SetValueResult mfg = set_value_eps(spec, t, mu, eps / 2.0, opt);
  StateControlEnum en(spec, t, -1, opt.size_guard);
  std::vector<SetValueConvergenceRow> rows;
  CounterRng rng(seed);
  auto family = grid_deviation_family(spec, t, opt.size_guard);
  for (std::size_t gi = 0; gi < mfg.costs.generators.size(); ++gi) {
    const auto& gen = mfg.costs.generators[gi];
    // recover the witnessing control from its provenance id
    std::size_t id = std::stoull(gen.provenance.substr(gen.provenance.find('#') + 1));
    MuControl alpha = MuControl::frozen(en.control(id));
    SetValueConvergenceRow row;
    row.generator = gi;
    bool all_later = true;
    for (std::size_t ni = 0; ni < N_list.size(); ++ni) {
      int N = N_list[ni];
      std::vector<int> start;
      for (std::uint64_t rep = 0;; ++rep) {
        start = detail::sample_start(mu, N, rng, 30'000'000 + rep);
        if (empirical_measure(start, spec.d()).full_support()) break;
      }
      NConfig cfg;
      cfg.start = start;
      cfg.seed = seed;
      cfg.samples = samples;
      double worst_gap = 0.0, worst_dist = 0.0;
      const bool exact = detail::pow_sz(spec.d(), N) <= 4096;
      for (int x = 0; x < spec.d(); ++x) {
        int i = -1;
        for (int j = 0; j < N; ++j)
          if (start[static_cast<std::size_t>(j)] == x) {
            i = j;
            break;
          }
        double Ji, vn;
        if (exact) {
          Ji = nplayer_cost_exact(spec, t, cfg, alpha, i);
          vn = best_response_value(spec, t, cfg, alpha, i, family).upper;
        } else {
          Ji = nplayer_cost_mc(spec, t, cfg, alpha, i, nullptr, -1, threads).mean;
          vn = std::numeric_limits<double>::infinity();
          for (const auto& dev : family)
            vn = std::min(vn, nplayer_cost_mc(spec, t, cfg, alpha, i, &dev, i, threads).mean);
        }
        worst_gap = std::max(worst_gap, Ji - vn);
        worst_dist = std::max(worst_dist, std::abs(Ji - gen.values[static_cast<std::size_t>(x)]));
      }
      row.gaps.push_back(worst_gap);
      row.distances.push_back(worst_dist);
      bool pass = worst_gap <= eps && worst_dist <= eps;
      if (pass && row.first_passing_N < 0) row.first_passing_N = N;
      if (row.first_passing_N >= 0 && !pass) all_later = false;
    }
    row.stays_below = row.first_passing_N >= 0 && all_later;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mfg
