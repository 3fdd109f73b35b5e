#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfg/common.hpp"
#include "mfg/rng.hpp"

namespace mfg {

using Action = std::vector<double>;
using ActionView = std::span<const double>;
using PathView = std::span<const int>;  // states (x_0, ..., x_s)

struct StateSpace {
  int d = 0;
  std::vector<std::string> labels;

  static StateSpace of_size(int d) {
    StateSpace s;
    s.d = d;
    for (int i = 0; i < d; ++i) s.labels.push_back("s" + std::to_string(i));
    return s;
  }

  void check() const {
    if (d < 1) throw ValidationError("state space must have d >= 1");
    if (static_cast<int>(labels.size()) != d)
      throw ValidationError("state labels must match d");
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        if (labels[i] == labels[j]) throw ValidationError("duplicate state label");
  }
};

struct TimeGrid {
  int T = 0;  // horizon; times run over {0, ..., T}

  void check() const {
    if (T < 1) throw ValidationError("horizon must satisfy T >= 1");
  }
};

// Finite action grid A_h inside a box (or given explicitly). Optimization and
// equilibrium enumeration run over the grid; box bounds are kept so clipped
// measure-dependent controls stay inside the admissible set.
struct ActionSet {
  enum class Kind { box, explicit_grid };
  Kind kind = Kind::explicit_grid;
  Action lower, upper;          // box bounds, per coordinate (kind == box)
  std::vector<Action> grid;     // A_h

  static ActionSet box_1d(double lo, double hi, int n_grid) {
    if (n_grid < 1) throw ValidationError("action grid needs >= 1 point");
    ActionSet a;
    a.kind = Kind::box;
    a.lower = {lo};
    a.upper = {hi};
    for (int i = 0; i < n_grid; ++i) {
      double t = n_grid == 1 ? 0.0 : static_cast<double>(i) / (n_grid - 1);
      a.grid.push_back({lo + t * (hi - lo)});
    }
    a.check();
    return a;
  }

  static ActionSet explicit_1d(std::vector<double> points) {
    ActionSet a;
    a.kind = Kind::explicit_grid;
    for (double p : points) a.grid.push_back({p});
    a.check();
    return a;
  }

  int size() const { return static_cast<int>(grid.size()); }
  int dim() const { return grid.empty() ? 0 : static_cast<int>(grid[0].size()); }
  ActionView at(int i) const { return grid[static_cast<std::size_t>(i)]; }

  Action clip(ActionView a) const {
    if (kind != Kind::box)
      throw ValidationError("clip requires a box action set");
    Action out(a.begin(), a.end());
    for (std::size_t k = 0; k < out.size(); ++k)
      out[k] = std::clamp(out[k], lower[k], upper[k]);
    return out;
  }

  std::optional<int> find(ActionView a, double tol = kMassTol) const {
    for (int i = 0; i < size(); ++i) {
      ActionView g = at(i);
      if (g.size() != a.size()) continue;
      double dist = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) dist = std::max(dist, std::abs(g[k] - a[k]));
      if (dist <= tol) return i;
    }
    return std::nullopt;
  }

  void check() const {
    if (grid.empty()) throw ValidationError("action grid must be nonempty");
    const std::size_t d0 = grid[0].size();
    if (d0 == 0) throw ValidationError("actions need >= 1 coordinate");
    for (const auto& g : grid)
      if (g.size() != d0) throw ValidationError("ragged action grid");
    if (kind == Kind::box) {
      if (lower.size() != d0 || upper.size() != d0)
        throw ValidationError("box bounds must match action dimension");
      for (std::size_t k = 0; k < d0; ++k)
        if (lower[k] > upper[k]) throw ValidationError("empty action box");
      for (const auto& g : grid)
        for (std::size_t k = 0; k < d0; ++k)
          if (g[k] < lower[k] - kMassTol || g[k] > upper[k] + kMassTol)
            throw ValidationError("grid point outside action box");
    }
  }
};

// Probability vector on S. Mass residuals below kMassTol are renormalized,
// anything larger is rejected.
class SimplexMeasure {
 public:
  SimplexMeasure() = default;

  explicit SimplexMeasure(std::vector<double> w) : w_(std::move(w)) {
    double s = pairwise_sum(w_);
    if (std::abs(s - 1.0) > kMassTol)
      throw ValidationError("measure mass " + std::to_string(s) + " != 1");
    for (double& x : w_) {
      if (x < -kMassTol) throw ValidationError("negative measure weight");
      if (x < 0.0) x = 0.0;
    }
    if (s != 1.0)
      for (double& x : w_) x /= s;
  }

  static SimplexMeasure uniform(int d) {
    return SimplexMeasure(std::vector<double>(d, 1.0 / d));
  }
  static SimplexMeasure dirac(int d, int x) {
    std::vector<double> w(d, 0.0);
    w.at(static_cast<std::size_t>(x)) = 1.0;
    return SimplexMeasure(std::move(w));
  }

  int dim() const { return static_cast<int>(w_.size()); }
  double operator[](int i) const { return w_[static_cast<std::size_t>(i)]; }
  std::span<const double> weights() const { return w_; }

  bool full_support() const {
    for (double x : w_)
      if (x <= 0.0) return false;
    return true;
  }
  double min_weight() const { return *std::min_element(w_.begin(), w_.end()); }

 private:
  std::vector<double> w_;
};

// Enumeration of X_t, all paths (x_0, ..., x_t) recorded from time 0 and
// stopped at t. Path ids are base-d integers with x_0 the least significant
// digit, so restriction to an earlier time is a modulus and extension by one
// state is an addition.
struct PathSpace {
  int d = 0;
  int t = 0;

  // generous guard against runaway d^(t+1) enumerations
  static constexpr std::size_t kMaxPaths = std::size_t(1) << 24;

  std::size_t size() const {
    std::size_t n = 1;
    for (int s = 0; s <= t; ++s) {
      n *= static_cast<std::size_t>(d);
      if (n > kMaxPaths)
        throw SizeGuardExceeded("path space at time " + std::to_string(t) + " needs " +
                                std::to_string(d) + "^" + std::to_string(t + 1) + " ids");
    }
    return n;
  }

  std::size_t pow_d(int k) const {
    std::size_t n = 1;
    for (int s = 0; s < k; ++s) n *= static_cast<std::size_t>(d);
    return n;
  }

  int state_at(std::size_t id, int s) const {
    return static_cast<int>((id / pow_d(s)) % static_cast<std::size_t>(d));
  }
  // id of the path stopped at time s <= t
  std::size_t restrict_to(std::size_t id, int s) const { return id % pow_d(s + 1); }
  // id in X_{t+1} of this path extended by state y
  std::size_t extend(std::size_t id, int y) const {
    return id + static_cast<std::size_t>(y) * pow_d(t + 1);
  }

  std::vector<int> states(std::size_t id) const {
    std::vector<int> xs(static_cast<std::size_t>(t) + 1);
    for (int s = 0; s <= t; ++s) xs[static_cast<std::size_t>(s)] = state_at(id, s);
    return xs;
  }

  std::size_t id_of(PathView states_) const {
    if (static_cast<int>(states_.size()) != t + 1)
      throw DimensionMismatch("path length must be t+1");
    std::size_t id = 0;
    for (int s = t; s >= 0; --s)
      id = id * static_cast<std::size_t>(d) + static_cast<std::size_t>(states_[static_cast<std::size_t>(s)]);
    return id;
  }
};

class PathMeasure {
 public:
  PathMeasure() = default;
  PathMeasure(PathSpace space, std::vector<double> w) : space_(space), w_(std::move(w)) {
    if (w_.size() != space_.size())
      throw DimensionMismatch("path measure length must equal |X_t|");
    double s = pairwise_sum(w_);
    if (std::abs(s - 1.0) > kMassTol)
      throw ValidationError("path measure mass != 1");
    for (double& x : w_) {
      if (x < -kMassTol) throw ValidationError("negative path weight");
      if (x < 0.0) x = 0.0;
    }
    if (s != 1.0)
      for (double& x : w_) x /= s;
  }

  static PathMeasure uniform(PathSpace space) {
    return PathMeasure(space, std::vector<double>(space.size(), 1.0 / space.size()));
  }

  // Lift of an initial state law to X_0.
  static PathMeasure from_state_measure(const SimplexMeasure& mu) {
    PathSpace sp{mu.dim(), 0};
    return PathMeasure(sp, std::vector<double>(mu.weights().begin(), mu.weights().end()));
  }

  const PathSpace& space() const { return space_; }
  int t() const { return space_.t; }
  double operator[](std::size_t id) const { return w_[id]; }
  std::span<const double> weights() const { return w_; }

  bool full_support() const {
    for (double x : w_)
      if (x <= 0.0) return false;
    return true;
  }
  double min_weight() const { return *std::min_element(w_.begin(), w_.end()); }

  // Marginal law of the time-s coordinate, s <= t.
  SimplexMeasure state_marginal(int s) const {
    std::vector<double> m(static_cast<std::size_t>(space_.d), 0.0);
    for (std::size_t id = 0; id < w_.size(); ++id)
      m[static_cast<std::size_t>(space_.state_at(id, s))] += w_[id];
    return SimplexMeasure(std::move(m));
  }
  SimplexMeasure terminal_marginal() const { return state_marginal(space_.t); }

  // Law of the path stopped at s <= t.
  PathMeasure stopped_at(int s) const {
    PathSpace sub{space_.d, s};
    std::vector<double> m(sub.size(), 0.0);
    for (std::size_t id = 0; id < w_.size(); ++id)
      m[space_.restrict_to(id, s)] += w_[id];
    return PathMeasure(sub, std::move(m));
  }

 private:
  PathSpace space_;
  std::vector<double> w_;
};

// W1 on a finite space: the total-variation style sum of absolute differences.
inline double w1_finite(std::span<const double> mu, std::span<const double> nu) {
  if (mu.size() != nu.size())
    throw DimensionMismatch("w1_finite: measures on different index sets");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(mu[i] - nu[i]);
  return s;
}
inline double w1_finite(const SimplexMeasure& mu, const SimplexMeasure& nu) {
  return w1_finite(mu.weights(), nu.weights());
}
inline double w1_finite(const PathMeasure& mu, const PathMeasure& nu) {
  if (mu.t() != nu.t())
    throw DimensionMismatch("w1_finite: path measures at different times");
  return w1_finite(mu.weights(), nu.weights());
}

inline SimplexMeasure empirical_measure(std::span<const int> xs, int d) {
  if (xs.empty()) throw ValidationError("empirical measure of empty sample");
  std::vector<double> w(static_cast<std::size_t>(d), 0.0);
  for (int x : xs) w.at(static_cast<std::size_t>(x)) += 1.0;
  for (double& v : w) v /= static_cast<double>(xs.size());
  return SimplexMeasure(std::move(w));
}

inline PathMeasure empirical_path_measure(std::span<const std::size_t> ids, PathSpace space) {
  if (ids.empty()) throw ValidationError("empirical measure of empty sample");
  std::vector<double> w(space.size(), 0.0);
  for (std::size_t id : ids) w.at(id) += 1.0;
  for (double& v : w) v /= static_cast<double>(ids.size());
  return PathMeasure(space, std::move(w));
}

// A finite MFG instance: (T, S, A, q, F, G) plus the certified bounds of the
// standing assumptions. State-dependent data is always usable; path-dependent
// instances additionally carry adapted path-indexed coefficients.
struct GameSpec {
  std::string name = "spec";
  StateSpace states;
  TimeGrid time;
  ActionSet actions;
  bool path_dependent = false;
  double c_q = 0.0;  // certified lower bound on q
  double C0 = 0.0;   // bound on |F|, |G|

  using QFn = std::function<double(int s, int x, const SimplexMeasure&, ActionView, int y)>;
  using FFn = std::function<double(int s, int x, const SimplexMeasure&, ActionView)>;
  using GFn = std::function<double(int x, const SimplexMeasure&)>;
  QFn q;
  FFn F;
  GFn G;

  using QPathFn =
      std::function<double(int s, PathView, const PathMeasure&, ActionView, int y)>;
  using FPathFn = std::function<double(int s, PathView, const PathMeasure&, ActionView)>;
  using GPathFn = std::function<double(PathView, const PathMeasure&)>;
  QPathFn q_path;
  FPathFn F_path;
  GPathFn G_path;

  int d() const { return states.d; }
  int T() const { return time.T; }

  // Adapted path-indexed views; state-dependent coefficients read the path's
  // current state and the current state marginal.
  double qp(int s, PathView xs, const PathMeasure& pm, ActionView a, int y) const {
    if (q_path) return q_path(s, xs, pm, a, y);
    return q(s, xs.back(), pm.terminal_marginal(), a, y);
  }
  double Fp(int s, PathView xs, const PathMeasure& pm, ActionView a) const {
    if (F_path) return F_path(s, xs, pm, a);
    return F(s, xs.back(), pm.terminal_marginal(), a);
  }
  double Gp(PathView xs, const PathMeasure& pm) const {
    if (G_path) return G_path(xs, pm);
    return G(xs.back(), pm.terminal_marginal());
  }

  double cost_bound() const { return C0 * (time.T + 1); }
};

struct ValidationIssue {
  std::string what;
};

struct ValidationReport {
  bool accepted = true;
  double max_row_residual = 0.0;  // worst |sum_y q - 1|
  double min_q = 1.0;
  double max_abs_F = 0.0;
  double max_abs_G = 0.0;
  // worst observed |F(mu) - F(nu)| / W1(mu, nu) over probe pairs (same for
  // G); an empirical stand-in for the continuity modulus, which cannot be
  // certified symbolically for black-box coefficients.
  double empirical_modulus = 0.0;
  std::vector<ValidationIssue> issues;

  void fail(std::string what) {
    accepted = false;
    issues.push_back({std::move(what)});
  }
};

namespace detail {

inline std::vector<SimplexMeasure> probe_measures(int d, int count, std::uint64_t seed) {
  std::vector<SimplexMeasure> out;
  out.push_back(SimplexMeasure::uniform(d));
  CounterRng rng(seed);
  for (int k = 0; k < count; ++k) {
    std::vector<double> w(static_cast<std::size_t>(d));
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      w[static_cast<std::size_t>(i)] =
          0.05 + rng.uniform(static_cast<std::uint64_t>(k), 0, static_cast<std::uint64_t>(i), 7);
      s += w[static_cast<std::size_t>(i)];
    }
    for (double& x : w) x /= s;
    out.emplace_back(std::move(w));
  }
  return out;
}

inline std::vector<PathMeasure> probe_path_measures(PathSpace sp, int count, std::uint64_t seed) {
  std::vector<PathMeasure> out;
  out.push_back(PathMeasure::uniform(sp));
  CounterRng rng(seed);
  for (int k = 0; k < count; ++k) {
    std::vector<double> w(sp.size());
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = 0.05 + rng.uniform(static_cast<std::uint64_t>(k), 1, i, static_cast<std::uint64_t>(sp.t));
      s += w[i];
    }
    for (double& x : w) x /= s;
    out.emplace_back(sp, std::move(w));
  }
  return out;
}

}  // namespace detail

// Checks the standing assumptions on a grid of probe measures: kernel rows sum
// to one, q stays above the declared c_q, and |F|, |G| stay below C0. Never
// throws; failures are returned in the report.
inline ValidationReport validate_game_spec(const GameSpec& spec, int probes = 4,
                                           std::uint64_t seed = 12345) {
  ValidationReport rep;
  try {
    spec.states.check();
    spec.time.check();
    spec.actions.check();
  } catch (const Error& e) {
    rep.fail(e.what());
    return rep;
  }
  if (spec.c_q <= 0.0) rep.fail("certified bound c_q must be positive");

  const int d = spec.d();
  const int T = spec.T();
  auto note_row = [&](double row_sum, double row_min, const std::string& where) {
    double resid = std::abs(row_sum - 1.0);
    rep.max_row_residual = std::max(rep.max_row_residual, resid);
    rep.min_q = std::min(rep.min_q, row_min);
    if (resid > kMassTol)
      rep.fail("kernel row sum " + std::to_string(row_sum) + " at " + where);
    if (row_min <= 0.0) rep.fail("kernel entry <= 0 at " + where);
    else if (row_min < spec.c_q - kMassTol)
      rep.fail("kernel entry " + std::to_string(row_min) + " below c_q at " + where);
  };

  if (!spec.path_dependent) {
    if (!spec.q || !spec.F || !spec.G) {
      rep.fail("missing q/F/G");
      return rep;
    }
    auto mus = detail::probe_measures(d, probes, seed);
    for (const auto& mu : mus) {
      for (int s = 0; s < T; ++s)
        for (int x = 0; x < d; ++x)
          for (int ai = 0; ai < spec.actions.size(); ++ai) {
            double row_sum = 0.0, row_min = 1.0;
            for (int y = 0; y < d; ++y) {
              double v = spec.q(s, x, mu, spec.actions.at(ai), y);
              row_sum += v;
              row_min = std::min(row_min, v);
            }
            note_row(row_sum, row_min,
                     "(s=" + std::to_string(s) + ",x=" + std::to_string(x) +
                         ",a=" + std::to_string(ai) + ")");
            rep.max_abs_F =
                std::max(rep.max_abs_F, std::abs(spec.F(s, x, mu, spec.actions.at(ai))));
          }
      for (int x = 0; x < d; ++x)
        rep.max_abs_G = std::max(rep.max_abs_G, std::abs(spec.G(x, mu)));
    }
    for (std::size_t i = 0; i < mus.size(); ++i)
      for (std::size_t k = i + 1; k < mus.size(); ++k) {
        double dist = w1_finite(mus[i], mus[k]);
        if (dist <= 0.0) continue;
        for (int x = 0; x < d; ++x) {
          rep.empirical_modulus = std::max(
              rep.empirical_modulus, std::abs(spec.G(x, mus[i]) - spec.G(x, mus[k])) / dist);
          for (int s = 0; s < T; ++s)
            for (int ai = 0; ai < spec.actions.size(); ++ai)
              rep.empirical_modulus =
                  std::max(rep.empirical_modulus,
                           std::abs(spec.F(s, x, mus[i], spec.actions.at(ai)) -
                                    spec.F(s, x, mus[k], spec.actions.at(ai))) /
                               dist);
        }
      }
  } else {
    for (int s = 0; s < T; ++s) {
      PathSpace sp{d, s};
      auto pms = detail::probe_path_measures(sp, probes, seed);
      for (const auto& pm : pms) {
        for (std::size_t id = 0; id < sp.size(); ++id) {
          auto xs = sp.states(id);
          for (int ai = 0; ai < spec.actions.size(); ++ai) {
            double row_sum = 0.0, row_min = 1.0;
            for (int y = 0; y < d; ++y) {
              double v = spec.qp(s, xs, pm, spec.actions.at(ai), y);
              row_sum += v;
              row_min = std::min(row_min, v);
            }
            note_row(row_sum, row_min,
                     "(s=" + std::to_string(s) + ",path=" + std::to_string(id) + ")");
            rep.max_abs_F =
                std::max(rep.max_abs_F, std::abs(spec.Fp(s, xs, pm, spec.actions.at(ai))));
          }
        }
      }
    }
    PathSpace spT{d, T};
    auto pms = detail::probe_path_measures(spT, probes, seed);
    for (const auto& pm : pms)
      for (std::size_t id = 0; id < spT.size(); ++id) {
        auto xs = spT.states(id);
        rep.max_abs_G = std::max(rep.max_abs_G, std::abs(spec.Gp(xs, pm)));
      }
  }

  if (rep.max_abs_F > spec.C0 + kMassTol)
    rep.fail("max |F| exceeds declared C0");
  if (rep.max_abs_G > spec.C0 + kMassTol)
    rep.fail("max |G| exceeds declared C0");
  return rep;
}

}  // namespace mfg
