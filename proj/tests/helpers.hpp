#pragma once

#include <memory>
#include <random>
#include <vector>

#include "mfg/core.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/path_dynamics.hpp"

namespace testutil {

using namespace mfg;

inline SimplexMeasure random_interior_measure(std::mt19937& g, int d, double floor = 0.05) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  std::vector<double> w(static_cast<std::size_t>(d));
  double s = 0.0;
  for (auto& x : w) {
    x = u(g);
    s += x;
  }
  for (auto& x : w) x /= s;
  return SimplexMeasure(std::move(w));
}

// Random state dependent spec from dense tables, optionally with an affine
// mu term in q (rows stay normalized because the term is mean-zero in y).
inline GameSpec random_state_spec(std::mt19937& g, int d, int T, int n_actions,
                                  bool mu_affine = false) {
  GameSpec spec;
  spec.name = "random-state";
  spec.states = StateSpace::of_size(d);
  spec.time.T = T;
  {
    std::vector<double> pts;
    for (int i = 0; i < n_actions; ++i)
      pts.push_back(n_actions == 1 ? 0.5 : static_cast<double>(i) / (n_actions - 1));
    spec.actions = ActionSet::explicit_1d(pts);
  }

  auto qbase = std::make_shared<std::vector<double>>();
  auto qc = std::make_shared<std::vector<double>>();
  auto ftab = std::make_shared<std::vector<double>>();
  auto gtab = std::make_shared<std::vector<double>>();
  std::uniform_real_distribution<double> u12(1.0, 2.0);
  std::uniform_real_distribution<double> u11(-1.0, 1.0);
  const int A = n_actions;
  qbase->resize(static_cast<std::size_t>(T * d * A * d));
  qc->resize(static_cast<std::size_t>(T * d * A));
  ftab->resize(static_cast<std::size_t>(T * d * A));
  gtab->resize(static_cast<std::size_t>(d));
  const double cmax = mu_affine ? 1.0 / (4.0 * d) : 0.0;
  for (int t = 0; t < T; ++t)
    for (int x = 0; x < d; ++x)
      for (int a = 0; a < A; ++a) {
        double row_sum = 0.0;
        for (int y = 0; y < d; ++y) {
          double v = u12(g);
          (*qbase)[static_cast<std::size_t>(((t * d + x) * A + a) * d + y)] = v;
          row_sum += v;
        }
        for (int y = 0; y < d; ++y)
          (*qbase)[static_cast<std::size_t>(((t * d + x) * A + a) * d + y)] /= row_sum;
        (*qc)[static_cast<std::size_t>((t * d + x) * A + a)] = mu_affine ? cmax * u11(g) : 0.0;
        (*ftab)[static_cast<std::size_t>((t * d + x) * A + a)] = u11(g);
      }
  for (int x = 0; x < d; ++x) (*gtab)[static_cast<std::size_t>(x)] = u11(g);

  const double dd = static_cast<double>(d);
  spec.q = [qbase, qc, d, A, dd](int s, int x, const SimplexMeasure& mu, ActionView a,
                                 int y) {
    // tables are indexed by the grid position encoded in a[0]
    int ai = static_cast<int>(a[0] * (A - 1) + 0.5);
    if (A == 1) ai = 0;
    double base = (*qbase)[static_cast<std::size_t>(((s * d + x) * A + ai) * d + y)];
    double c = (*qc)[static_cast<std::size_t>((s * d + x) * A + ai)];
    return base + c * (mu[y] - 1.0 / dd);
  };
  spec.F = [ftab, d, A](int s, int x, const SimplexMeasure&, ActionView a) {
    int ai = static_cast<int>(a[0] * (A - 1) + 0.5);
    if (A == 1) ai = 0;
    return (*ftab)[static_cast<std::size_t>((s * d + x) * A + ai)];
  };
  spec.G = [gtab](int x, const SimplexMeasure&) { return (*gtab)[static_cast<std::size_t>(x)]; };
  spec.c_q = 1.0 / (2.0 * d) - cmax;
  spec.C0 = 1.0;
  return spec;
}

// Random path dependent spec (tables keyed by path id).
inline GameSpec random_path_spec(std::mt19937& g, int d, int T, int n_actions) {
  GameSpec spec;
  spec.name = "random-path";
  spec.states = StateSpace::of_size(d);
  spec.time.T = T;
  {
    std::vector<double> pts;
    for (int i = 0; i < n_actions; ++i)
      pts.push_back(n_actions == 1 ? 0.5 : static_cast<double>(i) / (n_actions - 1));
    spec.actions = ActionSet::explicit_1d(pts);
  }
  spec.path_dependent = true;

  const int A = n_actions;
  auto qtab = std::make_shared<std::vector<std::vector<double>>>();  // [s][(p*A+a)*d+y]
  auto ftab = std::make_shared<std::vector<std::vector<double>>>();  // [s][p*A+a]
  auto gtab = std::make_shared<std::vector<double>>();               // [p in X_T]
  std::uniform_real_distribution<double> u12(1.0, 2.0);
  std::uniform_real_distribution<double> u11(-1.0, 1.0);
  qtab->resize(static_cast<std::size_t>(T));
  ftab->resize(static_cast<std::size_t>(T));
  for (int s = 0; s < T; ++s) {
    PathSpace sp{d, s};
    (*qtab)[static_cast<std::size_t>(s)].resize(sp.size() * static_cast<std::size_t>(A * d));
    (*ftab)[static_cast<std::size_t>(s)].resize(sp.size() * static_cast<std::size_t>(A));
    for (std::size_t p = 0; p < sp.size(); ++p)
      for (int a = 0; a < A; ++a) {
        double row = 0.0;
        for (int y = 0; y < d; ++y) {
          double v = u12(g);
          (*qtab)[static_cast<std::size_t>(s)][(p * A + static_cast<std::size_t>(a)) * d +
                                               static_cast<std::size_t>(y)] = v;
          row += v;
        }
        for (int y = 0; y < d; ++y)
          (*qtab)[static_cast<std::size_t>(s)][(p * A + static_cast<std::size_t>(a)) * d +
                                               static_cast<std::size_t>(y)] /= row;
        (*ftab)[static_cast<std::size_t>(s)][p * A + static_cast<std::size_t>(a)] = u11(g);
      }
  }
  PathSpace spT{d, T};
  gtab->resize(spT.size());
  for (auto& v : *gtab) v = u11(g);

  spec.q_path = [qtab, d, A](int s, PathView xs, const PathMeasure& pm, ActionView a, int y) {
    PathSpace sp = pm.space();
    std::size_t p = sp.id_of(xs);
    int ai = static_cast<int>(a[0] * (A - 1) + 0.5);
    if (A == 1) ai = 0;
    return (*qtab)[static_cast<std::size_t>(s)][(p * A + static_cast<std::size_t>(ai)) * d +
                                                static_cast<std::size_t>(y)];
  };
  spec.F_path = [ftab, A](int s, PathView xs, const PathMeasure& pm, ActionView a) {
    PathSpace sp = pm.space();
    std::size_t p = sp.id_of(xs);
    int ai = static_cast<int>(a[0] * (A - 1) + 0.5);
    if (A == 1) ai = 0;
    return (*ftab)[static_cast<std::size_t>(s)][p * A + static_cast<std::size_t>(ai)];
  };
  spec.G_path = [gtab](PathView xs, const PathMeasure& pm) {
    return (*gtab)[pm.space().id_of(xs)];
  };
  spec.c_q = 1.0 / (2.0 * d);
  spec.C0 = 1.0;
  return spec;
}

inline PureStateControl random_state_control(std::mt19937& g, const GameSpec& spec) {
  std::uniform_int_distribution<int> pick(0, spec.actions.size() - 1);
  PureStateControl c = PureStateControl::constant(
      spec.T(), spec.d(), Action(spec.actions.at(0).begin(), spec.actions.at(0).end()));
  for (int s = 0; s < spec.T(); ++s)
    for (int x = 0; x < spec.d(); ++x) {
      ActionView a = spec.actions.at(pick(g));
      c.slot(s, x) = Action(a.begin(), a.end());
    }
  return c;
}

inline PurePathControl random_path_control(std::mt19937& g, const GameSpec& spec) {
  std::uniform_int_distribution<int> pick(0, spec.actions.size() - 1);
  PurePathControl c = PurePathControl::constant(
      spec.T(), spec.d(), Action(spec.actions.at(0).begin(), spec.actions.at(0).end()));
  for (int s = 0; s < spec.T(); ++s) {
    PathSpace sp{spec.d(), s};
    for (std::size_t p = 0; p < sp.size(); ++p) {
      ActionView a = spec.actions.at(pick(g));
      c.slot(s, p) = Action(a.begin(), a.end());
    }
  }
  return c;
}

inline PathMeasure random_interior_path_measure(std::mt19937& g, int d, int t,
                                                double floor = 0.02) {
  PathSpace sp{d, t};
  std::uniform_real_distribution<double> u(floor, 1.0);
  std::vector<double> w(sp.size());
  double s = 0.0;
  for (auto& x : w) {
    x = u(g);
    s += x;
  }
  for (auto& x : w) x /= s;
  return PathMeasure(sp, std::move(w));
}

}  // namespace testutil
