#pragma once

#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfg/core.hpp"
#include "mfg/diffusion.hpp"
#include "mfg/setvalue.hpp"

namespace mfg {

// A loaded scenario file: a finite game or a diffusion model, plus the
// initial measure and the content hash used in experiment manifests.
struct Scenario {
  enum class Kind { discrete, diffusion };
  Kind kind = Kind::discrete;
  GameSpec game;
  DiffusionSpec diff;
  std::vector<double> mu;  // initial weights (states / X_0 / grid cells)
  std::string path;
  std::uint64_t hash = 0;
};

namespace detail {

inline void expect_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                        const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ValidationError("unknown key '" + it.key() + "' in " + where);
}

// dense state-dependent tables with an optional mean-zero affine mu term
struct StateTables {
  int d = 0, T = 0, A = 0;
  std::vector<double> q;       // [t][x][a][y]
  std::vector<double> q_mu;    // [t][x][a], multiplies (mu(y) - 1/d)
  std::vector<double> F;       // [t][x][a]
  std::vector<double> F_mu;    // [t][x][a], multiplies <w, mu>
  std::vector<double> w;       // per-state weights for the F/G mu statistic
  std::vector<double> G;       // [x]
  std::vector<double> G_mu;    // [x]
};

}  // namespace detail

// Builds the callable coefficients for dense-table scenarios. Actions are
// identified by their grid values; tables are evaluated at grid actions only
// and reject anything off the grid.
inline GameSpec game_from_tables(int d, int T, std::vector<Action> grid,
                                 std::shared_ptr<detail::StateTables> tb) {
  GameSpec spec;
  spec.states = StateSpace::of_size(d);
  spec.time.T = T;
  spec.actions.kind = ActionSet::Kind::explicit_grid;
  spec.actions.grid = std::move(grid);
  spec.actions.check();
  const int A = spec.actions.size();
  tb->d = d;
  tb->T = T;
  tb->A = A;
  ActionSet actions_copy = spec.actions;

  auto idx_of = [actions_copy](ActionView a) {
    auto idx = actions_copy.find(a, 1e-9);
    if (!idx) throw ValidationError("table scenario evaluated at an off-grid action");
    return *idx;
  };
  spec.q = [tb, idx_of, d, A](int s, int x, const SimplexMeasure& mu, ActionView a, int y) {
    int ai = idx_of(a);
    double base = tb->q[static_cast<std::size_t>(((s * d + x) * A + ai) * d + y)];
    double c = tb->q_mu.empty() ? 0.0
                                : tb->q_mu[static_cast<std::size_t>((s * d + x) * A + ai)];
    return base + c * (mu[y] - 1.0 / d);
  };
  spec.F = [tb, idx_of, d, A](int s, int x, const SimplexMeasure& mu, ActionView a) {
    int ai = idx_of(a);
    double base = tb->F[static_cast<std::size_t>((s * d + x) * A + ai)];
    if (!tb->F_mu.empty()) {
      double stat = 0.0;
      for (int i = 0; i < d; ++i) stat += tb->w[static_cast<std::size_t>(i)] * mu[i];
      base += tb->F_mu[static_cast<std::size_t>((s * d + x) * A + ai)] * stat;
    }
    return base;
  };
  spec.G = [tb, d](int x, const SimplexMeasure& mu) {
    double base = tb->G[static_cast<std::size_t>(x)];
    if (!tb->G_mu.empty()) {
      double stat = 0.0;
      for (int i = 0; i < d; ++i) stat += tb->w[static_cast<std::size_t>(i)] * mu[i];
      base += tb->G_mu[static_cast<std::size_t>(x)] * stat;
    }
    return base;
  };
  return spec;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  Scenario sc;
  sc.path = path;
  sc.hash = fnv1a64(std::span<const char>(text.data(), text.size()));

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("scenario parse error: ") + e.what());
  }

  std::string kind = j.value("kind", "discrete");
  if (kind == "diffusion") {
    sc.kind = Scenario::Kind::diffusion;
    detail::expect_keys(j,
                        {"kind", "name", "horizon", "domain", "nx", "dt", "actions", "stats",
                         "b", "f", "g", "C0", "b_bound", "L0", "mu"},
                        "diffusion scenario");
    DiffusionSpec& ds = sc.diff;
    ds.name = j.value("name", "diffusion");
    ds.T = j.at("horizon").get<double>();
    ds.x_min = j.at("domain").at(0).get<double>();
    ds.x_max = j.at("domain").at(1).get<double>();
    ds.nx = j.at("nx").get<int>();
    ds.dt = j.at("dt").get<double>();
    detail::expect_keys(j.at("actions"), {"box", "grid_count"}, "actions");
    ds.a_min = j.at("actions").at("box").at(0).get<double>();
    ds.a_max = j.at("actions").at("box").at(1).get<double>();
    ds.n_action_grid = j.at("actions").value("grid_count", 5);
    ds.C0 = j.value("C0", 1.0);
    ds.b_bound = j.value("b_bound", 1.0);
    ds.L0 = j.value("L0", 1.0);
    for (const auto& s : j.value("stats", nlohmann::json::array())) {
      std::string name = s.get<std::string>();
      if (name == "mean")
        ds.stats.push_back(DiffusionSpec::StatKind::mean);
      else if (name == "abs_mean")
        ds.stats.push_back(DiffusionSpec::StatKind::abs_mean);
      else if (name == "tanh_mean")
        ds.stats.push_back(DiffusionSpec::StatKind::tanh_mean);
      else
        throw ValidationError("unknown statistic '" + name + "'");
    }

    struct Term {
      double coef = 0.0;
      std::string factor;
      int stat = 0;
    };
    auto parse_terms = [](const nlohmann::json& arr, const std::string& where) {
      std::vector<Term> terms;
      for (const auto& t : arr) {
        detail::expect_keys(t, {"coef", "factor", "stat"}, where);
        Term term;
        term.coef = t.at("coef").get<double>();
        term.factor = t.at("factor").get<std::string>();
        term.stat = t.value("stat", 0);
        terms.push_back(term);
      }
      return terms;
    };
    auto eval = [](const std::vector<Term>& terms, double x, std::span<const double> st,
                   double a) {
      double total = 0.0;
      for (const auto& t : terms) {
        double factor;
        if (t.factor == "one")
          factor = 1.0;
        else if (t.factor == "x")
          factor = x;
        else if (t.factor == "a")
          factor = a;
        else if (t.factor == "a_sq")
          factor = a * a;
        else if (t.factor == "tanh_x")
          factor = std::tanh(x);
        else if (t.factor == "stat")
          factor = st[static_cast<std::size_t>(t.stat)];
        else if (t.factor == "abs_diff_stat")
          factor = std::abs(x - st[static_cast<std::size_t>(t.stat)]);
        else
          throw ValidationError("unknown factor '" + t.factor + "'");
        total += t.coef * factor;
      }
      return total;
    };
    auto bt = parse_terms(j.at("b"), "b");
    auto ft = parse_terms(j.at("f"), "f");
    auto gt = parse_terms(j.at("g"), "g");
    ds.b = [bt, eval](double, double x, std::span<const double> st, double a) {
      return eval(bt, x, st, a);
    };
    ds.f = [ft, eval](double, double x, std::span<const double> st, double a) {
      return eval(ft, x, st, a);
    };
    ds.g = [gt, eval](double x, std::span<const double> st) { return eval(gt, x, st, 0.0); };

    if (j.contains("mu")) {
      detail::expect_keys(j.at("mu"), {"gaussian"}, "mu");
      double mean = j.at("mu").at("gaussian").at(0).get<double>();
      double sd = j.at("mu").at("gaussian").at(1).get<double>();
      sc.mu = gaussian_mass(ds, mean, sd);
    } else {
      sc.mu = gaussian_mass(ds, 0.0, 1.0);
    }
    auto rep = validate_diffusion_spec(ds);
    if (!rep.accepted) {
      std::string msg = "diffusion scenario rejected:";
      for (const auto& i : rep.issues) msg += " " + i;
      throw ValidationError(msg);
    }
    return sc;
  }

  // discrete scenarios
  sc.kind = Scenario::Kind::discrete;
  detail::expect_keys(j,
                      {"kind", "name", "builtin", "horizon", "states", "actions", "q", "F",
                       "G", "c_q", "C0", "path_dependent", "mu"},
                      "scenario");
  if (j.contains("builtin")) {
    detail::expect_keys(j.at("builtin"), {"family", "a0", "midpoint"}, "builtin");
    std::string family = j.at("builtin").at("family").get<std::string>();
    if (family != "example71") throw ValidationError("unknown builtin family " + family);
    double a0 = j.at("builtin").value("a0", 0.25);
    bool mid = j.at("builtin").value("midpoint", false);
    sc.game = make_example71(a0, mid);
    if (j.contains("name")) sc.game.name = j.at("name").get<std::string>();
  } else {
    int T = j.at("horizon").get<int>();
    std::vector<std::string> labels = j.at("states").get<std::vector<std::string>>();
    int d = static_cast<int>(labels.size());
    detail::expect_keys(j.at("actions"), {"box", "grid"}, "actions");
    std::vector<Action> grid;
    for (const auto& a : j.at("actions").at("grid")) {
      if (a.is_number())
        grid.push_back({a.get<double>()});
      else
        grid.push_back(a.get<std::vector<double>>());
    }
    if (j.value("path_dependent", false))
      throw ValidationError("path dependent tables are built in code; scenario files carry "
                            "state dependent tables or builtins");
    auto tb = std::make_shared<detail::StateTables>();
    detail::expect_keys(j.at("q"), {"table", "mu_coef"}, "q");
    detail::expect_keys(j.at("F"), {"table", "mu_coef", "mu_weights"}, "F");
    detail::expect_keys(j.at("G"), {"table", "mu_coef", "mu_weights"}, "G");
    const int A = static_cast<int>(grid.size());
    auto& jq = j.at("q").at("table");
    tb->q.resize(static_cast<std::size_t>(T * d * A * d));
    for (int s = 0; s < T; ++s)
      for (int x = 0; x < d; ++x)
        for (int a = 0; a < A; ++a)
          for (int y = 0; y < d; ++y)
            tb->q[static_cast<std::size_t>(((s * d + x) * A + a) * d + y)] =
                jq.at(s).at(x).at(a).at(y).get<double>();
    if (j.at("q").contains("mu_coef")) {
      tb->q_mu.resize(static_cast<std::size_t>(T * d * A));
      for (int s = 0; s < T; ++s)
        for (int x = 0; x < d; ++x)
          for (int a = 0; a < A; ++a)
            tb->q_mu[static_cast<std::size_t>((s * d + x) * A + a)] =
                j.at("q").at("mu_coef").at(s).at(x).at(a).get<double>();
    }
    tb->F.resize(static_cast<std::size_t>(T * d * A));
    for (int s = 0; s < T; ++s)
      for (int x = 0; x < d; ++x)
        for (int a = 0; a < A; ++a)
          tb->F[static_cast<std::size_t>((s * d + x) * A + a)] =
              j.at("F").at("table").at(s).at(x).at(a).get<double>();
    tb->G.resize(static_cast<std::size_t>(d));
    for (int x = 0; x < d; ++x)
      tb->G[static_cast<std::size_t>(x)] = j.at("G").at("table").at(x).get<double>();
    if (j.at("G").contains("mu_coef")) {
      tb->G_mu = j.at("G").at("mu_coef").get<std::vector<double>>();
      tb->w = j.at("G").value("mu_weights", std::vector<double>(static_cast<std::size_t>(d), 1.0));
    }
    sc.game = game_from_tables(d, T, std::move(grid), tb);
    sc.game.states.labels = labels;
    sc.game.name = j.value("name", "scenario");
  }
  sc.game.c_q = j.at("c_q").get<double>();
  sc.game.C0 = j.at("C0").get<double>();

  if (j.contains("mu"))
    sc.mu = j.at("mu").get<std::vector<double>>();
  else
    sc.mu.assign(static_cast<std::size_t>(sc.game.d()), 1.0 / sc.game.d());

  auto rep = validate_game_spec(sc.game);
  if (!rep.accepted) {
    std::string msg = "scenario rejected:";
    for (const auto& i : rep.issues) msg += " " + i.what;
    throw ValidationError(msg);
  }
  return sc;
}

}  // namespace mfg
