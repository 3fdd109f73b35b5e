#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "mfg/hetero.hpp"

using namespace mfg;

namespace {

MuPathControl frozen_of(const GameSpec& spec, const PurePathControl& c) {
  return MuPathControl::frozen(c);
}

HeteroProfile random_profile(std::mt19937& g, const GameSpec& spec, int n_per_path) {
  HeteroProfile prof;
  prof.t = 0;
  PathSpace sp{spec.d(), 0};
  for (std::size_t x = 0; x < sp.size(); ++x)
    for (int k = 0; k < n_per_path; ++k) {
      prof.start.push_back(x);
      prof.controls.push_back(MuPathControl::frozen(testutil::random_path_control(g, spec)));
    }
  return prof;
}

std::vector<MuPathControl> small_family(const GameSpec& spec) {
  // constant-action path controls, one per grid point
  std::vector<MuPathControl> fam;
  for (int ai = 0; ai < spec.actions.size(); ++ai) {
    ActionView a = spec.actions.at(ai);
    fam.push_back(
        MuPathControl::frozen(PurePathControl::constant(spec.T(), spec.d(), Action(a.begin(), a.end()))));
  }
  return fam;
}

}  // namespace

TEST_CASE("lambda_N from profiles") {
  std::mt19937 g(193);
  GameSpec spec = testutil::random_path_spec(g, 2, 2, 2);

  SECTION("equal controls concentrate with empirical weights") {
    auto shared = testutil::random_path_control(g, spec);
    HeteroProfile prof;
    prof.t = 0;
    prof.start = {0, 0, 1};
    prof.controls.assign(3, frozen_of(spec, shared));
    GlobalMeasure L = lambda_N_from_profile(spec, prof);
    GlobalMeasure canon = L.canonical();
    REQUIRE(canon.atoms.size() == 2);
    CHECK(canon.mass_at(0) == Catch::Approx(2.0 / 3.0).margin(1e-15));
    CHECK(canon.mass_at(1) == Catch::Approx(1.0 / 3.0).margin(1e-15));
  }

  SECTION("two distinct controls at one path become two atoms of weight 1/2") {
    HeteroProfile prof;
    prof.t = 0;
    prof.start = {0, 0, 1, 1};
    auto c1 = testutil::random_path_control(g, spec);
    auto c2 = testutil::random_path_control(g, spec);
    c2.slot(1, 0) = Action{c2.at(1, 0)[0] == 0.0 ? 1.0 : 0.0};  // force a difference
    prof.controls = {frozen_of(spec, c1), frozen_of(spec, c2), frozen_of(spec, c1),
                     frozen_of(spec, c1)};
    GlobalMeasure L = lambda_N_from_profile(spec, prof);
    int atoms_at_0 = 0;
    for (const auto& a : L.atoms)
      if (a.x == 0) ++atoms_at_0;
    CHECK(atoms_at_0 == 2);
    for (const auto& a : L.atoms)
      if (a.x == 0) CHECK(a.weight == Catch::Approx(0.25).margin(1e-15));
  }

  SECTION("symmetry identity: J_i equals the lift's atom cost") {
    HeteroProfile prof = random_profile(g, spec, 2);
    GlobalMeasure L = lambda_N_from_profile(spec, prof);
    HeteroCosts costs = hetero_costs(spec, prof);
    const auto& J = costs.J;
    REQUIRE(costs.exact);
    GlobalMfeGap gap = global_mfe_gap(spec, L);
    // match each player's cost against its atom's cost
    GlobalMeasure canon = L;  // lambda_N_from_profile already groups players
    for (int i = 0; i < prof.N(); ++i) {
      auto key = descendant_action_key(prof.controls[static_cast<std::size_t>(i)].pure(), 2, 0,
                                       prof.start[static_cast<std::size_t>(i)]);
      bool found = false;
      for (std::size_t k = 0; k < canon.atoms.size(); ++k) {
        if (canon.atoms[k].x != prof.start[static_cast<std::size_t>(i)]) continue;
        if (descendant_action_key(canon.atoms[k].alpha, 2, 0, canon.atoms[k].x) != key) continue;
        CHECK(J[static_cast<std::size_t>(i)] ==
              Catch::Approx(gap.atom_costs[k]).margin(1e-11));
        found = true;
      }
      CHECK(found);
    }
  }

  SECTION("measure dependent controls are rejected") {
    HeteroProfile prof = random_profile(g, spec, 1);
    std::vector<std::vector<Action>> b0(2), b1(2);
    for (int s = 0; s < 2; ++s) {
      PathSpace sp{2, s};
      b0[static_cast<std::size_t>(s)].assign(sp.size(), Action{0.4});
      b1[static_cast<std::size_t>(s)].assign(sp.size(), Action{0.1});
    }
    ActionSet box = ActionSet::box_1d(0.0, 1.0, 2);
    prof.controls[0] = MuPathControl::affine(b0, b1, {1.0, 0.0}, box);
    CHECK_THROWS_AS(lambda_N_from_profile(spec, prof), ValidationError);
  }
}

TEST_CASE("bar lambda lift") {
  std::mt19937 g(197);
  GameSpec spec = testutil::random_path_spec(g, 2, 2, 2);

  SECTION("pure controls with the empirical target reproduce lambda_N") {
    HeteroProfile prof = random_profile(g, spec, 2);
    PathMeasure muN = prof.empirical(2);
    BarLambdaLift lift = bar_lambda_lift(spec, prof, muN);
    GlobalMeasure LN = lambda_N_from_profile(spec, prof);
    CHECK(global_measure_distance(lift.bar_lambda, LN) < 1e-12);
    // mu^{bar Lambda^N} = nu^N when the target is the empirical law
    PathFlowRecord lf = lambda_measure_flow(spec, lift.bar_lambda);
    for (int s = 0; s <= spec.T(); ++s)
      CHECK(w1_finite(lf.at(s), lift.nuN.at(s)) < 1e-12);
  }

  SECTION("lift lands in Xi_t(mu) for a different target") {
    HeteroProfile prof = random_profile(g, spec, 2);
    auto mu = testutil::random_interior_path_measure(g, 2, 0);
    BarLambdaLift lift = bar_lambda_lift(spec, prof, mu);
    CHECK(w1_finite(lift.bar_lambda.initial_measure(), mu) < 1e-12);
    CHECK(lift.bar_lambda.total_mass() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("hetero equilibrium check") {
  std::mt19937 g(199);

  SECTION("constant costs give zero gap") {
    GameSpec spec = testutil::random_path_spec(g, 2, 2, 2);
    spec.F_path = [](int, PathView, const PathMeasure&, ActionView) { return 0.0; };
    spec.G_path = [](PathView, const PathMeasure&) { return 4.0; };
    HeteroProfile prof = random_profile(g, spec, 1);
    auto fam = small_family(spec);
    HeteroEqReport rep = hetero_eq_check(spec, prof, 1e-9, fam);
    CHECK(rep.verdict);
    CHECK(rep.averaged_gap == Catch::Approx(0.0).margin(1e-12));
    CHECK(rep.chebyshev_ok);
  }

  SECTION("homogeneous profiles match the averaged per-player gap") {
    GameSpec spec = testutil::random_path_spec(g, 2, 2, 2);
    auto shared = testutil::random_path_control(g, spec);
    HeteroProfile prof;
    prof.t = 0;
    prof.start = {0, 1};
    prof.controls.assign(2, frozen_of(spec, shared));
    PathControlEnum en(spec, 0);
    std::vector<MuPathControl> full_family;
    for (std::size_t id = 0; id < en.count(); ++id)
      full_family.push_back(frozen_of(spec, en.control(id)));
    HeteroEqReport rep = hetero_eq_check(spec, prof, 0.05, full_family);
    double manual = 0.5 * (rep.gaps[0] + rep.gaps[1]);
    CHECK(rep.averaged_gap == Catch::Approx(manual).margin(1e-14));
    CHECK(rep.chebyshev_ok);
  }
}

TEST_CASE("hetero set value membership distinguishes max-min from max-max") {
  std::mt19937 g(211);
  GameSpec spec = testutil::random_path_spec(g, 2, 2, 2);
  // two co-located players with different controls produce different
  // best-response values
  HeteroProfile prof;
  prof.t = 0;
  prof.start = {0, 0, 1};
  auto c1 = testutil::random_path_control(g, spec);
  auto c2 = testutil::random_path_control(g, spec);
  prof.controls = {frozen_of(spec, c1), frozen_of(spec, c2), frozen_of(spec, c1)};
  PathControlEnum en(spec, 0);
  std::vector<MuPathControl> family;
  for (std::size_t id = 0; id < en.count(); ++id) family.push_back(frozen_of(spec, en.control(id)));

  double eps = 10.0;  // every profile passes; membership is about the values
  std::vector<HeteroProfile> cands = {prof};
  HeteroSetValue sv = hetero_set_value(spec, cands, eps, family);
  REQUIRE(sv.profiles_values.size() == 1);
  REQUIRE(sv.profiles_values[0][0].size() == 2);

  double v0 = sv.profiles_values[0][0][0];
  double v1 = sv.profiles_values[0][0][1];
  double v_other = sv.profiles_values[0][1][0];
  if (std::abs(v0 - v1) > 1e-6) {
    HeteroSetValue tight = sv;
    tight.epsilon = std::abs(v0 - v1) / 4.0;
    // phi matching either co-located value passes the max-min membership
    std::vector<double> phi0 = {v0, v_other};
    std::vector<double> phi1 = {v1, v_other};
    CHECK(tight.is_member(phi0));
    CHECK(tight.is_member(phi1));
    // the max-max variant rejects both (it must match every co-located value)
    CHECK_FALSE(tight.is_member(phi0, true));
    CHECK_FALSE(tight.is_member(phi1, true));
  }
}

TEST_CASE("discretize, round, expand") {
  std::mt19937 g(223);

  SECTION("atomic rows with separated grid points are unchanged") {
    GameSpec spec = make_example71(0.25);
    RelaxedControl gamma = RelaxedControl::dirac_at(spec.T(), 2, spec.actions.size(), 0);
    for (std::size_t p = 0; p < PathSpace{2, 1}.size(); ++p) gamma.slot(1, p) = {0.3, 0.7};
    DiscretizeReport rep = discretize_relaxed(spec, gamma, 0.01);
    CHECK(rep.representatives.size() == 2);
    for (int s = 0; s < spec.T(); ++s) {
      PathSpace sp{2, s};
      for (std::size_t p = 0; p < sp.size(); ++p)
        CHECK(sup_distance(rep.gamma_eps.row(s, p), gamma.row(s, p)) == 0.0);
    }
  }

  SECTION("nearby atoms merge and masses add") {
    GameSpec spec = make_example71(0.25);
    spec.actions = ActionSet::explicit_1d({0.25, 0.27, 0.75});
    spec.actions.kind = ActionSet::Kind::box;
    spec.actions.lower = {0.25};
    spec.actions.upper = {0.75};
    RelaxedControl gamma = RelaxedControl::dirac_at(spec.T(), 2, 3, 0);
    for (std::size_t p = 0; p < PathSpace{2, 1}.size(); ++p) gamma.slot(1, p) = {0.2, 0.3, 0.5};
    DiscretizeReport rep = discretize_relaxed(spec, gamma, 0.05);
    REQUIRE(rep.representatives.size() == 2);
    for (std::size_t p = 0; p < PathSpace{2, 1}.size(); ++p) {
      CHECK(rep.gamma_eps.row(1, p)[0] == Catch::Approx(0.5).margin(1e-15));
      CHECK(rep.gamma_eps.row(1, p)[1] == 0.0);
      CHECK(rep.gamma_eps.row(1, p)[2] == Catch::Approx(0.5).margin(1e-15));
    }
  }

  SECTION("largest-remainder rounding hits the pinned multiplicities") {
    GameSpec spec = make_example71(0.25);
    // one initial path gets weights (0.3, 0.7) with mu^N(x) = 1: multiplicities
    // (1, 3) at N = 4
    PathSpace sp{2, 0};
    std::mt19937 g2(3);
    GlobalMeasure L;
    L.t = 0;
    L.d = 2;
    L.T = 2;
    for (std::size_t x = 0; x < 2; ++x) {
      auto c1 = testutil::random_path_control(g2, spec);
      auto c2 = testutil::random_path_control(g2, spec);
      c2.slot(1, 0) = Action{c2.at(1, 0)[0] == 0.25 ? 0.75 : 0.25};
      GlobalMeasure::Atom a1{x, c1, 0.3 * 0.5};
      GlobalMeasure::Atom a2{x, c2, 0.7 * 0.5};
      L.atoms.push_back(a1);
      L.atoms.push_back(a2);
    }
    std::vector<std::size_t> start = {0, 0, 0, 0, 1, 1, 1, 1};
    RoundingReport rr = lambda_eps_rounding(spec, start, L);
    for (std::size_t x = 0; x < 2; ++x) {
      std::vector<double> weights;
      for (const auto& a : rr.lambda_eps.atoms)
        if (a.x == x) weights.push_back(a.weight * 8);
      std::sort(weights.begin(), weights.end());
      REQUIRE(weights.size() == 2);
      CHECK(weights[0] == Catch::Approx(1.0));
      CHECK(weights[1] == Catch::Approx(3.0));
    }
    CHECK(rr.max_deviation <= rr.bound + 1e-12);
    // per-path mass is conserved exactly
    for (std::size_t x = 0; x < 2; ++x)
      CHECK(rr.lambda_eps.mass_at(x) == Catch::Approx(0.5).margin(1e-15));
  }

  SECTION("profile expansion round-trips exactly") {
    std::mt19937 g3(229);
    GameSpec spec = testutil::random_path_spec(g3, 2, 2, 2);
    auto mu = testutil::random_interior_path_measure(g3, 2, 0);
    RelaxedControl gamma = RelaxedControl::dirac_at(spec.T(), 2, 2, 0);
    for (int s = 0; s < spec.T(); ++s) {
      PathSpace sp{2, s};
      for (std::size_t p = 0; p < sp.size(); ++p)
        gamma.slot(s, p) = {0.25 + 0.1 * sp.state_at(p, s), 0.75 - 0.1 * sp.state_at(p, s)};
    }
    GlobalMeasure Lg = lambda_from_gamma(spec, 0, mu, gamma);
    std::vector<std::size_t> start = {0, 0, 0, 1, 1, 1, 0, 1};
    RoundingReport rr = lambda_eps_rounding(spec, start, Lg);
    HeteroProfile prof = profile_from_lambda(spec, start, rr.lambda_eps);
    GlobalMeasure back = lambda_N_from_profile(spec, prof);
    CHECK(global_measure_distance(back, rr.lambda_eps) == 0.0);

    SECTION("single-atom measures expand to homogeneous profiles") {
      GlobalMeasure single;
      single.t = 0;
      single.d = 2;
      single.T = 2;
      auto c = testutil::random_path_control(g3, spec);
      single.atoms.push_back({0, c, 0.5});
      single.atoms.push_back({1, c, 0.5});
      std::vector<std::size_t> st = {0, 0, 1, 1};
      HeteroProfile hp = profile_from_lambda(spec, st, single);
      for (const auto& ctl : hp.controls)
        CHECK(descendant_action_key(ctl.pure(), 2, 0, 0) ==
              descendant_action_key(c, 2, 0, 0));
    }
  }
}

TEST_CASE("hetero pipeline trend smoke test") {
  GameSpec spec = make_example71(0.25);
  auto mu = PathMeasure::from_state_measure(SimplexMeasure({0.5, 0.5}));
  // the path dependent relaxed equilibrium of the example
  RelaxedControl gstar = RelaxedControl::dirac_at(spec.T(), 2, 2, 0);
  PathSpace sp1{2, 1};
  for (std::size_t p = 0; p < sp1.size(); ++p)
    gstar.slot(1, p) = sp1.state_at(p, 0) == 0 ? std::vector<double>{1.0, 0.0}
                                               : std::vector<double>{0.0, 1.0};
  REQUIRE(relaxed_mfe_gap(spec, 0, mu, gstar).max_gap() <= 1e-12);

  std::vector<MuPathControl> family;
  PathControlEnum en(spec, 0);
  for (std::size_t id = 0; id < en.count(); ++id)
    family.push_back(MuPathControl::frozen(en.control(id)));

  std::vector<int> Ns = {4, 12};
  PathGameOptions opt;
  opt.exact_cap = 1 << 16;
  opt.samples = 1'500;
  auto rows = hetero_convergence_experiment(spec, 0, mu, gstar, 0.05, Ns, 17, family, opt);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.round_trip_distance == 0.0);
    CHECK(row.chebyshev_ok);
  }
  // the averaged gap tightens with N (generous slack for the MC leg)
  CHECK(rows[1].averaged_gap <= rows[0].averaged_gap + 0.05);
}

TEST_CASE("quantile atomization of a density") {
  // uniform density: quantile atoms sit at the cell midpoints
  auto atoms = quantile_atomize([](double) { return 1.0; }, 0.0, 1.0, 4);
  REQUIRE(atoms.size() == 4);
  for (int j = 0; j < 4; ++j) {
    CHECK(atoms[static_cast<std::size_t>(j)].first ==
          Catch::Approx((j + 0.5) / 4.0).margin(1e-3));
    CHECK(atoms[static_cast<std::size_t>(j)].second == 0.25);
  }
  // a peaked density concentrates the representatives near the peak
  auto peaked = quantile_atomize(
      [](double a) { return std::exp(-50.0 * (a - 0.7) * (a - 0.7)); }, 0.0, 1.0, 3);
  for (const auto& [a, w] : peaked) CHECK(std::abs(a - 0.7) < 0.2);
}
