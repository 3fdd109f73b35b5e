#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/setvalue.hpp"

using namespace mfg;

namespace {

PureStateControl constant_control(const GameSpec& spec, double a) {
  return PureStateControl::constant(spec.T(), spec.d(), Action{a});
}

GameSpec constant_cost_spec(std::mt19937& g, double c) {
  GameSpec spec = testutil::random_state_spec(g, 2, 2, 2);
  spec.F = [](int, int, const SimplexMeasure&, ActionView) { return 0.0; };
  spec.G = [c](int, const SimplexMeasure&) { return c; };
  return spec;
}

}  // namespace

TEST_CASE("measure_flow on the two-period example") {
  GameSpec spec = make_example71(0.25);
  std::mt19937 g(5);

  for (int rep = 0; rep < 5; ++rep) {
    auto mu = testutil::random_interior_measure(g, 2);
    auto alpha = testutil::random_state_control(g, spec);
    FlowRecord flow = measure_flow(spec, 0, mu, alpha);
    CHECK(flow.at(1)[0] == Catch::Approx(0.5).margin(1e-15));
  }

  auto mu = SimplexMeasure({0.3, 0.7});
  auto lo = constant_control(spec, 0.25);
  FlowRecord flow = measure_flow(spec, 0, mu, lo);
  CHECK(flow.at(2)[0] == Catch::Approx(0.25).margin(1e-14));

  SECTION("boundary measure faults") {
    CHECK_THROWS_AS(measure_flow(spec, 0, SimplexMeasure({1.0, 0.0}), lo), NotFullSupport);
  }

  SECTION("input-independent kernel gives the fixed row") {
    GameSpec fixed = spec;
    fixed.q = [](int, int, const SimplexMeasure&, ActionView, int y) {
      return y == 0 ? 0.6 : 0.4;
    };
    fixed.c_q = 0.4;
    std::mt19937 g2(9);
    for (int rep = 0; rep < 4; ++rep) {
      auto a = testutil::random_state_control(g2, fixed);
      FlowRecord f = measure_flow(fixed, 0, mu, a);
      CHECK(f.at(1)[0] == Catch::Approx(0.6).margin(1e-15));
      CHECK(f.at(2)[0] == Catch::Approx(0.6).margin(1e-15));
    }
  }
}

TEST_CASE("flow invariants: mass and support floor") {
  std::mt19937 g(17);
  for (int rep = 0; rep < 30; ++rep) {
    GameSpec spec = testutil::random_state_spec(g, 2 + static_cast<int>(g() % 2), 3, 2,
                                                rep % 2 == 0);
    auto mu = testutil::random_interior_measure(g, spec.d());
    auto alpha = testutil::random_state_control(g, spec);
    FlowRecord flow = measure_flow(spec, 0, mu, alpha);
    for (int s = 0; s <= spec.T(); ++s) {
      CHECK(pairwise_sum(flow.at(s).weights()) == Catch::Approx(1.0).margin(1e-12));
      if (s > 0) CHECK(flow.at(s).min_weight() >= spec.c_q - 1e-12);
    }
  }
}

TEST_CASE("individual_law basics") {
  GameSpec spec = make_example71(0.25);
  auto mu = SimplexMeasure({0.4, 0.6});
  std::mt19937 g(31);

  SECTION("example: first step is uniform regardless of start and control") {
    for (int rep = 0; rep < 4; ++rep) {
      auto alpha = testutil::random_state_control(g, spec);
      auto tilde = testutil::random_state_control(g, spec);
      FlowRecord flow = measure_flow(spec, 0, mu, alpha);
      for (int x = 0; x < 2; ++x) {
        auto law = individual_law(spec, flow, 0, x, tilde);
        CHECK(law[1][0] == Catch::Approx(0.5).margin(1e-15));
      }
    }
  }

  SECTION("disintegration consistency") {
    std::mt19937 g2(3);
    for (int rep = 0; rep < 10; ++rep) {
      GameSpec sp = testutil::random_state_spec(g2, 2, 3, 2, true);
      auto m0 = testutil::random_interior_measure(g2, 2);
      auto alpha = testutil::random_state_control(g2, sp);
      FlowRecord flow = measure_flow(sp, 0, m0, alpha);
      for (int s = 0; s <= sp.T(); ++s) {
        double mix0 = 0.0;
        for (int x = 0; x < 2; ++x) {
          auto law = individual_law(sp, flow, 0, x, alpha);
          mix0 += m0[x] * law[static_cast<std::size_t>(s)][0];
        }
        CHECK(mix0 == Catch::Approx(flow.at(s)[0]).margin(1e-12));
      }
    }
  }

  SECTION("start at horizon: the law is the Dirac start") {
    auto alpha = testutil::random_state_control(g, spec);
    FlowRecord flow = measure_flow(spec, 0, mu, alpha);
    auto law = individual_law(spec, flow, spec.T(), 1, alpha);
    CHECK(law.size() == 1);
    CHECK(law[0][1] == 1.0);
  }
}

TEST_CASE("cost_J pinned values") {
  std::mt19937 g(41);

  SECTION("zero running cost and constant terminal cost") {
    GameSpec spec = constant_cost_spec(g, 2.5);
    auto mu = testutil::random_interior_measure(g, 2);
    auto alpha = testutil::random_state_control(g, spec);
    FlowRecord flow = measure_flow(spec, 0, mu, alpha);
    for (int x = 0; x < 2; ++x)
      CHECK(cost_J(spec, flow, 0, x, alpha) == Catch::Approx(2.5).margin(1e-13));
  }

  SECTION("example71 equilibrium cost at a0 = 0.25") {
    GameSpec spec = make_example71(0.25);
    auto mu = SimplexMeasure({0.3, 0.7});
    auto lo = constant_control(spec, 0.25);
    FlowRecord flow = measure_flow(spec, 0, mu, lo);
    for (int x = 0; x < 2; ++x)
      CHECK(cost_J(spec, flow, 0, x, lo) == Catch::Approx(0.4375).margin(1e-14));
  }
}

TEST_CASE("value_v pinned values and bounds") {
  std::mt19937 g(43);

  SECTION("constant costs") {
    GameSpec spec = constant_cost_spec(g, -1.5);
    auto mu = testutil::random_interior_measure(g, 2);
    auto alpha = testutil::random_state_control(g, spec);
    FlowRecord flow = measure_flow(spec, 0, mu, alpha);
    ValueTable vt = value_v(spec, flow, 0);
    for (int s = 0; s <= spec.T(); ++s)
      for (int x = 0; x < 2; ++x) CHECK(vt.at(s, x) == Catch::Approx(-1.5).margin(1e-13));
  }

  SECTION("example71 continuation value") {
    double a0 = 0.25;
    GameSpec spec = make_example71(a0, true);  // grid {a0, 1/2, 1-a0}
    auto mu = SimplexMeasure({0.45, 0.55});
    auto lo = constant_control(spec, a0);
    FlowRecord flow = measure_flow(spec, 0, mu, lo);
    ValueTable vt = value_v(spec, flow, 0);
    double expect = flow.at(2)[0] + a0 * (1.0 - a0);
    for (int x = 0; x < 2; ++x) CHECK(vt.at(1, x) == Catch::Approx(expect).margin(1e-14));
  }

  SECTION("v is a lower bound for every grid control, and matches brute force") {
    for (int rep = 0; rep < 6; ++rep) {
      GameSpec spec = testutil::random_state_spec(g, 2, 2 + static_cast<int>(g() % 2), 2);
      auto mu = testutil::random_interior_measure(g, 2);
      auto alpha = testutil::random_state_control(g, spec);
      FlowRecord flow = measure_flow(spec, 0, mu, alpha);
      ValueTable vt = value_v(spec, flow, 0);

      StateControlEnum en(spec, 0);
      auto mus = oracle::flow_of(spec, 0, mu, [&] {
        oracle::Ctl c(static_cast<std::size_t>(spec.T()),
                      std::vector<int>(static_cast<std::size_t>(spec.d()), 0));
        for (int s = 0; s < spec.T(); ++s)
          for (int x = 0; x < spec.d(); ++x)
            c[static_cast<std::size_t>(s)][static_cast<std::size_t>(x)] =
                *spec.actions.find(alpha.at(s, x));
        return c;
      }());
      auto all = oracle::enumerate_controls(0, spec.T(), spec.d(), spec.actions.size());
      for (int x = 0; x < spec.d(); ++x) {
        double brute = oracle::value_by_enumeration(spec, 0, mus, x, all);
        CHECK(vt.at(0, x) == Catch::Approx(brute).margin(1e-11));
        for (std::size_t id = 0; id < en.count(); ++id)
          CHECK(vt.at(0, x) <= cost_J(spec, flow, 0, x, en.control(id)) + 1e-12);
      }
    }
  }

  SECTION("pointwise larger G raises v") {
    for (int rep = 0; rep < 10; ++rep) {
      GameSpec spec = testutil::random_state_spec(g, 3, 2, 2);
      auto mu = testutil::random_interior_measure(g, 3);
      auto alpha = testutil::random_state_control(g, spec);
      FlowRecord flow = measure_flow(spec, 0, mu, alpha);
      ValueTable lo_v = value_v(spec, flow, 0);
      GameSpec bigger = spec;
      auto baseG = spec.G;
      std::uniform_real_distribution<double> bump(0.0, 0.5);
      double b0 = bump(g), b1 = bump(g), b2 = bump(g);
      bigger.G = [baseG, b0, b1, b2](int x, const SimplexMeasure& m) {
        return baseG(x, m) + (x == 0 ? b0 : x == 1 ? b1 : b2);
      };
      FlowRecord flow2 = measure_flow(bigger, 0, mu, alpha);
      ValueTable hi_v = value_v(bigger, flow2, 0);
      for (int x = 0; x < 3; ++x) CHECK(hi_v.at(0, x) >= lo_v.at(0, x) - 1e-12);
    }
  }
}

TEST_CASE("truncated costs and the tower identity") {
  std::mt19937 g(47);

  SECTION("T0 = T with psi = G matches the full cost") {
    GameSpec spec = testutil::random_state_spec(g, 2, 3, 2);
    auto mu = testutil::random_interior_measure(g, 2);
    auto alpha = testutil::random_state_control(g, spec);
    auto tilde = testutil::random_state_control(g, spec);
    FlowRecord flow = measure_flow(spec, 0, mu, alpha);
    TerminalFn psi = [&spec](int x, const SimplexMeasure& m) { return spec.G(x, m); };
    for (int x = 0; x < 2; ++x)
      CHECK(cost_J_truncated(spec, flow, spec.T(), psi, 0, x, tilde) ==
            Catch::Approx(cost_J(spec, flow, 0, x, tilde)).margin(1e-13));
  }

  SECTION("zero data gives zero") {
    GameSpec spec = testutil::random_state_spec(g, 2, 3, 2);
    spec.F = [](int, int, const SimplexMeasure&, ActionView) { return 0.0; };
    auto mu = testutil::random_interior_measure(g, 2);
    auto alpha = testutil::random_state_control(g, spec);
    FlowRecord flow = measure_flow(spec, 0, mu, alpha);
    TerminalFn zero = [](int, const SimplexMeasure&) { return 0.0; };
    CHECK(cost_J_truncated(spec, flow, 2, zero, 0, 0, alpha) == 0.0);
  }

  SECTION("tower residual vanishes at every split on randomized specs") {
    for (int rep = 0; rep < 25; ++rep) {
      GameSpec spec = testutil::random_state_spec(g, 2, 2 + static_cast<int>(g() % 2), 3,
                                                  rep % 2 == 1);
      auto mu = testutil::random_interior_measure(g, 2);
      auto alpha = testutil::random_state_control(g, spec);
      auto tilde = testutil::random_state_control(g, spec);
      for (int T0 = 0; T0 <= spec.T(); ++T0)
        CHECK(tower_check(spec, 0, mu, alpha, tilde, T0) < 1e-12);
    }
  }
}

TEST_CASE("MuControl evaluation, certificate, and freezing") {
  double a0 = 0.1;
  GameSpec spec = make_example71(a0);
  auto mu = SimplexMeasure({0.35, 0.65});

  auto beta_const = [&](double b0, double b1) {
    std::vector<std::vector<Action>> beta0(
        static_cast<std::size_t>(spec.T()),
        std::vector<Action>(static_cast<std::size_t>(spec.d()), Action{b0}));
    std::vector<std::vector<Action>> beta1(
        static_cast<std::size_t>(spec.T()),
        std::vector<Action>(static_cast<std::size_t>(spec.d()), Action{b1}));
    return MuControl::affine(beta0, beta1, {1.0, 0.0}, spec.actions);
  };

  SECTION("certified Lipschitz constant holds on random measure pairs") {
    MuControl mc = beta_const(0.3, 0.4);
    double L = mc.lipschitz_constant();
    CHECK(L == Catch::Approx(0.4));
    std::mt19937 g(53);
    for (int rep = 0; rep < 100; ++rep) {
      auto m1 = testutil::random_interior_measure(g, 2);
      auto m2 = testutil::random_interior_measure(g, 2);
      for (int s = 0; s < spec.T(); ++s)
        for (int x = 0; x < spec.d(); ++x) {
          double da = std::abs(mc.at(s, x, m1)[0] - mc.at(s, x, m2)[0]);
          CHECK(da <= L * w1_finite(m1, m2) + 1e-14);
        }
    }
  }

  SECTION("values stay inside the action box") {
    MuControl mc = beta_const(-1.0, 5.0);
    std::mt19937 g(59);
    for (int rep = 0; rep < 50; ++rep) {
      auto m = testutil::random_interior_measure(g, 2);
      double a = mc.at(0, 0, m)[0];
      CHECK(a >= a0 - 1e-15);
      CHECK(a <= 1.0 - a0 + 1e-15);
    }
  }

  SECTION("freezing reproduces the flow and is idempotent") {
    MuControl mc = beta_const(0.2, 0.5);
    FlowRecord f_mu = measure_flow(spec, 0, mu, mc);
    PureStateControl frozen = freeze_mu_dependence(spec, 0, mu, mc);
    FlowRecord f_frozen = measure_flow(spec, 0, mu, frozen);
    for (int s = 0; s <= spec.T(); ++s)
      CHECK(w1_finite(f_mu.at(s), f_frozen.at(s)) < 1e-12);

    PureStateControl again =
        freeze_mu_dependence(spec, 0, mu, MuControl::frozen(frozen));
    for (int s = 0; s < spec.T(); ++s)
      for (int x = 0; x < spec.d(); ++x)
        CHECK(again.at(s, x)[0] == frozen.at(s, x)[0]);
  }

  SECTION("a mu-independent control freezes to itself") {
    PureStateControl c = PureStateControl::constant(spec.T(), spec.d(), Action{a0});
    PureStateControl frozen = freeze_mu_dependence(spec, 0, mu, MuControl::frozen(c));
    for (int s = 0; s < spec.T(); ++s)
      for (int x = 0; x < spec.d(); ++x) CHECK(frozen.at(s, x)[0] == a0);
  }
}
