#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "mfg/scenario.hpp"
#include "mfg/setvalue.hpp"

using namespace mfg;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  std::string path = "/tmp/mfg_test_" + name;
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("builtin scenario loads and validates") {
  std::string path = write_temp("builtin.json", R"({
    "kind": "discrete",
    "builtin": {"family": "example71", "a0": 0.25},
    "c_q": 0.25,
    "C0": 1.0,
    "mu": [0.3, 0.7]
  })");
  Scenario sc = load_scenario(path);
  CHECK(sc.kind == Scenario::Kind::discrete);
  CHECK(sc.game.T() == 2);
  CHECK(sc.mu[0] == 0.3);
  CHECK(sc.hash != 0);

  // the loaded spec reproduces the set value triple
  SetValueApprox sv = raw_set_value(sc.game, 0, SimplexMeasure{std::vector<double>(sc.mu)});
  CHECK(sv.generators.size() == 3);
  std::remove(path.c_str());
}

TEST_CASE("table scenario evaluates its entries") {
  std::string path = write_temp("table.json", R"({
    "kind": "discrete",
    "name": "tiny",
    "horizon": 1,
    "states": ["u", "v"],
    "actions": {"grid": [0.0, 1.0]},
    "q": {"table": [[[[0.4, 0.6], [0.7, 0.3]], [[0.5, 0.5], [0.2, 0.8]]]],
          "mu_coef": [[[0.1, 0.0], [0.0, 0.0]]]},
    "F": {"table": [[[0.25, -0.5], [0.0, 1.0]]]},
    "G": {"table": [1.0, -1.0], "mu_coef": [0.5, 0.0], "mu_weights": [1.0, 0.0]},
    "c_q": 0.15,
    "C0": 2.0
  })");
  Scenario sc = load_scenario(path);
  SimplexMeasure mu({0.5, 0.5});
  // base + mu coefficient times (mu(y) - 1/2)
  CHECK(sc.game.q(0, 0, mu, sc.game.actions.at(0), 0) == Catch::Approx(0.4));
  SimplexMeasure skew({0.7, 0.3});
  CHECK(sc.game.q(0, 0, skew, sc.game.actions.at(0), 0) ==
        Catch::Approx(0.4 + 0.1 * 0.2));
  CHECK(sc.game.F(0, 1, mu, sc.game.actions.at(1)) == Catch::Approx(1.0));
  CHECK(sc.game.G(0, skew) == Catch::Approx(1.0 + 0.5 * 0.7));
  // rows still sum to one under the mean-zero affine term
  double row = 0.0;
  for (int y = 0; y < 2; ++y) row += sc.game.q(0, 0, skew, sc.game.actions.at(0), y);
  CHECK(row == Catch::Approx(1.0).margin(1e-12));
  std::remove(path.c_str());
}

TEST_CASE("strict schema rejects unknown keys and broken data") {
  SECTION("unknown top-level key") {
    std::string path = write_temp("bad1.json", R"({
      "kind": "discrete",
      "builtin": {"family": "example71", "a0": 0.25},
      "c_q": 0.25, "C0": 1.0, "typo_key": 1
    })");
    CHECK_THROWS_AS(load_scenario(path), ValidationError);
    std::remove(path.c_str());
  }
  SECTION("row sums off") {
    std::string path = write_temp("bad2.json", R"({
      "kind": "discrete", "name": "broken", "horizon": 1,
      "states": ["u", "v"],
      "actions": {"grid": [0.0]},
      "q": {"table": [[[[0.6, 0.5]], [[0.5, 0.5]]]]},
      "F": {"table": [[[0.0], [0.0]]]},
      "G": {"table": [0.0, 0.0]},
      "c_q": 0.4, "C0": 1.0
    })");
    CHECK_THROWS_AS(load_scenario(path), ValidationError);
    std::remove(path.c_str());
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(load_scenario("/tmp/does_not_exist_mfg.json"), ValidationError);
  }
}

TEST_CASE("diffusion scenario loads with expression coefficients") {
  std::string path = write_temp("diff.json", R"({
    "kind": "diffusion",
    "name": "drift",
    "horizon": 0.5,
    "domain": [-4.0, 4.0],
    "nx": 161,
    "dt": 0.002,
    "actions": {"box": [-1.0, 1.0], "grid_count": 3},
    "stats": ["mean"],
    "b": [{"coef": 1.0, "factor": "a"}],
    "f": [{"coef": 0.1, "factor": "a_sq"}],
    "g": [{"coef": 0.5, "factor": "abs_diff_stat", "stat": 0}],
    "C0": 4.0,
    "b_bound": 1.0,
    "L0": 1.0,
    "mu": {"gaussian": [0.5, 0.3]}
  })");
  Scenario sc = load_scenario(path);
  CHECK(sc.kind == Scenario::Kind::diffusion);
  CHECK(sc.diff.nx == 161);
  REQUIRE(sc.diff.stats.size() == 1);
  std::vector<double> st = {0.25};
  CHECK(sc.diff.b(0.0, 1.0, st, 0.7) == Catch::Approx(0.7));
  CHECK(sc.diff.f(0.0, 1.0, st, 0.5) == Catch::Approx(0.025));
  CHECK(sc.diff.g(1.0, st) == Catch::Approx(0.5 * 0.75));
  CHECK(pairwise_sum(sc.mu) == Catch::Approx(1.0).margin(1e-12));
  std::remove(path.c_str());
}

TEST_CASE("shipped scenarios all load and validate") {
  for (const char* name :
       {"example71_a025.json", "const2.json", "crowd2.json", "diff_linear.json",
        "diff_crowd.json", "diff_heat.json"}) {
    std::string path = std::string(MFG_SCENARIO_DIR) + "/" + name;
    Scenario sc;
    REQUIRE_NOTHROW(sc = load_scenario(path));
    if (sc.kind == Scenario::Kind::discrete)
      CHECK(validate_game_spec(sc.game).accepted);
    else
      CHECK(validate_diffusion_spec(sc.diff).accepted);
  }
}
