#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mfg/diffusion.hpp"

using namespace mfg;

namespace {

DiffusionSpec base_spec() {
  DiffusionSpec spec;
  spec.T = 1.0;
  spec.x_min = -6.0;
  spec.x_max = 6.0;
  spec.nx = 241;
  spec.dt = 2e-3;
  spec.a_min = -1.0;
  spec.a_max = 1.0;
  spec.n_action_grid = 5;
  spec.C0 = 1.0;
  spec.b_bound = 1.0;
  spec.L0 = 1.0;
  spec.b = [](double, double, std::span<const double>, double a) { return a; };
  spec.f = [](double, double, std::span<const double>, double) { return 0.0; };
  spec.g = [](double, std::span<const double>) { return 0.0; };
  return spec;
}

double grid_mean(const DiffusionSpec& spec, std::span<const double> mass) {
  double m = 0.0;
  for (int i = 0; i < spec.nx; ++i) m += mass[static_cast<std::size_t>(i)] * spec.node(i);
  return m;
}

double grid_second_moment(const DiffusionSpec& spec, std::span<const double> mass) {
  double m = grid_mean(spec, mass);
  double v = 0.0;
  for (int i = 0; i < spec.nx; ++i) {
    double dxm = spec.node(i) - m;
    v += mass[static_cast<std::size_t>(i)] * dxm * dxm;
  }
  return v;
}

}  // namespace

TEST_CASE("fokker-planck flow basics") {
  DiffusionSpec spec = base_spec();
  auto mu0 = gaussian_mass(spec, 0.0, 0.5);

  SECTION("pure heat flow: mass conserved, variance grows like the horizon") {
    spec.b = [](double, double, std::span<const double>, double) { return 0.0; };
    GridFlow flow = mkv_flow(spec, 0, mu0, TimedControl::constant(spec, 0, 0.0));
    double var0 = grid_second_moment(spec, flow.at(0));
    for (int k = 0; k <= spec.nt(); k += spec.nt() / 4) {
      double total = pairwise_sum(flow.at(k));
      CHECK(std::abs(total - 1.0) < 1e-12);
      for (double m : flow.at(k)) CHECK(m >= -1e-15);
    }
    double varT = grid_second_moment(spec, flow.at(spec.nt()));
    CHECK(varT - var0 == Catch::Approx(spec.T).margin(0.02));
  }

  SECTION("constant drift moves the mean linearly") {
    GridFlow flow = mkv_flow(spec, 0, mu0, TimedControl::constant(spec, 0, 0.6));
    double m0 = grid_mean(spec, flow.at(0));
    double mT = grid_mean(spec, flow.at(spec.nt()));
    CHECK(mT - m0 == Catch::Approx(0.6 * spec.T).margin(0.01));
  }

  SECTION("unstable steps fault with a suggestion") {
    DiffusionSpec bad = spec;
    bad.dt = 0.1;
    CHECK_THROWS_AS(mkv_flow(bad, 0, mu0, TimedControl::constant(bad, 0, 0.0)),
                    ValidationError);
  }

  SECTION("validation probes the declared bounds") {
    CHECK(validate_diffusion_spec(spec).accepted);
    DiffusionSpec bad = spec;
    bad.b = [](double, double, std::span<const double>, double) { return 3.0; };
    CHECK_FALSE(validate_diffusion_spec(bad).accepted);
  }
}

TEST_CASE("hjb solve") {
  DiffusionSpec spec = base_spec();
  auto mu0 = gaussian_mass(spec, 0.0, 0.5);

  SECTION("linear terminal cost: linear value, boundary-seeking feedback") {
    double kappa = 0.5;
    spec.g = [kappa](double x, std::span<const double>) { return kappa * x; };
    spec.C0 = 3.0;  // |g| up to kappa * 6 on the domain
    GridFlow flow = mkv_flow(spec, 0, mu0, TimedControl::constant(spec, 0, 0.0));
    HjbSolution sol = hjb_solve(spec, flow, 0);
    // v(0, x) = kappa x + T * min_a (kappa a) = kappa x - kappa T away from walls
    for (int i = 0; i < spec.nx; ++i) {
      double x = spec.node(i);
      if (std::abs(x) > 2.0) continue;
      CHECK(sol.at(0)[static_cast<std::size_t>(i)] ==
            Catch::Approx(kappa * x - kappa * spec.T).margin(0.02));
      CHECK(sol.feedback[0][static_cast<std::size_t>(i)] == spec.a_min);
    }
  }

  SECTION("the feedback's linear solve reproduces the value exactly") {
    spec.g = [](double x, std::span<const double>) { return std::tanh(x); };
    spec.f = [](double, double, std::span<const double>, double a) { return 0.1 * a * a; };
    GridFlow flow = mkv_flow(spec, 0, mu0, TimedControl::constant(spec, 0, 0.3));
    HjbSolution v = hjb_solve(spec, flow, 0);
    HjbSolution u = linear_solve(spec, flow, 0, v.feedback_control());
    double worst = 0.0;
    for (int i = 0; i < spec.nx; ++i)
      worst = std::max(worst, std::abs(u.at(0)[static_cast<std::size_t>(i)] -
                                       v.at(0)[static_cast<std::size_t>(i)]));
    CHECK(worst < 1e-12);
  }

  SECTION("value slope stays bounded independently of the control's slope") {
    spec.g = [](double x, std::span<const double>) { return std::tanh(x); };
    spec.f = [](double, double, std::span<const double>, double a) { return 0.1 * a * a; };
    double cap = 2.0 * (spec.L0 + 1.0) * std::exp(4.0 * spec.C0 * spec.C0 * spec.T / 3.141592653589793);
    for (double L : {0.0, 1.0, 10.0}) {
      TimedControl steep = TimedControl::constant(spec, 0, 0.0);
      for (auto& row : steep.values)
        for (int i = 0; i < spec.nx; ++i)
          row[static_cast<std::size_t>(i)] =
              std::clamp(L * spec.node(i), spec.a_min, spec.a_max);
      GridFlow flow = mkv_flow(spec, 0, mu0, steep);
      HjbSolution v = hjb_solve(spec, flow, 0);
      CHECK(v.max_slope(spec.dx()) <= cap);
    }
  }
}

TEST_CASE("integrated equilibrium gap") {
  DiffusionSpec spec = base_spec();
  auto mu0 = gaussian_mass(spec, 0.0, 0.5);

  SECTION("constant costs are an equilibrium for every control") {
    spec.f = [](double, double, std::span<const double>, double) { return 0.25; };
    spec.g = [](double, std::span<const double>) { return 1.0; };
    ContMfeGap gap = cont_mfe_gap(spec, 0, mu0, TimedControl::constant(spec, 0, 0.4));
    CHECK(std::abs(gap.gap) < 1e-9);
  }

  SECTION("deliberate suboptimality shows up as a positive gap") {
    spec.g = [](double x, std::span<const double>) { return std::tanh(x); };
    spec.C0 = 1.0;
    ContMfeGap gap = cont_mfe_gap(spec, 0, mu0, TimedControl::constant(spec, 0, 1.0));
    CHECK(gap.gap > 0.5);  // drifting up against a cost that rewards drifting down
    CHECK(gap.prob_above_eps >= 0.0);

    // the probability form of the gap agrees qualitatively
    ContMfeGap gap_eps = cont_mfe_gap(spec, 0, mu0, TimedControl::constant(spec, 0, 1.0), 0.5);
    CHECK(gap_eps.prob_above_eps > 0.5);
  }

  SECTION("a fixed point of the feedback map closes the gap") {
    spec.g = [](double x, std::span<const double>) { return std::tanh(x); };
    spec.f = [](double, double, std::span<const double>, double a) { return 0.05 * a * a; };
    auto seeds = constant_control_seeds(spec, 0, 3);
    auto cands = mfe_fixed_point(spec, 0, mu0, seeds, 60, 0.4);
    REQUIRE(!cands.empty());
    double best = 1e300;
    for (const auto& c : cands) best = std::min(best, c.gap);
    CHECK(best < 5e-3);
  }
}

TEST_CASE("fixed point multiplicity tracks the coupling") {
  DiffusionSpec spec = base_spec();
  spec.stats = {DiffusionSpec::StatKind::mean};
  auto mu0 = gaussian_mass(spec, 0.0, 0.4);

  SECTION("mean-reverting coupling keeps one candidate") {
    // cost pulls toward the origin regardless of the crowd
    spec.g = [](double x, std::span<const double>) { return std::tanh(std::abs(x)); };
    spec.f = [](double, double, std::span<const double>, double a) { return 0.05 * a * a; };
    auto cands =
        mfe_fixed_point(spec, 0, mu0, constant_control_seeds(spec, 0, 3), 60, 0.4, 1e-9, 0.2);
    std::size_t good = 0;
    for (const auto& c : cands)
      if (c.gap < 1e-2) ++good;
    CHECK(good == 1);
  }

  SECTION("crowd-following coupling yields two certified candidates") {
    // each player wants to sit at the crowd's mean; drifting with the crowd
    // in either direction is self-consistent
    spec.C0 = 12.0;
    spec.g = [](double x, std::span<const double> st) { return std::abs(x - st[0]); };
    spec.f = [](double, double, std::span<const double>, double a) { return 0.02 * a * a; };
    auto cands =
        mfe_fixed_point(spec, 0, mu0, constant_control_seeds(spec, 0, 2), 60, 0.4, 1e-9, 0.2);
    std::size_t good = 0;
    for (const auto& c : cands)
      if (c.gap < 2e-2) ++good;
    CHECK(good >= 2);

    auto sample = cont_set_value_sample(spec, 0, mu0, 2e-2, constant_control_seeds(spec, 0, 2),
                                        60, 0.4);
    CHECK(sample.generators.size() >= 2);
    CHECK_FALSE(sample.empty_flagged);

    // eps below solver resolution flags an empty sample
    auto tiny = cont_set_value_sample(spec, 0, mu0, 1e-14, constant_control_seeds(spec, 0, 2),
                                      10, 0.4);
    CHECK(tiny.empty_flagged);
  }
}

TEST_CASE("particle systems") {
  DiffusionSpec spec = base_spec();
  auto mu0 = gaussian_mass(spec, 0.0, 0.5);
  CounterRng rng(5);
  auto start = sample_positions(spec, mu0, 64, rng, 0);

  SECTION("driftless particles diffuse at the Brownian rate") {
    spec.b = [](double, double, std::span<const double>, double) { return 0.0; };
    ParticleResult res =
        particle_system(spec, 0, start, TimedControl::constant(spec, 0, 0.0), 200, 3);
    CHECK(std::abs(res.mean_sq_displacement.mean - spec.T) <=
          3.0 * res.mean_sq_displacement.half_ci + 0.05);
  }

  SECTION("a single mean-field-free particle matches the grid cost") {
    spec.g = [](double x, std::span<const double>) { return std::tanh(x); };
    std::vector<double> one = {0.4};
    TimedControl ctl = TimedControl::constant(spec, 0, 0.5);
    ParticleResult res = particle_system(spec, 0, one, ctl, 4000, 11);
    // grid value of the same control from the same start
    GridFlow flow = mkv_flow(spec, 0, mu0, ctl);
    HjbSolution u = linear_solve(spec, flow, 0, ctl);
    // interpolate u at the start
    double pos = (0.4 - spec.x_min) / spec.dx();
    int i = static_cast<int>(pos);
    double w = pos - i;
    double grid_J = (1 - w) * u.at(0)[static_cast<std::size_t>(i)] +
                    w * u.at(0)[static_cast<std::size_t>(i + 1)];
    CHECK(std::abs(res.J[0].mean - grid_J) <= 3.0 * res.J[0].half_ci + 0.02);
  }

  SECTION("co-started players are exchangeable") {
    spec.stats = {DiffusionSpec::StatKind::mean};
    spec.g = [](double x, std::span<const double> st) { return std::abs(x - st[0]); };
    spec.C0 = 12.0;
    std::vector<double> pair = {0.2, 0.2};
    ParticleResult res =
        particle_system(spec, 0, pair, TimedControl::constant(spec, 0, 0.1), 2000, 13);
    CHECK(std::abs(res.J[0].mean - res.J[1].mean) <=
          3.0 * (res.J[0].half_ci + res.J[1].half_ci));
  }

  SECTION("replay determinism across thread counts") {
    ParticleResult a =
        particle_system(spec, 0, start, TimedControl::constant(spec, 0, 0.2), 400, 21, 1);
    ParticleResult b =
        particle_system(spec, 0, start, TimedControl::constant(spec, 0, 0.2), 400, 21, 5);
    for (std::size_t j = 0; j < a.J.size(); ++j) CHECK(a.J[j].mean == b.J[j].mean);
  }
}

TEST_CASE("w1 between atomic measures") {
  std::vector<double> xa = {0.0}, wa = {1.0};
  std::vector<double> xb = {1.5}, wb = {1.0};
  CHECK(w1_atoms(xa, wa, xb, wb) == Catch::Approx(1.5));
  std::vector<double> xc = {0.0, 1.0}, wc = {0.5, 0.5};
  CHECK(w1_atoms(xc, wc, xc, wc) == 0.0);
  std::vector<double> xd = {0.0, 1.0}, wd = {0.25, 0.75};
  CHECK(w1_atoms(xc, wc, xd, wd) == Catch::Approx(0.25));
}

TEST_CASE("particle-vs-grid convergence smoke test") {
  DiffusionSpec spec = base_spec();
  spec.T = 0.5;
  auto mu0 = gaussian_mass(spec, 0.0, 0.5);
  spec.g = [](double x, std::span<const double>) { return std::tanh(x); };
  std::vector<int> Ns = {16, 128};
  auto table = cont_convergence_experiment(spec, 0, mu0, TimedControl::constant(spec, 0, 0.2),
                                           Ns, 60, 31);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[1].w1_max < table.rows[0].w1_max);
  CHECK(table.slope < -0.1);
}

TEST_CASE("recombination probe for the sampled set-value recursion") {
  DiffusionSpec spec = base_spec();
  spec.T = 0.5;
  spec.g = [](double x, std::span<const double>) { return std::tanh(x); };
  spec.f = [](double, double, std::span<const double>, double a) { return 0.05 * a * a; };
  auto mu0 = gaussian_mass(spec, 0.0, 0.5);
  ContDppReport rep = cont_dpp_probe(spec, 0, spec.nt() / 2, mu0, 0.01, 3, 40);
  REQUIRE(!rep.rows.empty());
  CHECK(rep.all_pass());
}

TEST_CASE("a fixed point without damping returns itself") {
  DiffusionSpec spec = base_spec();
  spec.T = 0.5;
  spec.g = [](double x, std::span<const double>) { return std::tanh(x); };
  spec.f = [](double, double, std::span<const double>, double a) { return 0.05 * a * a; };
  auto mu0 = gaussian_mass(spec, 0.0, 0.5);
  auto cands = mfe_fixed_point(spec, 0, mu0, constant_control_seeds(spec, 0, 1), 80, 0.4);
  REQUIRE(!cands.empty());
  REQUIRE(cands[0].converged);
  std::vector<TimedControl> fixed = {cands[0].control};
  auto again = mfe_fixed_point(spec, 0, mu0, fixed, 3, 0.0, 1e-7);
  REQUIRE(again.size() == 1);
  CHECK(again[0].control.sup_distance_to(cands[0].control) < 1e-6);
}

TEST_CASE("membership of the sampled continuous set value uses L1(mu)") {
  DiffusionSpec spec = base_spec();
  spec.T = 0.5;
  spec.g = [](double x, std::span<const double>) { return std::tanh(x); };
  spec.f = [](double, double, std::span<const double>, double a) { return 0.05 * a * a; };
  auto mu0 = gaussian_mass(spec, 0.0, 0.5);
  auto sample =
      cont_set_value_sample(spec, 0, mu0, 0.01, constant_control_seeds(spec, 0, 2), 60, 0.4);
  REQUIRE(!sample.generators.empty());
  std::vector<double> member = sample.generators[0];
  CHECK(sample.is_member(member));
  // perturbing only low-mass cells barely moves the L1(mu) distance
  std::vector<double> fringe = member;
  fringe[0] += 100.0;
  fringe[static_cast<std::size_t>(spec.nx - 1)] += 100.0;
  CHECK(sample.l1_distance(fringe) < 0.01);
  // a uniform shift of 1 is rejected at eps = 0.01
  std::vector<double> shifted = member;
  for (auto& v : shifted) v += 1.0;
  CHECK_FALSE(sample.is_member(shifted));
}
