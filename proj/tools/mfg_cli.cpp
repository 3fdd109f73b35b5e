// Command line front end: scenario ingestion, experiment orchestration, CSV
// and JSON reporting. Every output embeds the manifest hash so a run can be
// replayed bit for bit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfg/diffusion.hpp"
#include "mfg/dynamics.hpp"
#include "mfg/global.hpp"
#include "mfg/hetero.hpp"
#include "mfg/nplayer.hpp"
#include "mfg/relaxed.hpp"
#include "mfg/scenario.hpp"
#include "mfg/setvalue.hpp"

namespace {

using namespace mfg;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct Manifest {
  nlohmann::json j;

  Manifest(const std::string& command, const Scenario* sc, std::uint64_t seed) {
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = seed;
    if (sc) {
      j["scenario"] = sc->path;
      char hex[32];
      std::snprintf(hex, sizeof(hex), "%016llx",
                    static_cast<unsigned long long>(sc->hash));
      j["scenario_hash"] = hex;
    }
  }

  std::string hash() const {
    std::string dump = j.dump();
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64(std::span<const char>(dump.data(), dump.size()))));
    return hex;
  }
};

struct CsvWriter {
  std::ofstream out;

  CsvWriter(const fs::path& path, const Manifest& man, const std::string& header) {
    out.open(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << "# manifest=" << man.hash() << "\n" << header << "\n";
  }
  template <class... Ts>
  void row(Ts&&... cells) {
    bool first = true;
    ((out << (first ? "" : ","), first = false, out << cells), ...);
    out << "\n";
  }
};

void write_summary(const fs::path& dir, Manifest man, nlohmann::json results) {
  man.j["results"] = std::move(results);
  man.j["manifest_hash"] = man.hash();
  std::ofstream out(dir / "summary.json");
  out << man.j.dump(2) << "\n";
}

PureStateControl constant_state_control(const GameSpec& spec, int action_index) {
  ActionView a = spec.actions.at(action_index);
  return PureStateControl::constant(spec.T(), spec.d(), Action(a.begin(), a.end()));
}

std::vector<int> parse_n_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  if (out.empty()) throw ValidationError("empty N list");
  return out;
}

std::vector<double> parse_eps_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  if (out.empty()) throw ValidationError("empty eps list");
  return out;
}

int run_validate(const Scenario& sc, const fs::path& dir, Manifest man) {
  nlohmann::json res;
  if (sc.kind == Scenario::Kind::discrete) {
    ValidationReport rep = validate_game_spec(sc.game);
    res["accepted"] = rep.accepted;
    res["max_row_residual"] = rep.max_row_residual;
    res["min_q"] = rep.min_q;
    res["max_abs_F"] = rep.max_abs_F;
    res["max_abs_G"] = rep.max_abs_G;
    for (const auto& issue : rep.issues) res["issues"].push_back(issue.what);
    write_summary(dir, man, res);
    if (!rep.accepted) {
      std::cerr << "validation failed\n";
      return 2;
    }
  } else {
    DiffusionValidation rep = validate_diffusion_spec(sc.diff);
    res["accepted"] = rep.accepted;
    res["max_abs_b"] = rep.max_abs_b;
    res["max_abs_f"] = rep.max_abs_f;
    res["max_abs_g"] = rep.max_abs_g;
    res["max_slope"] = rep.max_slope;
    for (const auto& issue : rep.issues) res["issues"].push_back(issue);
    write_summary(dir, man, res);
    if (!rep.accepted) return 2;
  }
  std::cout << "scenario accepted\n";
  return 0;
}

int run_flow(const Scenario& sc, const fs::path& dir, Manifest man, int t0, int action_index) {
  const GameSpec& spec = sc.game;
  SimplexMeasure mu{std::vector<double>(sc.mu)};
  FlowRecord flow = measure_flow(spec, t0, mu, constant_state_control(spec, action_index));
  CsvWriter csv(dir / "flow.csv", man, "s,state,weight");
  for (int s = t0; s <= spec.T(); ++s)
    for (int x = 0; x < spec.d(); ++x)
      csv.row(s, spec.states.labels[static_cast<std::size_t>(x)], fmt(flow.at(s)[x]));
  write_summary(dir, man, {{"rows", (spec.T() - t0 + 1) * spec.d()}});
  return 0;
}

int run_value(const Scenario& sc, const fs::path& dir, Manifest man, int t0, int action_index,
              int grid_resolution) {
  GameSpec spec = sc.game;
  if (grid_resolution > 0) {
    if (spec.actions.kind != ActionSet::Kind::box)
      throw ValidationError("--grid-resolution needs a box action set");
    spec.actions = ActionSet::box_1d(spec.actions.lower[0], spec.actions.upper[0],
                                     grid_resolution);
  }
  SimplexMeasure mu{std::vector<double>(sc.mu)};
  FlowRecord flow = measure_flow(spec, t0, mu, constant_state_control(spec, action_index));
  ValueTable vt = value_v(spec, flow, t0);
  CsvWriter csv(dir / "value.csv", man, "s,state,value,argmin_action");
  for (int s = t0; s <= spec.T(); ++s)
    for (int x = 0; x < spec.d(); ++x)
      csv.row(s, spec.states.labels[static_cast<std::size_t>(x)], fmt(vt.at(s, x)),
              s < spec.T() ? fmt(spec.actions.at(vt.argmin_at(s, x))[0]) : "");
  write_summary(dir, man,
                {{"grid_points", spec.actions.size()}, {"v_t0_state0", vt.at(t0, 0)}});
  return 0;
}

int run_setvalue(const Scenario& sc, const fs::path& dir, Manifest man, int t0, double eps) {
  const GameSpec& spec = sc.game;
  SimplexMeasure mu{std::vector<double>(sc.mu)};
  SetValueResult sv = set_value_eps(spec, t0, mu, eps);
  CsvWriter csv(dir / "setvalue.csv", man, "generator,state,value,control_id,gap");
  for (std::size_t k = 0; k < sv.costs.generators.size(); ++k)
    for (int x = 0; x < spec.d(); ++x)
      csv.row(k, spec.states.labels[static_cast<std::size_t>(x)],
              fmt(sv.costs.generators[k].values[static_cast<std::size_t>(x)]),
              sv.costs.generators[k].provenance, fmt(sv.costs.generators[k].gap));
  write_summary(dir, man,
                {{"eps", eps}, {"generators", sv.costs.generators.size()}});
  return 0;
}

int run_dpp_check(const Scenario& sc, const fs::path& dir, Manifest man, int t0, int split,
                  const std::vector<double>& eps_list) {
  const GameSpec& spec = sc.game;
  SimplexMeasure mu{std::vector<double>(sc.mu)};
  DppReport rep = dpp_check(spec, t0, split, mu, eps_list);
  CsvWriter csv(dir / "dpp.csv", man, "eps,direction,worst_defect,inflation,pass");
  for (const auto& e : rep.entries) {
    csv.row(fmt(e.eps), "forward", fmt(e.forward.worst_defect), fmt(e.inflation),
            e.forward.pass ? 1 : 0);
    csv.row(fmt(e.eps), "backward", fmt(e.backward.worst_defect), fmt(e.inflation),
            e.backward.pass ? 1 : 0);
  }
  write_summary(dir, man, {{"all_pass", rep.all_pass()}});
  if (!rep.all_pass()) {
    std::cerr << "dpp inclusion failed\n";
    return 1;
  }
  return 0;
}

void serialize_gamma(const fs::path& path, const Manifest& man, const GameSpec& spec,
                     const RelaxedControl& gamma) {
  CsvWriter csv(path, man, "s,path,action_index,weight");
  for (int s = 0; s < spec.T(); ++s) {
    PathSpace sp{spec.d(), s};
    for (std::size_t p = 0; p < sp.size(); ++p)
      for (int ai = 0; ai < spec.actions.size(); ++ai)
        if (gamma.row(s, p)[static_cast<std::size_t>(ai)] > 0.0)
          csv.row(s, p, ai, fmt(gamma.row(s, p)[static_cast<std::size_t>(ai)]));
  }
}

void serialize_lambda(const fs::path& path, const Manifest& man, const GlobalMeasure& L) {
  CsvWriter csv(path, man, "atom,path,weight,descendant_actions");
  GlobalMeasure canon = L.canonical();
  for (std::size_t k = 0; k < canon.atoms.size(); ++k) {
    auto key = descendant_action_key(canon.atoms[k].alpha, canon.d, canon.t, canon.atoms[k].x);
    std::string keystr;
    for (double a : key) {
      if (!keystr.empty()) keystr += ";";
      keystr += fmt(a);
    }
    csv.row(k, canon.atoms[k].x, fmt(canon.atoms[k].weight), keystr);
  }
}

int run_relaxed(const Scenario& sc, const fs::path& dir, Manifest man, const std::string& mode,
                int t0, int split, const std::vector<double>& eps_list, int resolution,
                std::uint64_t seed) {
  const GameSpec& spec = sc.game;
  PathMeasure mu = PathMeasure::from_state_measure(SimplexMeasure{std::vector<double>(sc.mu)});
  RelaxedSetValueOptions opt;
  opt.resolution = resolution;

  if (mode == "transforms") {
    // round-trip identities on a deterministic pseudo-random relaxed control
    CounterRng rng(seed);
    RelaxedControl gamma = RelaxedControl::dirac_at(spec.T(), spec.d(), spec.actions.size(), 0);
    for (int s = 0; s < spec.T(); ++s) {
      PathSpace sp{spec.d(), s};
      for (std::size_t p = 0; p < sp.size(); ++p) {
        std::vector<double> row(static_cast<std::size_t>(spec.actions.size()));
        double total = 0.0;
        for (int ai = 0; ai < spec.actions.size(); ++ai) {
          row[static_cast<std::size_t>(ai)] =
              0.1 + rng.uniform(static_cast<std::uint64_t>(s), p,
                                static_cast<std::uint64_t>(ai), 0);
          total += row[static_cast<std::size_t>(ai)];
        }
        for (auto& w : row) w /= total;
        gamma.slot(s, p) = std::move(row);
      }
    }
    GlobalMeasure Lg = lambda_from_gamma(spec, t0, mu, gamma);
    RelaxedControl back = gamma_from_lambda(spec, Lg);
    double gamma_rt = 0.0;
    for (int s = t0; s < spec.T(); ++s) {
      PathSpace sp{spec.d(), s};
      for (std::size_t p = 0; p < sp.size(); ++p)
        gamma_rt = std::max(gamma_rt, sup_distance(back.row(s, p), gamma.row(s, p)));
    }
    PathFlowRecord f1 = relaxed_measure_flow(spec, t0, mu, gamma);
    PathFlowRecord f2 = lambda_measure_flow(spec, Lg);
    double flow_dist = 0.0;
    for (int s = t0; s <= spec.T(); ++s)
      flow_dist = std::max(flow_dist, w1_finite(f1.at(s), f2.at(s)));
    double lambda_rt = lambda_roundtrip_distance(spec, Lg);
    serialize_gamma(dir / "gamma.csv", man, spec, gamma);
    serialize_lambda(dir / "lambda.csv", man, Lg);
    write_summary(dir, man,
                  {{"gamma_roundtrip_supdist", gamma_rt},
                   {"flow_identity_w1", flow_dist},
                   {"lambda_roundtrip_distance", lambda_rt},
                   {"atoms", Lg.atoms.size()}});
    return 0;
  }
  if (mode == "equivalence") {
    StatePathEquivalenceReport rep =
        relax_state_path_equivalence(spec, SimplexMeasure{std::vector<double>(sc.mu)}, opt);
    write_summary(dir, man,
                  {{"equivalent", rep.equivalent()},
                   {"state_generators", rep.state_set.generators.size()},
                   {"path_generators", rep.path_set.generators.size()},
                   {"worst_projection_cost_gap", rep.worst_projection_cost_gap},
                   {"worst_projection_mfe_gap", rep.worst_projection_mfe_gap}});
    return rep.equivalent() ? 0 : 1;
  }
  if (mode == "dpp") {
    DppReport rep = relaxed_dpp_check(spec, t0, split, mu, eps_list, opt);
    CsvWriter csv(dir / "relaxed_dpp.csv", man, "eps,direction,worst_defect,inflation,pass");
    for (const auto& e : rep.entries) {
      csv.row(fmt(e.eps), "forward", fmt(e.forward.worst_defect), fmt(e.inflation),
              e.forward.pass ? 1 : 0);
      csv.row(fmt(e.eps), "backward", fmt(e.backward.worst_defect), fmt(e.inflation),
              e.backward.pass ? 1 : 0);
    }
    write_summary(dir, man, {{"all_pass", rep.all_pass()}});
    return rep.all_pass() ? 0 : 1;
  }
  throw ValidationError("unknown relaxed mode " + mode);
}

int run_nplayer(const Scenario& sc, const fs::path& dir, Manifest man, const std::string& mode,
                int t0, double eps, const std::vector<int>& n_list, int samples,
                std::uint64_t seed, unsigned threads, int action_index) {
  const GameSpec& spec = sc.game;
  SimplexMeasure mu{std::vector<double>(sc.mu)};
  MuControl alpha = MuControl::frozen(constant_state_control(spec, action_index));

  if (mode == "eq-check") {
    int N = n_list.empty() ? 4 : n_list[0];
    CounterRng rng(seed);
    NConfig cfg;
    for (std::uint64_t rep = 0;; ++rep) {
      cfg.start = mfg::detail::sample_start(mu, N, rng, rep);
      if (empirical_measure(cfg.start, spec.d()).full_support()) break;
    }
    cfg.seed = seed;
    auto family = grid_deviation_family(spec, t0);
    HomoEqReport rep = homo_eq_check(spec, t0, cfg, alpha, eps, family);
    CsvWriter csv(dir / "eq_check.csv", man, "player,state,gap,lower_gap");
    for (int i = 0; i < cfg.N(); ++i)
      csv.row(i, cfg.start[static_cast<std::size_t>(i)],
              fmt(rep.gaps[static_cast<std::size_t>(i)]),
              fmt(rep.lower_gaps[static_cast<std::size_t>(i)]));
    write_summary(dir, man, {{"verdict", rep.verdict}, {"max_gap", rep.max_gap()}});
    return rep.verdict ? 0 : 1;
  }
  if (mode == "set-value") {
    int N = n_list.empty() ? 4 : n_list[0];
    CounterRng rng(seed);
    NConfig cfg;
    for (std::uint64_t rep = 0;; ++rep) {
      cfg.start = mfg::detail::sample_start(mu, N, rng, rep);
      if (empirical_measure(cfg.start, spec.d()).full_support()) break;
    }
    SetValueApprox sv = nplayer_set_value(spec, t0, cfg, eps);
    CsvWriter csv(dir / "nplayer_setvalue.csv", man, "generator,state,value,gap");
    for (std::size_t k = 0; k < sv.generators.size(); ++k)
      for (int x = 0; x < spec.d(); ++x)
        csv.row(k, x, fmt(sv.generators[k].values[static_cast<std::size_t>(x)]),
                fmt(sv.generators[k].gap));
    write_summary(dir, man, {{"generators", sv.generators.size()}});
    return 0;
  }
  if (mode == "converge") {
    auto table = convergence_measures(spec, t0, mu, alpha, n_list, samples, seed, nullptr,
                                      threads);
    CsvWriter csv(dir / "convergence.csv", man, "N,s,estimate,ci,theta_init");
    for (const auto& row : table.rows)
      csv.row(row.N, row.s, fmt(row.estimate), fmt(row.ci), fmt(row.theta_init));
    write_summary(dir, man, {{"slope", table.slope}, {"r2", table.r2}});
    return 0;
  }
  throw ValidationError("unknown nplayer mode " + mode);
}

int run_hetero(const Scenario& sc, const fs::path& dir, Manifest man, const std::string& mode,
               int t0, double eps, const std::vector<int>& n_list, int samples,
               std::uint64_t seed, int resolution) {
  const GameSpec& spec = sc.game;
  PathMeasure mu = PathMeasure::from_state_measure(SimplexMeasure{std::vector<double>(sc.mu)});

  // search the lattice for the least-gap relaxed control
  RelaxedControlEnum en(spec, t0, resolution);
  RelaxedControl best = en.control(0);
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t id = 0; id < en.count(); ++id) {
    RelaxedControl g = en.control(id);
    double gap = relaxed_mfe_gap(spec, t0, mu, g).max_gap();
    if (gap < best_gap) {
      best_gap = gap;
      best = std::move(g);
    }
  }

  if (mode == "discretize") {
    DiscretizeReport rep = discretize_relaxed(spec, best, eps);
    serialize_gamma(dir / "gamma_eps.csv", man, spec, rep.gamma_eps);
    write_summary(dir, man,
                  {{"clusters", rep.representatives.size()}, {"gamma_gap", best_gap}});
    return 0;
  }
  if (mode == "lift") {
    GlobalMeasure Lg = lambda_from_gamma(spec, t0, mu, best);
    serialize_lambda(dir / "lambda.csv", man, Lg);
    GlobalMfeGap gap = global_mfe_gap(spec, Lg);
    write_summary(dir, man, {{"atoms", Lg.atoms.size()}, {"global_gap", gap.max_gap()}});
    return 0;
  }
  if (mode == "converge") {
    std::vector<MuPathControl> family;
    for (int ai = 0; ai < spec.actions.size(); ++ai) {
      ActionView a = spec.actions.at(ai);
      family.push_back(MuPathControl::frozen(
          PurePathControl::constant(spec.T(), spec.d(), Action(a.begin(), a.end()))));
    }
    PathGameOptions opt;
    opt.samples = samples;
    opt.seed = seed;
    auto rows = hetero_convergence_experiment(spec, t0, mu, best, eps, n_list, seed, family,
                                              opt);
    CsvWriter csv(dir / "hetero_convergence.csv", man,
                  "N,averaged_gap,sqrt_eps_fraction,chebyshev_ok,bar_lambda_gap,round_trip");
    for (const auto& row : rows)
      csv.row(row.N, fmt(row.averaged_gap), fmt(row.sqrt_eps_fraction),
              row.chebyshev_ok ? 1 : 0, fmt(row.bar_lambda_gap), fmt(row.round_trip_distance));
    bool cheb = true;
    for (const auto& row : rows) cheb = cheb && row.chebyshev_ok;
    write_summary(dir, man, {{"rows", rows.size()}, {"chebyshev_all", cheb}});
    return cheb ? 0 : 1;
  }
  throw ValidationError("unknown hetero mode " + mode);
}

int run_diffusion(const Scenario& sc, const fs::path& dir, Manifest man,
                  const std::string& mode, const std::vector<int>& n_list, int samples,
                  std::uint64_t seed, unsigned threads) {
  const DiffusionSpec& spec = sc.diff;
  TimedControl alpha = TimedControl::constant(spec, 0, 0.0);

  if (mode == "flow") {
    GridFlow flow = mkv_flow(spec, 0, sc.mu, alpha);
    CsvWriter csv(dir / "diffusion_flow.csv", man, "k,x,mass");
    int stride = std::max(1, spec.nt() / 8);
    for (int k = 0; k <= spec.nt(); k += stride)
      for (int i = 0; i < spec.nx; ++i)
        csv.row(k, fmt(spec.node(i)), fmt(flow.at(k)[static_cast<std::size_t>(i)]));
    double total = pairwise_sum(flow.at(spec.nt()));
    write_summary(dir, man, {{"terminal_mass", total}});
    return 0;
  }
  if (mode == "hjb") {
    GridFlow flow = mkv_flow(spec, 0, sc.mu, alpha);
    HjbSolution sol = hjb_solve(spec, flow, 0);
    CsvWriter csv(dir / "diffusion_hjb.csv", man, "x,value,feedback");
    for (int i = 0; i < spec.nx; ++i)
      csv.row(fmt(spec.node(i)), fmt(sol.at(0)[static_cast<std::size_t>(i)]),
              fmt(sol.feedback[0][static_cast<std::size_t>(i)]));
    write_summary(dir, man, {{"max_slope", sol.max_slope(spec.dx())}});
    return 0;
  }
  if (mode == "mfe-search") {
    auto cands = mfe_fixed_point(spec, 0, sc.mu, constant_control_seeds(spec, 0, 3), 60, 0.4);
    CsvWriter csv(dir / "diffusion_mfe.csv", man, "candidate,gap,converged,iterations");
    for (std::size_t k = 0; k < cands.size(); ++k)
      csv.row(k, fmt(cands[k].gap), cands[k].converged ? 1 : 0, cands[k].iterations);
    write_summary(dir, man, {{"candidates", cands.size()}});
    return 0;
  }
  if (mode == "converge") {
    auto table = cont_convergence_experiment(spec, 0, sc.mu, alpha, n_list, samples, seed, 0,
                                             4, threads);
    CsvWriter csv(dir / "diffusion_convergence.csv", man, "N,w1_max,ci,x_norm2");
    for (const auto& row : table.rows)
      csv.row(row.N, fmt(row.w1_max), fmt(row.w1_ci), fmt(row.x_norm2));
    write_summary(dir, man, {{"slope", table.slope}, {"r2", table.r2}});
    return 0;
  }
  throw ValidationError("unknown diffusion mode " + mode);
}

int run_example71(const fs::path& dir, Manifest man, double a0, double mu0) {
  Example71Report rep = example71_counterexample(a0, SimplexMeasure({mu0, 1.0 - mu0}));
  CsvWriter csv(dir / "example71.csv", man, "quantity,value");
  for (std::size_t k = 0; k < rep.state_values.size(); ++k)
    csv.row("state_value_" + std::to_string(k), fmt(rep.state_values[k]));
  csv.row("path_value", fmt(rep.path_value));
  csv.row("path_value_in_path_set", rep.path_value_in_path_set ? 1 : 0);
  csv.row("path_value_in_state_set", rep.path_value_in_state_set ? 1 : 0);
  csv.row("coincidence", rep.coincidence ? 1 : 0);
  write_summary(dir, man,
                {{"a0", a0},
                 {"mu0", mu0},
                 {"path_value", rep.path_value},
                 {"separates", rep.path_value_in_path_set && !rep.path_value_in_state_set},
                 {"coincidence", rep.coincidence}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"set values of mean field games on finite spaces"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir = "out", mode;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  int t0 = 0, split = 1, action_index = 0, grid_resolution = 0, samples = 10'000;
  int resolution = 2;
  double eps = 0.0, a0 = 0.25, mu0 = 0.3;
  std::string n_list_csv = "8,16,32,64,128,256,512";
  std::string eps_list_csv = "0,0.01,0.05";

  auto add_common = [&](CLI::App* cmd, bool needs_scenario = true) {
    if (needs_scenario)
      cmd->add_option("--scenario", scenario_path, "scenario file")->required();
    cmd->add_option("--out-dir", out_dir, "output directory");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--threads", threads, "worker cap (0 = auto); results identical");
  };

  auto* c_validate = app.add_subcommand("validate", "check a scenario file");
  add_common(c_validate);

  auto* c_flow = app.add_subcommand("flow", "population flow under a constant grid control");
  add_common(c_flow);
  c_flow->add_option("--t0", t0);
  c_flow->add_option("--action-index", action_index);

  auto* c_value = app.add_subcommand("value", "deviator value along the flow");
  add_common(c_value);
  c_value->add_option("--t0", t0);
  c_value->add_option("--action-index", action_index);
  c_value->add_option("--grid-resolution", grid_resolution,
                      "regenerate a box action grid with this many points");

  auto* c_setvalue = app.add_subcommand("setvalue", "raw or eps set value");
  add_common(c_setvalue);
  c_setvalue->add_option("--t0", t0);
  c_setvalue->add_option("--eps", eps);

  auto* c_dpp = app.add_subcommand("dpp-check", "set-value recursion inclusions");
  add_common(c_dpp);
  c_dpp->add_option("--t0", t0);
  c_dpp->add_option("--split", split, "intermediate time T0");
  c_dpp->add_option("--eps", eps_list_csv, "comma separated eps list");

  auto* c_relaxed = app.add_subcommand("relaxed", "relaxed-control machinery");
  add_common(c_relaxed);
  c_relaxed->add_option("--mode", mode, "transforms|equivalence|dpp")->required();
  c_relaxed->add_option("--t0", t0);
  c_relaxed->add_option("--split", split);
  c_relaxed->add_option("--eps", eps_list_csv);
  c_relaxed->add_option("--grid-resolution", resolution, "simplex lattice resolution");

  auto* c_nplayer = app.add_subcommand("nplayer", "homogeneous N-player machinery");
  add_common(c_nplayer);
  c_nplayer->add_option("--mode", mode, "eq-check|set-value|converge")->required();
  c_nplayer->add_option("--t0", t0);
  c_nplayer->add_option("--eps", eps);
  c_nplayer->add_option("--n-list", n_list_csv);
  c_nplayer->add_option("--samples", samples);
  c_nplayer->add_option("--action-index", action_index);

  auto* c_hetero = app.add_subcommand("hetero", "heterogeneous pipeline");
  add_common(c_hetero);
  c_hetero->add_option("--mode", mode, "lift|discretize|converge")->required();
  c_hetero->add_option("--t0", t0);
  c_hetero->add_option("--eps", eps);
  c_hetero->add_option("--n-list", n_list_csv);
  c_hetero->add_option("--samples", samples);
  c_hetero->add_option("--grid-resolution", resolution);

  auto* c_diff = app.add_subcommand("diffusion", "one-dimensional diffusion model");
  add_common(c_diff);
  c_diff->add_option("--mode", mode, "flow|hjb|mfe-search|converge")->required();
  c_diff->add_option("--n-list", n_list_csv);
  c_diff->add_option("--samples", samples);

  auto* c_ex71 = app.add_subcommand("example71", "the state-vs-path counterexample");
  add_common(c_ex71, false);
  c_ex71->add_option("--a0", a0);
  c_ex71->add_option("--mu0", mu0, "weight of the first state");

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out_dir);
    fs::path dir(out_dir);
    // the recorded command omits the output location, so replays into a
    // different directory stay byte-identical
    std::string command;
    for (int i = 1; i < argc; ++i) {
      std::string arg = argv[i];
      if (arg == "--out-dir") {
        ++i;
        continue;
      }
      if (!command.empty()) command += " ";
      command += arg;
    }

    Scenario sc;
    bool have_scenario = !scenario_path.empty();
    if (have_scenario) sc = load_scenario(scenario_path);
    Manifest man(command, have_scenario ? &sc : nullptr, seed);

    if (app.got_subcommand(c_validate)) return run_validate(sc, dir, man);
    if (app.got_subcommand(c_flow)) return run_flow(sc, dir, man, t0, action_index);
    if (app.got_subcommand(c_value))
      return run_value(sc, dir, man, t0, action_index, grid_resolution);
    if (app.got_subcommand(c_setvalue)) return run_setvalue(sc, dir, man, t0, eps);
    if (app.got_subcommand(c_dpp))
      return run_dpp_check(sc, dir, man, t0, split, parse_eps_list(eps_list_csv));
    if (app.got_subcommand(c_relaxed))
      return run_relaxed(sc, dir, man, mode, t0, split, parse_eps_list(eps_list_csv),
                         resolution, seed);
    if (app.got_subcommand(c_nplayer))
      return run_nplayer(sc, dir, man, mode, t0, eps, parse_n_list(n_list_csv), samples, seed,
                         threads, action_index);
    if (app.got_subcommand(c_hetero))
      return run_hetero(sc, dir, man, mode, t0, eps, parse_n_list(n_list_csv), samples, seed,
                        resolution);
    if (app.got_subcommand(c_diff))
      return run_diffusion(sc, dir, man, mode, parse_n_list(n_list_csv), samples, seed,
                           threads);
    if (app.got_subcommand(c_ex71)) return run_example71(dir, man, a0, mu0);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const SizeGuardExceeded& e) {
    std::cerr << "size guard: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
