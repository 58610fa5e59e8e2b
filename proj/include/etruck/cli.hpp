#pragma once

// Command-line front end: solve, baseline, opf, mdp, synth.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "etruck/dcopf.hpp"
#include "etruck/equilibrium.hpp"
#include "etruck/pumdp.hpp"
#include "etruck/report.hpp"
#include "etruck/reward_design.hpp"
#include "etruck/scenario.hpp"
#include "etruck/scenario_io.hpp"
#include "etruck/synth.hpp"

namespace etruck {

inline constexpr const char* kToolVersion = "0.1.0";

namespace cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kInvalidInput = 1, kSolverFailure = 2 };

struct AAOverrides {
  std::optional<int> memory;
  std::optional<double> relaxation;
  std::optional<int> max_iter;

  void add(CLI::App* app, const std::string& prefix) {
    app->add_option("--" + prefix + "-memory", memory, "Anderson memory M_AA");
    app->add_option("--" + prefix + "-beta", relaxation, "Anderson relaxation beta_AA in (0, 1]");
    app->add_option("--" + prefix + "-max-iter", max_iter, "Anderson iteration cap");
  }

  AAConfig apply(AAConfig c) const {
    if (memory) c.memory = *memory;
    if (relaxation) c.relaxation = *relaxation;
    if (max_iter) c.max_iter = *max_iter;
    c.validate();
    return c;
  }
};

inline json aa_json(const AAConfig& c) {
  return {{"r_AA", c.regularization}, {"D_AA", c.safeguard_scale}, {"eps_AA", c.safeguard_decay},
          {"R_check", c.check_period}, {"M_AA", c.memory},          {"beta_AA", c.relaxation},
          {"tol", c.tolerance},        {"max_iter", c.max_iter}};
}

inline Scenario load_with_overrides(const std::string& path, std::optional<int> fleet, std::optional<double> tol_inner,
                                    std::optional<double> tol_outer) {
  ScenarioData d = load_scenario(path).data();
  if (fleet) d.params.fleet = *fleet;
  if (tol_inner) d.params.eps_inner = *tol_inner;
  if (tol_outer) d.params.eps_outer = *tol_outer;
  return Scenario(std::move(d));
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + dir.string());
}

inline json manifest_base(const std::string& command, const Scenario& sc, const json& config) {
  json m;
  m["tool"] = "etruck";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = fnv1a_hex(scenario_to_json(sc.data()).dump() + "|" + config.dump());
  return m;
}

/// Reward overrides for `mdp`: rows kind,t,zone,value with kind delivery or
/// charging; zone is a zone id. Unlisted entries keep their defaults.
inline void read_rewards_csv(const fs::path& path, const Scenario& sc, PriceField& delivery, PriceField& charging) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string(), "cannot open rewards file");
  std::string line;
  std::getline(in, line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != 4) throw ValidationError(where, "expected kind,t,zone,value");
    int t = 0, zone = 0;
    double value = 0.0;
    try {
      t = std::stoi(cells[1]);
      zone = sc.zone_index(std::stoi(cells[2]));
      value = std::stod(cells[3]);
    } catch (const std::exception& e) {
      throw ValidationError(where, e.what());
    }
    if (t < 0 || t >= sc.params().horizon) throw ValidationError(where, "t out of range");
    if (cells[0] == "delivery") {
      if (!sc.is_delivery(zone)) throw ValidationError(where, "not a delivery zone");
      delivery(t, sc.delivery_slot(zone)) = value;
    } else if (cells[0] == "charging") {
      if (!sc.is_charging(zone)) throw ValidationError(where, "not a charging zone");
      charging(t, sc.charging_slot(zone)) = value;
    } else {
      throw ValidationError(where, "kind must be delivery or charging");
    }
  }
}

inline int cmd_solve(const std::string& scenario_path, const fs::path& out, std::optional<int> fleet,
                     std::optional<double> tol_inner, std::optional<double> tol_outer, int workers, bool dump_mdp,
                     const AAOverrides& inner_ov, const AAOverrides& outer_ov, std::ostream& os, std::ostream& es) {
  const auto start = std::chrono::steady_clock::now();
  const Scenario sc = load_with_overrides(scenario_path, fleet, tol_inner, tol_outer);
  EquilibriumOptions opt;
  opt.inner = inner_ov.apply(elo_config(sc));
  opt.outer = outer_ov.apply(equilibrium_config(sc));
  opt.workers = workers;
  ensure_dir(out);
  const json config = {{"inner", aa_json(*opt.inner)}, {"outer", aa_json(*opt.outer)}};
  json manifest = manifest_base("solve", sc, config);
  auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  auto write_inner = [&](const std::vector<AATrace>& traces) {
    for (std::size_t i = 0; i < traces.size(); ++i)
      write_trace_csv(out / ("trace_inner_" + std::to_string(i) + ".csv"), traces[i]);
  };

  try {
    const EquilibriumResult r = solve_equilibrium(sc, opt);
    write_lmp_csv(out / "lmp.csv", sc, r.baseline_lmp, r.prices);
    write_charging_csv(out / "charging.csv", sc, r.charging_flow);
    write_delivery_csv(out / "delivery.csv", sc, r.demand, r.delivery_price);
    write_trace_csv(out / "trace_outer.csv", r.outer_trace);
    write_inner(r.inner_traces);
    if (dump_mdp) {
      const StateSpace space(sc);
      const RewardPair& mu = r.rewards;
      const auto u = assemble_rewards(space, expand_windows(sc, mu.delivery), mu.charging, sc.params().teleport_penalty);
      const ValueTable values = solve_values(space, u, workers);
      write_mdp_csv(out / "mdp.csv", sc, space, values, propagate_flows(space, values, sc.params().fleet));
    }
    manifest["status"] = "converged";
    manifest["outer_iterations"] = r.outer_trace.evaluations();
    manifest["outer_residual"] = r.outer_trace.final_residual();
    json inner = json::array();
    for (const AATrace& t : r.inner_traces) inner.push_back({{"evaluations", t.evaluations()}, {"residual", t.final_residual()}});
    manifest["inner"] = inner;
    manifest["num_states"] = r.num_states;
    manifest["num_actions"] = r.num_actions;
    manifest["generation_cost"] = {{"baseline", r.baseline_cost}, {"equilibrium", r.opf.total_cost}};
    manifest["diagnostics"] = r.diagnostics;
    for (const std::string& d : r.diagnostics) es << "warning: " << d << '\n';
    manifest["wall_time_s"] = seconds();
    write_json(out / "manifest.json", manifest);
    os << "converged after " << r.outer_trace.evaluations() << " outer evaluations, residual "
       << format_real(r.outer_trace.final_residual()) << '\n';
    return kOk;
  } catch (const EquilibriumError& e) {
    write_trace_csv(out / "trace_outer.csv", e.outer_trace());
    write_inner(e.inner_traces());
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    manifest["wall_time_s"] = seconds();
    write_json(out / "manifest.json", manifest);
    es << "error: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const InfeasibleError& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    manifest["wall_time_s"] = seconds();
    write_json(out / "manifest.json", manifest);
    es << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
}

inline int cmd_baseline(const std::string& scenario_path, const fs::path& out, int workers, std::ostream& os) {
  const auto start = std::chrono::steady_clock::now();
  const Scenario sc = load_scenario(scenario_path);
  ensure_dir(out);
  const OpfHorizon base = baseline_opf(sc, workers);
  write_price_csv(out / "baseline_lmp.csv", sc, base.lmp);
  json manifest = manifest_base("baseline", sc, json::object());
  manifest["status"] = "solved";
  manifest["generation_cost"] = base.total_cost;
  manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out / "manifest.json", manifest);
  os << "baseline generation cost " << format_real(base.total_cost) << '\n';
  return kOk;
}

inline int cmd_opf(const std::string& scenario_path, const fs::path& out, std::optional<int> step, std::ostream& os) {
  const Scenario sc = load_scenario(scenario_path);
  const int T = sc.params().horizon;
  if (step && (*step < 0 || *step >= T)) throw ValidationError("--t", "must lie in [0, " + std::to_string(T - 1) + "]");
  ensure_dir(out);
  const int first = step ? *step : 0, last = step ? *step : T - 1;
  for (int t = first; t <= last; ++t) {
    const Vector load = sc.base_load().row(t).transpose();
    const OpfInstance inst = make_opf_instance(sc, load);
    const OpfSolution sol = solve_opf(inst, {}, t);
    write_opf_csv(out / ("opf_t" + std::to_string(t) + ".csv"), inst, sol);
    const KktReport rep = kkt_diagnostics(inst, sol);
    os << "t=" << t << " cost " << format_real(sol.objective) << " kkt " << format_real(rep.stationarity)
       << (rep.licq ? "" : " (active constraints are linearly dependent)") << '\n';
  }
  return kOk;
}

inline int cmd_mdp(const std::string& scenario_path, const fs::path& out, const std::string& rewards_path,
                   std::optional<int> fleet, int workers, std::ostream& os) {
  const Scenario sc = load_with_overrides(scenario_path, fleet, std::nullopt, std::nullopt);
  const StateSpace space(sc);
  PriceField delivery = expand_windows(sc, initial_delivery_rewards(sc));
  PriceField charging = charging_rewards(sc, baseline_lmp(sc, workers));
  if (!rewards_path.empty()) read_rewards_csv(rewards_path, sc, delivery, charging);
  const auto u = assemble_rewards(space, delivery, charging, sc.params().teleport_penalty);
  const ValueTable values = solve_values(space, u, workers);
  const FlowVector flow = propagate_flows(space, values, sc.params().fleet);
  ensure_dir(out);
  write_mdp_csv(out / "mdp.csv", sc, space, values, flow);
  os << "states " << space.num_states() << " actions " << space.num_actions() << '\n';
  os << "V(s0) " << format_real(values.value[0]) << '\n';
  return kOk;
}

inline int cmd_synth(std::uint64_t seed, int zones, int buses, std::optional<int> horizon, std::optional<int> fleet,
                     const fs::path& out, std::ostream& os) {
  SynthOptions opt;
  if (horizon) opt.params.horizon = *horizon;
  if (fleet) opt.params.fleet = *fleet;
  const Scenario sc = synth_scenario(seed, zones, buses, opt);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  save_scenario(sc.data(), out);
  os << "wrote " << out.string() << " (" << sc.num_zones() << " zones, " << sc.num_buses() << " buses, "
     << sc.data().power.generators.size() << " generators)\n";
  return kOk;
}

}  // namespace cli

/// Runs the command line; returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
  CLI::App app{"Equilibrium of an e-truck logistics fleet and a DC-OPF power market"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::string scenario, out, rewards;
  std::optional<int> fleet, step, horizon;
  std::optional<double> tol_inner, tol_outer;
  int workers = 1, zones = 4, buses = 3;
  std::uint64_t seed = 0;
  bool dump_mdp = false;
  cli::AAOverrides inner_ov, outer_ov;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* solve = app.add_subcommand("solve", "Solve the coupled equilibrium and write all artifacts");
  common(solve);
  solve->add_option("--fleet", fleet, "Override the fleet size")->check(CLI::NonNegativeNumber);
  solve->add_option("--tol-inner", tol_inner, "Reward fixed-point tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--tol-outer", tol_outer, "Price fixed-point tolerance")->check(CLI::PositiveNumber);
  solve->add_flag("--dump-mdp", dump_mdp, "Also write mdp.csv at the equilibrium rewards");
  inner_ov.add(solve, "inner");
  outer_ov.add(solve, "outer");

  CLI::App* baseline = app.add_subcommand("baseline", "LMPs without e-truck charging");
  common(baseline);

  CLI::App* opf = app.add_subcommand("opf", "Per-step DC-OPF on the base load");
  common(opf);
  opf->add_option("--t", step, "Time step (default: all)");

  CLI::App* mdp = app.add_subcommand("mdp", "Solve the truck MDP for given rewards and dump values and flows");
  common(mdp);
  mdp->add_option("--rewards", rewards, "CSV kind,t,zone,value overriding default rewards")->check(CLI::ExistingFile);
  mdp->add_option("--fleet", fleet, "Override the fleet size")->check(CLI::NonNegativeNumber);

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic scenario");
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--zones", zones, "Number of logistics zones")->check(CLI::PositiveNumber);
  synth->add_option("--buses", buses, "Number of buses")->check(CLI::Range(2, 100000));
  synth->add_option("--horizon", horizon, "Time steps")->check(CLI::PositiveNumber);
  synth->add_option("--fleet", fleet, "Fleet size")->check(CLI::NonNegativeNumber);
  synth->add_option("--out", out, "Output scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, os, es);
  }

  try {
    if (*solve) {
      return cli::cmd_solve(scenario, out, fleet, tol_inner, tol_outer, workers, dump_mdp, inner_ov, outer_ov, os, es);
    }
    if (*baseline) return cli::cmd_baseline(scenario, out, workers, os);
    if (*opf) return cli::cmd_opf(scenario, out, step, os);
    if (*mdp) return cli::cmd_mdp(scenario, out, rewards, fleet, workers, os);
    if (*synth) return cli::cmd_synth(seed, zones, buses, horizon, fleet, out, os);
  } catch (const ValidationError& e) {
    es << "invalid input: " << e.what() << '\n';
    return cli::kInvalidInput;
  } catch (const ContractError& e) {
    es << "invalid input: " << e.what() << '\n';
    return cli::kInvalidInput;
  } catch (const Error& e) {
    es << "error: " << e.what() << '\n';
    return cli::kSolverFailure;
  }
  return cli::kInvalidInput;
}

}  // namespace etruck
