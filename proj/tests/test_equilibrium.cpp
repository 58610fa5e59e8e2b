#include <catch2/catch_amalgamated.hpp>

#include "etruck/equilibrium.hpp"
#include "support/fixtures.hpp"

using namespace etruck;

namespace {

const Scenario& small() {
  static const Scenario sc = load_scenario(fixtures::data_path("small.json"));
  return sc;
}

const EquilibriumResult& small_result() {
  static const EquilibriumResult r = solve_equilibrium(small());
  return r;
}

/// Two zones sharing one load bus; trucks must drain and recharge to finish.
Scenario single_bus(int fleet) {
  ScenarioData d = fixtures::path_data(2, 6, 2, 1, {1, 2}, {2}, fleet);
  d.power.buses = {{1, BusKind::Load}};
  d.power.branches.clear();
  d.power.base_load.assign(6, {1.0});
  d.coupling.zone_to_bus = {{1, 1}, {2, 1}};
  return Scenario(d);
}

double max_abs(const PriceField& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("empty fleet reproduces the baseline", "[equilibrium]") {
  const Scenario sc = small().with_fleet(0);
  const EquilibriumResult r = solve_equilibrium(sc);
  CHECK(r.outer_trace.evaluations() == 1);
  CHECK(r.prices == r.baseline_lmp);
  CHECK(r.response == r.baseline_lmp);
  CHECK(max_abs(r.charging_load) == 0.0);
  CHECK(r.opf.total_cost == r.baseline_cost);
}

TEST_CASE("small scenario equilibrium", "[equilibrium]") {
  const Scenario& sc = small();
  const EquilibriumResult& r = small_result();
  const int T = sc.params().horizon;
  REQUIRE(r.outer_trace.converged);
  CHECK(r.outer_trace.evaluations() <= 50);
  CHECK((flatten(r.prices) - flatten(r.response)).norm() <= 1e-4);
  CHECK(r.prices.rows() == T);
  CHECK(r.prices.cols() == sc.num_load_buses());
  CHECK(r.inner_traces.size() >= static_cast<std::size_t>(r.outer_trace.evaluations()));
  for (const AATrace& t : r.inner_traces) CHECK(t.converged);
  CHECK(r.diagnostics.empty());

  SECTION("charging raises generation cost") { CHECK(r.opf.total_cost >= r.baseline_cost); }

  SECTION("charging load is bounded by the fleet") {
    const double cap = sc.params().fleet * sc.energy_per_step();
    CHECK(r.charging_load.minCoeff() >= 0.0);
    for (int t = 0; t < T; ++t) CHECK(r.charging_load.row(t).sum() <= cap * (1.0 + 1e-12));
    CHECK(r.charging_load.sum() > 0.0);
  }

  SECTION("reported quantities are self-consistent") {
    const StateSpace space(sc);
    CHECK(charging_load(sc, charging_flows(space, r.flow)) == r.charging_load);
    CHECK(charging_flows(space, r.flow) == r.charging_flow);
    CHECK(delivery_flows(space, r.flow) == r.delivery_flow);
    CHECK(window_demand(sc, r.delivery_flow) == r.demand);
    const OpfHorizon again = solve_opf_horizon(sc, sc.base_load() + r.charging_load);
    CHECK(again.lmp == r.response);
    CHECK(again.total_cost == r.opf.total_cost);
    CHECK(r.rewards.charging == charging_rewards(sc, r.prices));
    CHECK(conservation_residual(space, r.flow.x, sc.params().fleet) <= 1e-9);
  }

  SECTION("restart from perturbed prices lands at the same point") {
    EquilibriumOptions opt;
    PriceField p0 = r.baseline_lmp;
    p0.array() *= 1.05;
    opt.initial_prices = p0;
    const EquilibriumResult again = solve_equilibrium(sc, opt);
    CHECK(max_abs(again.prices - r.prices) <= 1e-3);
  }

  SECTION("worker count does not change the result") {
    EquilibriumOptions opt;
    opt.workers = 4;
    const EquilibriumResult par = solve_equilibrium(sc, opt);
    CHECK(par.prices == r.prices);
    CHECK(par.outer_trace.evaluations() == r.outer_trace.evaluations());
  }
}

TEST_CASE("charging on a single bus raises its price", "[equilibrium]") {
  const Scenario sc = single_bus(1000);
  const EquilibriumResult r = solve_equilibrium(sc);
  REQUIRE(r.outer_trace.converged);
  for (int t = 0; t < sc.params().horizon; ++t) {
    CHECK(r.response(t, 0) >= r.baseline_lmp(t, 0));
    if (r.charging_load(t, 0) > 1e-6) CHECK(r.response(t, 0) > r.baseline_lmp(t, 0));
  }
  CHECK(r.charging_load.sum() > 0.0);
}

TEST_CASE("uncongested grid keeps one price per step", "[equilibrium]") {
  const Scenario sc(fixtures::path_data(3, 6, 3, 2, {1, 3}, {2, 3}));
  const EquilibriumResult r = solve_equilibrium(sc);
  for (int t = 0; t < sc.params().horizon; ++t) {
    CHECK(std::abs(r.response(t, 0) - r.response(t, 1)) <= 1e-6);
    CHECK(std::abs(r.baseline_lmp(t, 0) - r.baseline_lmp(t, 1)) <= 1e-6);
  }
}

TEST_CASE("fleet larger than the grid can serve", "[equilibrium]") {
  const Scenario sc = single_bus(5000);
  try {
    solve_equilibrium(sc);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(e.step() == 0);
  }
}

TEST_CASE("loop failures carry their traces", "[equilibrium]") {
  const Scenario& sc = small();
  SECTION("inner") {
    EquilibriumOptions opt;
    AAConfig inner = elo_config(sc);
    inner.max_iter = 1;
    opt.inner = inner;
    try {
      solve_equilibrium(sc, opt);
      FAIL("expected EquilibriumError");
    } catch (const EquilibriumError& e) {
      REQUIRE(e.inner_traces().size() == 1);
      CHECK(e.inner_traces()[0].evaluations() == 2);
      CHECK(e.outer_trace().steps.empty());
    }
  }
  SECTION("outer") {
    EquilibriumOptions opt;
    AAConfig outer = equilibrium_config(sc);
    outer.max_iter = 1;
    opt.outer = outer;
    try {
      solve_equilibrium(sc, opt);
      FAIL("expected EquilibriumError");
    } catch (const EquilibriumError& e) {
      CHECK(e.outer_trace().evaluations() == 2);
      CHECK(e.inner_traces().size() == 2);
    }
  }
  SECTION("bad configuration") {
    EquilibriumOptions opt;
    AAConfig outer = equilibrium_config(sc);
    outer.relaxation = 0.0;
    opt.outer = outer;
    CHECK_THROWS_AS(solve_equilibrium(sc, opt), ValidationError);
  }
}
