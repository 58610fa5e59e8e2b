#pragma once

// CSV and JSON artifacts. CSVs have a header row, LF line endings and reals
// printed with 17 significant digits so they round-trip exactly.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "etruck/anderson.hpp"
#include "etruck/dcopf.hpp"
#include "etruck/error.hpp"
#include "etruck/pumdp.hpp"
#include "etruck/scenario.hpp"

namespace etruck {

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write " + path.string());
    bool first = true;
    for (std::string_view h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }

  CsvWriter& cell(double v) { return raw(format_real(v)); }
  CsvWriter& cell(int v) { return raw(std::to_string(v)); }
  CsvWriter& cell(std::size_t v) { return raw(std::to_string(v)); }
  CsvWriter& cell(std::string_view v) { return raw(v); }
  void end_row() {
    out_ << '\n';
    fresh_ = true;
  }

 private:
  CsvWriter& raw(std::string_view v) {
    if (!fresh_) out_ << ',';
    out_ << v;
    fresh_ = false;
    return *this;
  }

  std::ofstream out_;
  bool fresh_ = true;
};

/// iter, residual, accepted (1 when the emitted point was the accelerated one).
inline void write_trace_csv(const std::filesystem::path& path, const AATrace& trace) {
  CsvWriter csv(path, {"iter", "residual", "accepted"});
  for (const AAStep& s : trace.steps) {
    csv.cell(s.iteration).cell(s.residual).cell(s.kind == AAStepKind::Accelerated ? 1 : 0);
    csv.end_row();
  }
}

inline void write_lmp_csv(const std::filesystem::path& path, const Scenario& sc, const PriceField& baseline,
                          const PriceField& equilibrium) {
  CsvWriter csv(path, {"t", "bus", "price_baseline", "price_equilibrium"});
  for (Eigen::Index t = 0; t < baseline.rows(); ++t) {
    for (int j = 0; j < sc.num_load_buses(); ++j) {
      csv.cell(static_cast<int>(t)).cell(sc.bus_id(sc.load_bus(j))).cell(baseline(t, j)).cell(equilibrium(t, j));
      csv.end_row();
    }
  }
}

inline void write_price_csv(const std::filesystem::path& path, const Scenario& sc, const PriceField& prices) {
  CsvWriter csv(path, {"t", "bus", "price"});
  for (Eigen::Index t = 0; t < prices.rows(); ++t) {
    for (int j = 0; j < sc.num_load_buses(); ++j) {
      csv.cell(static_cast<int>(t)).cell(sc.bus_id(sc.load_bus(j))).cell(prices(t, j));
      csv.end_row();
    }
  }
}

/// One row per (t, charging zone): trucks drawing energy and the load they add.
inline void write_charging_csv(const std::filesystem::path& path, const Scenario& sc, const PriceField& charging) {
  CsvWriter csv(path, {"t", "zone", "bus", "truck_steps", "load_pu"});
  const double e = sc.energy_per_step();
  for (Eigen::Index t = 0; t < charging.rows(); ++t) {
    for (int c = 0; c < sc.num_charging_zones(); ++c) {
      csv.cell(static_cast<int>(t))
          .cell(sc.zone_id(sc.charging_zone(c)))
          .cell(sc.bus_id(sc.load_bus(sc.charging_load_slot(c))))
          .cell(charging(t, c))
          .cell(e * charging(t, c));
      csv.end_row();
    }
  }
}

inline void write_delivery_csv(const std::filesystem::path& path, const Scenario& sc, const PriceField& demand,
                               const PriceField& price) {
  CsvWriter csv(path, {"window", "zone", "demand", "price"});
  for (Eigen::Index k = 0; k < demand.rows(); ++k) {
    for (int j = 0; j < sc.num_delivery_zones(); ++j) {
      csv.cell(static_cast<int>(k)).cell(sc.zone_id(sc.delivery_zone(j))).cell(demand(k, j)).cell(price(k, j));
      csv.end_row();
    }
  }
}

/// Per-bus dispatch of one time step; `binding` lists active limits at the bus
/// and on branches leaving it, separated by ';'.
inline void write_opf_csv(const std::filesystem::path& path, const OpfInstance& inst, const OpfSolution& sol) {
  const int n = inst.num_buses;
  std::vector<double> g(n, 0.0);
  std::vector<std::string> binding(n);
  auto note = [&](int bus, const std::string& what) {
    if (!binding[bus].empty()) binding[bus] += ';';
    binding[bus] += what;
  };
  constexpr double active = 1e-6;
  for (std::size_t k = 0; k < inst.generators.size(); ++k) {
    const OpfGenerator& gen = inst.generators[k];
    g[gen.bus] += sol.g(static_cast<Eigen::Index>(k));
    if (gen.p_max - sol.g(static_cast<Eigen::Index>(k)) <= active) note(gen.bus, "gen" + std::to_string(k) + ":max");
    else if (sol.g(static_cast<Eigen::Index>(k)) - gen.p_min <= active) note(gen.bus, "gen" + std::to_string(k) + ":min");
  }
  for (std::size_t e = 0; e < inst.branches.size(); ++e) {
    const OpfBranch& br = inst.branches[e];
    const double f = sol.flow(static_cast<Eigen::Index>(e));
    const std::string name = "line" + std::to_string(opf_bus_id(inst, br.from)) + "-" + std::to_string(opf_bus_id(inst, br.to));
    if (std::isfinite(br.flow_max) && br.flow_max - f <= active) note(br.from, name + ":max");
    if (std::isfinite(br.flow_min) && f - br.flow_min <= active) note(br.from, name + ":min");
  }
  CsvWriter csv(path, {"bus", "g", "theta", "lmp", "binding"});
  for (int b = 0; b < n; ++b) {
    csv.cell(opf_bus_id(inst, b)).cell(g[b]).cell(sol.theta(b)).cell(sol.lambda(b)).cell(binding[b]);
    csv.end_row();
  }
}

/// One row per (state, action) with the value table and the flow.
inline void write_mdp_csv(const std::filesystem::path& path, const Scenario& sc, const StateSpace& space,
                          const ValueTable& values, const FlowVector& flow) {
  CsvWriter csv(path, {"t", "zone", "soc", "deliveries", "charging", "action", "target", "V", "Q", "pi", "x"});
  for (std::size_t s = 0; s < space.num_states(); ++s) {
    const TruckState& st = space.state(s);
    for (std::size_t k = space.actions_begin(s); k < space.actions_end(s); ++k) {
      const TruckAction& a = space.action(k);
      const int target = a.kind == ActionKind::Move ? sc.zone_id(a.arg) : a.arg;
      csv.cell(st.t).cell(sc.zone_id(st.zone)).cell(st.soc).cell(st.deliveries).cell(st.charging);
      csv.cell(std::string_view(to_string(a.kind))).cell(target);
      csv.cell(values.value[s]).cell(values.q[k]).cell(values.policy[k]).cell(flow.x[k]);
      csv.end_row();
    }
  }
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace etruck
