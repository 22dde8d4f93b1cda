#include "ranagent/sim/suites.hpp"

#include <fmt/format.h>

#include "ranagent/core/json_io.hpp"

namespace ranagent::sim {

namespace {

// Portable seeded draws (std distributions are implementation-defined).
class Draws {
public:
  explicit Draws(std::uint64_t seed) : state_(mix64(seed ^ 0x5eedULL)) {}

  std::uint64_t next() { return mix64(state_++); }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(next() % span);
  }

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
    return lo + (hi - lo) * u;
  }

private:
  std::uint64_t state_;
};

ScenarioEvent step(ElementRef target, std::string_view kpi_name, std::int64_t onset_index, double sigmas,
                   Timestamp interval) {
  ScenarioEvent e;
  e.kind = EventKind::step_shift;
  e.target = std::move(target);
  e.kpi = std::string(kpi_name);
  e.onset = onset_index * interval;
  e.magnitude = sigmas;
  e.unit = MagnitudeUnit::sigma;
  return e;
}

std::string node_of(const std::string& cell) {
  const int index = std::stoi(cell.substr(1));
  return fmt::format("n{}", (index - 1) / 4 + 1);
}

}  // namespace

TopologySpec standard_topology() {
  TopologySpec spec;
  spec.bands = {"n28", "n78"};
  spec.sectors = {"s1", "s2"};
  spec.clusters = {"k1"};
  spec.regions = {{"r1", "k1"}, {"r2", "k1"}};
  const char* models[] = {"AAU-5613", "AAU-5613", "AAU-3911", "AAU-5613", "AAU-3911"};
  const char* vendors[] = {"vendor-a", "vendor-a", "vendor-b", "vendor-a", "vendor-b"};
  for (int n = 1; n <= 5; ++n) {
    TopologySpec::Node node;
    node.id = fmt::format("n{}", n);
    node.region = n <= 3 ? "r1" : "r2";
    node.inventory = InventoryInfo{vendors[n - 1], models[n - 1], n % 2 ? "22.1" : "23.0", 0};
    spec.nodes.push_back(node);
    for (int k = 1; k <= 4; ++k) {
      TopologySpec::Cell cell;
      cell.id = fmt::format("c{}", (n - 1) * 4 + k);
      cell.node = node.id;
      cell.band = k <= 2 ? "n78" : "n28";
      cell.sector = k % 2 ? "s1" : "s2";
      spec.cells.push_back(cell);
    }
  }
  return spec;
}

ScenarioSpec base_scenario(std::string name, std::uint64_t seed, std::int64_t horizon) {
  ScenarioSpec spec;
  spec.name = std::move(name);
  spec.topology = standard_topology();
  spec.horizon = horizon;
  spec.interval_s = kDefaultIntervalSeconds;
  spec.seed = seed;
  return spec;
}

DetectionCase detection_case(std::uint64_t seed, std::int64_t horizon) {
  Draws draws(seed);
  DetectionCase out;
  out.scenario = base_scenario(fmt::format("detection-{}", seed), seed, horizon);
  const auto kpis = default_kpis();
  out.injected.cell = fmt::format("c{}", draws.uniform_int(1, 20));
  out.injected.kpi = std::string(kpis[static_cast<std::size_t>(draws.uniform_int(0, 4))].name);
  out.injected.onset_index = draws.uniform_int(32, horizon - 32);
  const double size = draws.uniform(5.0, 8.0);
  out.injected.magnitude_sigma = (draws.next() & 1) ? size : -size;
  out.scenario.events.push_back(step({Level::cell, out.injected.cell}, out.injected.kpi,
                                     out.injected.onset_index, out.injected.magnitude_sigma,
                                     out.scenario.interval_s));
  return out;
}

BandFaultCase band_fault_case(std::uint64_t seed, std::int64_t horizon) {
  Draws draws(seed);
  BandFaultCase out;
  out.scenario = base_scenario(fmt::format("band-fault-{}", seed), seed, horizon);
  out.band = (draws.next() & 1) ? "n78" : "n28";
  out.onset_index = draws.uniform_int(96, horizon - 48);
  out.scenario.events.push_back(step({Level::band, out.band}, kpi::dl_throughput, out.onset_index,
                                     -draws.uniform(5.0, 8.0), out.scenario.interval_s));
  return out;
}

SingleCauseCase cell_degradation_case(std::uint64_t seed, const std::string& cell, std::int64_t horizon) {
  SingleCauseCase out;
  out.scenario = base_scenario(fmt::format("cell-degradation-{}-{}", cell, seed), seed, horizon);
  out.scenario.events.push_back(
      step({Level::cell, cell}, kpi::dl_throughput, horizon * 3 / 4, -6.5, out.scenario.interval_s));
  out.expected_cause = "cell_local_degradation";
  out.expected_scope = {Level::cell, cell};
  return out;
}

SingleCauseCase hardware_fault_case(std::uint64_t seed, const std::string& cell, std::int64_t horizon) {
  SingleCauseCase out;
  out.scenario = base_scenario(fmt::format("hardware-fault-{}-{}", cell, seed), seed, horizon);
  const std::int64_t onset = horizon * 2 / 3;
  out.scenario.events.push_back(
      step({Level::cell, cell}, kpi::dl_throughput, onset, -7.0, out.scenario.interval_s));
  ScenarioEvent alarm;
  alarm.kind = EventKind::fm_alarm;
  alarm.target = {Level::node, node_of(cell)};
  alarm.onset = (onset + 1) * out.scenario.interval_s;
  alarm.alarm_code = "RU_TX_FAULT";
  alarm.severity = Severity::critical;
  out.scenario.events.push_back(alarm);
  out.expected_cause = "hardware_fault";
  out.expected_scope = {Level::node, node_of(cell)};
  return out;
}

SingleCauseCase config_regression_case(std::uint64_t seed, const std::string& cell, std::int64_t horizon) {
  SingleCauseCase out;
  out.scenario = base_scenario(fmt::format("config-regression-{}-{}", cell, seed), seed, horizon);
  ScenarioEvent change;
  change.kind = EventKind::config_change;
  change.target = {Level::cell, cell};
  change.onset = (horizon * 3 / 4) * out.scenario.interval_s;
  change.parameter = std::string(param::tilt);
  change.value = 9.0;
  change.effects = {KpiEffect{std::string(kpi::dl_throughput), -35.0, MagnitudeUnit::percent_of_mean}};
  out.scenario.events.push_back(change);
  out.expected_cause = "config_regression";
  out.expected_scope = {Level::cell, cell};
  return out;
}

SingleCauseCase band_interference_case(std::uint64_t seed, const std::string& band, std::int64_t horizon) {
  SingleCauseCase out;
  out.scenario = base_scenario(fmt::format("band-interference-{}-{}", band, seed), seed, horizon);
  out.scenario.events.push_back(
      step({Level::band, band}, kpi::dl_throughput, horizon * 3 / 5, -6.0, out.scenario.interval_s));
  out.expected_cause = "band_level_interference";
  out.expected_scope = {Level::band, band};
  return out;
}

ScenarioSpec ambiguous_node_scenario(std::uint64_t seed, const std::string& node, std::int64_t horizon) {
  ScenarioSpec spec = base_scenario(fmt::format("ambiguous-{}-{}", node, seed), seed, horizon);
  spec.events.push_back(step({Level::node, node}, kpi::dl_throughput, horizon * 3 / 4, -6.5, spec.interval_s));
  return spec;
}

std::vector<SingleCauseCase> single_cause_suite() {
  return {
      cell_degradation_case(101, "c3"),     cell_degradation_case(102, "c10"),
      cell_degradation_case(103, "c17"),    hardware_fault_case(104, "c6"),
      hardware_fault_case(105, "c14"),      config_regression_case(106, "c2"),
      config_regression_case(107, "c19"),   band_interference_case(108, "n78"),
      band_interference_case(109, "n28"),   band_interference_case(110, "n78"),
  };
}

ScenarioSpec scripted_action_scenario(std::uint64_t seed, double effect_percent, std::int64_t horizon) {
  SingleCauseCase base = cell_degradation_case(seed, "c7", horizon);
  ScenarioSpec spec = std::move(base.scenario);
  spec.name = fmt::format("scripted-action-{}-{}", effect_percent >= 0 ? "improving" : "worsening", seed);
  const CellConfig defaults;
  spec.action_effects.push_back(ActionEffect{
      "c7", std::string(param::tx_power), defaults.tx_power_dbm + 1.0,
      {KpiEffect{std::string(kpi::dl_throughput), effect_percent, MagnitudeUnit::percent_of_mean}}});
  return spec;
}

}  // namespace ranagent::sim
