#pragma once

#include <string>
#include <vector>

#include "ranagent/sim/scenario.hpp"

namespace ranagent::sim {

// Reference network used by the bundled scenarios: one cluster (k1), two
// regions (r1: n1-n3, r2: n4-n5), five gNodeBs with four cells each
// (c1..c20), two bands (n78, n28) and two sectors (s1, s2).
TopologySpec standard_topology();

// Event-free scenario over the standard topology.
ScenarioSpec base_scenario(std::string name, std::uint64_t seed, std::int64_t horizon = 672);

struct InjectedStep {
  std::string cell;
  std::string kpi;
  std::int64_t onset_index = 0;
  double magnitude_sigma = 0.0;
};

// One step of 5..8 sigma on a random cell/KPI at a random interval, all
// drawn from `seed`.
struct DetectionCase {
  ScenarioSpec scenario;
  InjectedStep injected;
};
DetectionCase detection_case(std::uint64_t seed, std::int64_t horizon = 672);

// Throughput drop of 5..8 sigma on every cell of one band.
struct BandFaultCase {
  ScenarioSpec scenario;
  std::string band;
  std::int64_t onset_index = 0;
};
BandFaultCase band_fault_case(std::uint64_t seed, std::int64_t horizon = 672);

// Scenario whose single cause maps to a known rule outcome.
struct SingleCauseCase {
  ScenarioSpec scenario;
  std::string expected_cause;  // hypothesis cause_kind
  ElementRef expected_scope;
};

SingleCauseCase cell_degradation_case(std::uint64_t seed, const std::string& cell, std::int64_t horizon = 672);
SingleCauseCase hardware_fault_case(std::uint64_t seed, const std::string& cell, std::int64_t horizon = 672);
SingleCauseCase config_regression_case(std::uint64_t seed, const std::string& cell, std::int64_t horizon = 672);
SingleCauseCase band_interference_case(std::uint64_t seed, const std::string& band, std::int64_t horizon = 672);

// Every cell of a node shifts together with no alarm or CM change; matches
// no specific rule.
ScenarioSpec ambiguous_node_scenario(std::uint64_t seed, const std::string& node, std::int64_t horizon = 672);

// Ten scenarios, each with one cause.
std::vector<SingleCauseCase> single_cause_suite();

// Cell-local degradation on c7 whose proposed tx-power step is scripted to
// change throughput by `effect_percent` of the baseline mean.
ScenarioSpec scripted_action_scenario(std::uint64_t seed, double effect_percent, std::int64_t horizon = 672);

}  // namespace ranagent::sim
