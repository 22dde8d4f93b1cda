#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ranagent/sim/scenario.hpp"
#include "ranagent/sim/topology.hpp"

namespace ranagent::sim {

// Per-sample standard normal draw, addressable by (seed, cell, kpi, index).
// Sub-streams are derived by stable hashing, so adding a cell never
// perturbs another cell's noise.
double noise_draw(std::uint64_t seed, std::string_view cell, std::string_view kpi, std::int64_t index);

// Live state of one simulated network. Single writer; concurrent runs use
// separate instances.
class Simulation {
public:
  Simulation(std::shared_ptr<const NetworkTopology> topology, ScenarioSpec spec);

  const NetworkTopology& topology() const { return *topology_; }
  std::shared_ptr<const NetworkTopology> topology_ptr() const { return topology_; }
  const ScenarioSpec& spec() const { return spec_; }

  // Index of the next interval to be generated; now() is its timestamp.
  std::int64_t cursor() const { return cursor_; }
  Timestamp now() const { return cursor_ * spec_.interval_s; }

  // Generates the next `intervals` intervals (all cells x default KPIs),
  // ordered by timestamp, cell topology order, KPI order.
  std::vector<KpiSample> advance(std::int64_t intervals);

  const std::map<std::string, CellConfig>& configs() const { return configs_; }
  const CellConfig& config(const std::string& cell) const;

  // Applies an operator change effective from now(). Returns the CM change, or
  // nullopt for an identity change (same value; stream and version unchanged).
  // Error(out_of_bounds) leaves the state untouched.
  std::optional<CmChange> apply_config(const std::string& cell, std::string_view parameter, double value,
                                       std::string_view source = "action");

  // Changes applied so far, in order (scenario events and operator changes).
  const std::vector<CmChange>& cm_log() const { return cm_log_; }

  // Expected value without noise at (cell, kpi, index) given current configs;
  // exposed for tests.
  double sample_value(const std::string& cell, std::string_view kpi, std::int64_t index) const;

private:
  struct Binding {
    std::string cell;
    std::string parameter;
    double value = 0.0;
    Timestamp active_from = 0;
    std::vector<KpiEffect> effects;
  };

  void apply_due_events(Timestamp t);
  double effect_sum(const CellDescriptor& cell, std::string_view kpi, Timestamp t) const;

  std::shared_ptr<const NetworkTopology> topology_;
  ScenarioSpec spec_;
  std::int64_t cursor_ = 0;
  std::map<std::string, CellConfig> configs_;
  std::vector<CmChange> cm_log_;
  std::vector<Binding> bindings_;
  std::vector<std::size_t> pending_config_events_;
};

// Batch generation over the scenario horizon; equal inputs give identical output.
std::vector<KpiSample> generate_stream(const NetworkTopology& topology, const ScenarioSpec& spec);

}  // namespace ranagent::sim
