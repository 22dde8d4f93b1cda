#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "ranagent/core/json_io.hpp"
#include "ranagent/core/series.hpp"
#include "ranagent/sim/scenario.hpp"
#include "ranagent/sim/simulation.hpp"
#include "ranagent/sim/topology.hpp"

namespace ranagent::store {

struct KpiSelector {
  Level level = Level::cell;
  std::optional<std::vector<std::string>> element_ids;  // absent: all elements at `level`
  std::vector<std::string> kpis;
  Timestamp start = 0;
  Timestamp end = 0;                      // exclusive
  std::optional<ElementRef> peer_scope;   // expands to every child of this element at `level`
};

Json to_json(const KpiSelector& selector);
KpiSelector kpi_selector_from_json(const Json& doc, const std::string& path = "selector");

struct ImRecord {
  std::string element_id;  // node
  std::string vendor;
  std::string hardware_model;
  std::string software_version;
  Timestamp commissioned_at = 0;

  bool operator==(const ImRecord&) const = default;
};

Json to_json(const ImRecord& record);
ImRecord im_record_from_json(const Json& doc, const std::string& path = "record");

struct ConfigSnapshot {
  std::string snapshot_id;
  Timestamp taken_at = 0;
  std::map<std::string, sim::CellConfig> entries;
};

Json to_json(const ConfigSnapshot& snapshot);
ConfigSnapshot config_snapshot_from_json(const Json& doc, const std::string& path = "snapshot");

enum class Outcome { pending, confirmed, rolled_back };
std::string_view to_string(Outcome outcome);
Outcome outcome_from_string(std::string_view text);

struct OptimizationRecord {
  std::string record_id;
  Timestamp created_at = 0;
  ElementRef target;
  std::string action_kind;
  std::map<std::string, double> parameters_before;
  std::map<std::string, double> parameters_after;
  std::string hypothesis_id;
  Outcome outcome = Outcome::pending;
  std::map<std::string, double> kpi_delta;  // post - pre mean per KPI over the evaluation window
  std::string run_id;

  bool operator==(const OptimizationRecord&) const = default;
};

// Pending records carry no delta; confirmed and rolled-back records carry one
// for every default KPI. Throws Error(invalid_argument).
void validate_record(const OptimizationRecord& record);

Json to_json(const OptimizationRecord& record);
OptimizationRecord optimization_record_from_json(const Json& doc, const std::string& path = "record");

// Embedded store for PM samples, FM alarms, CM changes and snapshots, IM
// inventory and optimization records.
//
// In-memory by default; open() adds a directory where every write is appended
// as one line per record (PM as CSV, the rest as JSON lines) and replayed on
// the next open. A torn final line is ignored. Concurrent readers with a
// single writer.
class Store {
public:
  Store();
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  static std::unique_ptr<Store> open(const std::filesystem::path& directory);

  // Copy of all records in a fresh in-memory store.
  std::unique_ptr<Store> clone() const;

  // Sets the topology used for validation, hierarchy expansion and IM
  // defaults (one ImRecord per node). Existing records are kept.
  void set_topology(std::shared_ptr<const sim::NetworkTopology> topology, Timestamp interval_s);
  std::shared_ptr<const sim::NetworkTopology> topology() const;
  Timestamp interval() const;

  // Validates every sample before writing any. Duplicate (element, kpi,
  // timestamp) keys: last write wins. Returns samples.size().
  // Errors: Error(malformed_sample) with path "samples[i]".
  std::size_t ingest_pm(std::span<const sim::KpiSample> samples);

  // Series per (element, kpi), ascending, clipped to [start, end). Elements
  // above cell level without stored samples are aggregated from their cells.
  // Errors: Error(unknown_element), Error(unknown_kpi), Error(invalid_argument).
  SeriesMap query_kpi(const KpiSelector& selector) const;

  std::size_t pm_sample_count() const;
  // Distinct timestamps with any PM sample, ascending.
  std::vector<Timestamp> pm_timestamps() const;

  void ingest_fm(std::span<const sim::FmAlarm> alarms);
  // Alarms in [start, end); with a scope, only those on the scope, its
  // ancestors or its descendants. Ordered by timestamp, then id.
  std::vector<sim::FmAlarm> query_alarms(Timestamp start, Timestamp end,
                                         const std::optional<ElementRef>& scope = {}) const;

  void record_cm_changes(std::span<const sim::CmChange> changes);
  // Changes in [start, end) on cells inside the scope (all cells without one).
  std::vector<sim::CmChange> query_cm(Timestamp start, Timestamp end,
                                      const std::optional<ElementRef>& scope = {}) const;

  void put_inventory(const ImRecord& record);
  std::optional<ImRecord> inventory(const std::string& node_id) const;
  std::vector<ImRecord> inventory_all() const;
  // IM record of the node owning `element` (cell or node), if any.
  std::optional<ImRecord> inventory_for(const ElementRef& element) const;

  ConfigSnapshot snapshot_config(const std::map<std::string, sim::CellConfig>& configs, Timestamp taken_at);
  std::optional<ConfigSnapshot> snapshot(const std::string& snapshot_id) const;

  // Writes every snapshot value back through the simulation; only changed
  // parameters are applied (each bumps config_version). The resulting CM
  // changes are recorded. Returns the number of cells whose values changed.
  // Errors: Error(not_found) for an unknown snapshot id.
  std::size_t restore_config(const std::string& snapshot_id, sim::Simulation& simulation);

  void record_optimization(const OptimizationRecord& record);
  std::vector<OptimizationRecord> optimizations() const;

  // Records matching `action_kind` (any when empty): same target first, then
  // targets on the same hardware model (IM join), each newest first, up to
  // `limit`.
  std::vector<OptimizationRecord> query_precedents(const ElementRef& target, const std::string& action_kind,
                                                   std::size_t limit) const;

  // PM export in the CSV sample format, ordered by timestamp, element, kpi.
  std::string export_pm_csv() const;
  std::size_t import_pm_csv(const std::string& text);

private:
  struct State;
  std::unique_ptr<State> state_;
  mutable std::shared_mutex mutex_;

  void append_line(const std::string& file, const std::string& line);
  void load();
};

}  // namespace ranagent::store
