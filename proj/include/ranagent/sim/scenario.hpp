#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ranagent/core/domain.hpp"
#include "ranagent/core/json_io.hpp"
#include "ranagent/sim/topology.hpp"

namespace ranagent::sim {

struct KpiSample {
  std::string element_id;
  Level level = Level::cell;
  std::string kpi;
  Timestamp timestamp = 0;
  double value = 0.0;

  bool operator==(const KpiSample&) const = default;
};

enum class Severity { minor, major, critical };
std::string_view to_string(Severity severity);
Severity severity_from_string(std::string_view text);

struct FmAlarm {
  ElementRef element;
  Timestamp timestamp = 0;
  std::string code;
  Severity severity = Severity::major;

  std::string id() const;  // "<level>:<element>@<timestamp>:<code>"
  bool operator==(const FmAlarm&) const = default;
};

// One recorded CM parameter change on a cell.
struct CmChange {
  std::string cell;
  std::string parameter;
  Timestamp timestamp = 0;
  double old_value = 0.0;
  double new_value = 0.0;
  std::string source;  // "scenario", "action" or "restore"

  std::string id() const;  // "<cell>:<parameter>@<timestamp>#<source>"
  bool operator==(const CmChange&) const = default;
};

enum class EventKind { step_shift, transient_spike, linear_drift, config_change, fm_alarm };
std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view text);

// How an event magnitude is expressed.
enum class MagnitudeUnit { absolute, sigma, percent_of_mean };
std::string_view to_string(MagnitudeUnit unit);
MagnitudeUnit magnitude_unit_from_string(std::string_view text);

struct KpiEffect {
  std::string kpi;
  double delta = 0.0;
  MagnitudeUnit unit = MagnitudeUnit::absolute;
};

struct ScenarioEvent {
  EventKind kind = EventKind::step_shift;
  ElementRef target;
  std::optional<std::string> kpi;  // step/spike/drift only
  Timestamp onset = 0;
  double magnitude = 0.0;
  MagnitudeUnit unit = MagnitudeUnit::absolute;
  std::int64_t duration = 0;  // intervals; spike and drift only

  // config_change: parameter set to `value` at onset, with the KPI effects
  // that stay active while the cell keeps that value.
  std::string parameter;
  double value = 0.0;
  std::vector<KpiEffect> effects;

  // fm_alarm
  std::string alarm_code;
  Severity severity = Severity::major;
};

// Scripted response of a cell to an operator change: while `parameter`
// equals `value`, every effect applies.
struct ActionEffect {
  std::string cell;
  std::string parameter;
  double value = 0.0;
  std::vector<KpiEffect> effects;
};

struct KpiBaseline {
  double mean = 0.0;
  double diurnal_amplitude = 0.0;
  double noise_sigma = 0.0;
};

std::map<std::string, KpiBaseline> default_baseline();

struct ScenarioSpec {
  std::string name = "scenario";
  TopologySpec topology;
  std::int64_t horizon = 96;
  Timestamp interval_s = kDefaultIntervalSeconds;
  std::uint64_t seed = 1;
  std::map<std::string, KpiBaseline> baseline = default_baseline();
  std::vector<ScenarioEvent> events;
  std::vector<ActionEffect> action_effects;

  Timestamp horizon_end() const { return horizon * interval_s; }
};

// Converts an event magnitude into KPI units using the KPI baseline.
double resolve_magnitude(double magnitude, MagnitudeUnit unit, const KpiBaseline& baseline);

// Structural checks against the topology: event targets, KPI names,
// onset within horizon, baselines for every default KPI.
void validate_scenario(const ScenarioSpec& spec, const NetworkTopology& topology);

std::vector<FmAlarm> emit_fm_alarms(const ScenarioSpec& spec);

Json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const Json& doc);
ScenarioSpec load_scenario_file(const std::string& path);

Json to_json(const FmAlarm& alarm);
FmAlarm fm_alarm_from_json(const Json& doc, const std::string& path = "alarm");
Json to_json(const CmChange& change);
CmChange cm_change_from_json(const Json& doc, const std::string& path = "change");

// "timestamp,element_id,level,kpi,value" with 6 fractional digits.
std::string to_csv_line(const KpiSample& sample);
KpiSample sample_from_csv_line(std::string_view line);
inline constexpr std::string_view kCsvHeader = "timestamp,element_id,level,kpi,value";

}  // namespace ranagent::sim
