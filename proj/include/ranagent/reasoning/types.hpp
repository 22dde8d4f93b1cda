#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ranagent/core/json_io.hpp"
#include "ranagent/sim/scenario.hpp"
#include "ranagent/sim/topology.hpp"
#include "ranagent/store/store.hpp"
#include "ranagent/tsa/deviation_table.hpp"

namespace ranagent::reasoning {

// Version of the hypothesis output shape published in schemas/.
inline constexpr std::string_view kSchemaVersion = "1";

enum class CauseKind {
  hardware_fault,
  config_regression,
  band_level_interference,
  cell_local_degradation,
  capacity_overload,
  unknown,
};
std::string_view to_string(CauseKind kind);
std::optional<CauseKind> parse_cause_kind(std::string_view text);

enum class ActionKind { revert_config_change, adjust_parameter, open_ticket };
std::string_view to_string(ActionKind kind);
std::optional<ActionKind> parse_action_kind(std::string_view text);

inline constexpr std::int64_t kDefaultEvaluationWindow = 8;  // intervals
inline constexpr double kDefaultGuardPercent = 10.0;

struct ProposedAction {
  std::string action_id;
  ActionKind kind = ActionKind::open_ticket;
  ElementRef target;
  std::string parameter;  // revert/adjust only
  double delta = 0.0;     // new - current
  double value = 0.0;     // value to set
  std::string cm_change_id;  // revert only: the change being undone
  std::string hypothesis_id;
  std::string guarded_kpi;
  std::int64_t evaluation_window = kDefaultEvaluationWindow;
  double guard_percent = kDefaultGuardPercent;

  bool changes_config() const { return kind != ActionKind::open_ticket; }
  bool operator==(const ProposedAction&) const = default;
};

struct Hypothesis {
  std::string id;
  CauseKind cause_kind = CauseKind::unknown;
  ElementRef scope;
  double confidence = 0.0;
  // "row:<id>", "alarm:<id>", "cm:<id>", "im:<node>", "precedent:<id>", "doc:<id>"
  std::vector<std::string> evidence_refs;
  std::optional<ProposedAction> proposed_action;

  bool operator==(const Hypothesis&) const = default;
};

enum class QueryKind { kpi, alarms, cm_history, inventory, precedents };
std::string_view to_string(QueryKind kind);
std::optional<QueryKind> parse_query_kind(std::string_view text);

struct FollowUpQuery {
  QueryKind kind = QueryKind::kpi;
  std::optional<store::KpiSelector> selector;  // kpi only
  std::optional<ElementRef> scope;             // alarms, cm_history, inventory, precedents
  Timestamp start = 0;
  Timestamp end = 0;
  std::string action_kind;  // precedents only
  std::string reason;
  std::string hypothesis_id;

  // Identity of the request, excluding reason and hypothesis.
  std::string key() const;
  bool operator==(const FollowUpQuery& other) const { return key() == other.key() && reason == other.reason; }
};

// Structural validation; throws Error(invalid_argument) with a field path.
void validate_query(const FollowUpQuery& query, const std::string& path = "query");

struct DocExcerpt {
  std::string doc_id;
  std::string passage;
  double score = 0.0;
};

struct QueryWindow {
  std::optional<ElementRef> scope;  // absent: whole network
  Timestamp start = 0;
  Timestamp end = 0;
};

// What has been looked at, so that absence of a finding can be told apart
// from absence of data.
struct Coverage {
  std::set<ElementRef> series;  // elements whose KPI series were analysed
  std::vector<QueryWindow> alarm_windows;
  std::vector<QueryWindow> cm_windows;

  bool empty() const { return series.empty() && alarm_windows.empty() && cm_windows.empty(); }
};

struct EvidenceBundle {
  std::shared_ptr<const sim::NetworkTopology> topology;
  Timestamp interval = kDefaultIntervalSeconds;
  tsa::DeviationTable deviation_table;
  std::vector<sim::FmAlarm> alarms;
  std::vector<sim::CmChange> recent_config_changes;
  std::vector<store::ImRecord> inventory;
  std::vector<store::OptimizationRecord> precedents;
  std::vector<DocExcerpt> doc_excerpts;
  std::map<std::string, sim::CellConfig> configs;  // current cell configuration
  Coverage coverage;

  // True when no member carries anything.
  bool empty() const;
  // Whether `ref` resolves to a member of this bundle.
  bool resolves(const std::string& ref) const;
};

// Union of two bundles over the same window; rows, alarms, changes and
// records are de-duplicated by id and the table is re-ranked.
EvidenceBundle merge(const EvidenceBundle& base, const EvidenceBundle& delta);

// Referenced elements exist in the topology; members lie in the table window.
// Throws Error(invalid_argument).
void validate_bundle(const EvidenceBundle& bundle);

struct Retirement {
  Hypothesis hypothesis;
  std::string reason;
  std::vector<std::string> superseded_by;
};

struct ReasoningOutput {
  std::vector<Hypothesis> hypotheses;
  std::vector<FollowUpQuery> queries;
  bool no_finding = false;
};

struct ReflectionOutput {
  std::vector<Hypothesis> hypotheses;
  std::vector<Retirement> retired;
};

enum class PassKind { initial, reflection, refinement };
std::string_view to_string(PassKind kind);
PassKind pass_kind_from_string(std::string_view text);

struct ReasoningPass {
  PassKind kind = PassKind::initial;
  std::string input_digest;
  std::vector<Hypothesis> hypotheses;
  std::vector<Retirement> retired;
  std::vector<FollowUpQuery> queries;
  std::string backend;
  double elapsed_ms = 0.0;  // wall clock; excluded from deterministic exports
};

class ReasoningTrace {
public:
  // The first pass must be initial, and only the first. Throws
  // Error(illegal_transition).
  void append(ReasoningPass pass);
  const std::vector<ReasoningPass>& passes() const { return passes_; }
  bool empty() const { return passes_.empty(); }

  // Every query emitted by any pass, in order.
  std::vector<FollowUpQuery> issued_queries() const;

private:
  std::vector<ReasoningPass> passes_;
};

// Unresolved hypotheses sit strictly inside this confidence band.
inline constexpr double kResolvedLow = 0.2;
inline constexpr double kResolvedHigh = 0.8;
bool is_unresolved(const Hypothesis& h);

// Confidence descending, then rule precedence, scope level and id.
void sort_hypotheses(std::vector<Hypothesis>& hypotheses);

Json to_json(const ProposedAction& action);
ProposedAction proposed_action_from_json(const Json& doc, const std::string& path = "action");
Json to_json(const Hypothesis& h);
Hypothesis hypothesis_from_json(const Json& doc, const std::string& path = "hypothesis");
Json to_json(const FollowUpQuery& q);
FollowUpQuery follow_up_query_from_json(const Json& doc, const std::string& path = "query");
Json to_json(const Retirement& r);
Json to_json(const EvidenceBundle& bundle);
// `with_timing` adds elapsed_ms; deterministic exports leave it out.
Json to_json(const ReasoningPass& pass, bool with_timing = false);
Json to_json(const ReasoningTrace& trace, bool with_timing = false);
ReasoningPass reasoning_pass_from_json(const Json& doc, const std::string& path = "pass");

Json element_json(const ElementRef& ref);
ElementRef element_from_json(const Json& doc, const std::string& path);

}  // namespace ranagent::reasoning
