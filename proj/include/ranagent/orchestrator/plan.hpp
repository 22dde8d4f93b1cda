#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ranagent/core/domain.hpp"
#include "ranagent/core/json_io.hpp"
#include "ranagent/sim/topology.hpp"

namespace ranagent::orchestrator {

enum class Mode { workflow, agent, agentic };
std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view text);  // throws Error(invalid_argument)

enum class GoalKind { investigate_degradation, minimize_latency, balance_load, reduce_energy };
std::string_view to_string(GoalKind kind);
GoalKind goal_kind_from_string(std::string_view text);

struct Intent {
  GoalKind goal = GoalKind::investigate_degradation;
  std::optional<ElementRef> scope;  // whole network when absent
  Timestamp start = 0;
  Timestamp end = 0;  // exclusive; 0 means "up to the end of the scenario data"

  bool operator==(const Intent&) const = default;
};

// Window non-empty (after resolving end = 0) and scope in the topology.
// Throws Error(invalid_argument) with a field path.
void validate_intent(const Intent& intent, const sim::NetworkTopology& topology);

Json to_json(const Intent& intent);
Intent intent_from_json(const Json& doc, const std::string& path = "intent");

enum class StepKind { query, analyze, reason, reflect, retrieve_precedents, consult_docs, propose, validate };
std::string_view to_string(StepKind kind);

struct PlanStep {
  std::string id;
  StepKind kind = StepKind::query;
  Json parameters = Json::object();
  std::vector<std::string> depends_on;
};

struct Plan {
  std::vector<PlanStep> steps;

  const PlanStep* find(const std::string& id) const;
};

// Every depends_on resolves and the graph is acyclic. Throws
// Error(invalid_argument).
void validate_plan(const Plan& plan);

// Step template per mode (see docs/plan_templates.md). Only
// investigate_degradation is implemented; other goals raise
// Error(unsupported_intent) listing the implemented kinds.
Plan decompose_intent(const Intent& intent, Mode mode, const std::string& context_digest);

Json to_json(const PlanStep& step);
Json to_json(const Plan& plan);

}  // namespace ranagent::orchestrator
