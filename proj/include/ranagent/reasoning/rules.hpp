#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ranagent/reasoning/types.hpp"

namespace ranagent::reasoning {

// Rule identifiers in precedence order (R1 wins).
enum class Rule : int { r1_hardware = 1, r2_config = 2, r3_band = 3, r4_cell_local = 4, r5_unknown = 5 };
std::string_view to_string(Rule rule);

inline constexpr double kConfidenceR1 = 0.9;
inline constexpr double kConfidenceR2 = 0.85;
inline constexpr double kConfidenceR3 = 0.8;
inline constexpr double kConfidenceR4 = 0.7;
inline constexpr double kConfidenceR5 = 0.3;
inline constexpr double kConfirmStep = 0.1;
inline constexpr double kConfirmCap = 0.95;

// Coincidence windows, in intervals.
inline constexpr std::int64_t kAlarmWindow = 2;      // |alarm - onset|
inline constexpr std::int64_t kCmLookback = 8;       // change up to 8 intervals before onset
inline constexpr std::int64_t kCmLookahead = 2;      // or 2 after, for onset estimation error
inline constexpr std::int64_t kCoincidenceWindow = 4;  // shifts on other cells
inline constexpr double kBandShare = 0.8;

Rule rule_for(CauseKind cause);
double base_confidence(Rule rule);
CauseKind cause_for(Rule rule);

// Outcome of the truth table for one finding.
struct RuleMatch {
  Rule rule = Rule::r5_unknown;
  ElementRef scope;
  std::vector<std::string> evidence_refs;  // includes the finding row
  std::optional<ProposedAction> action;
};

// Applies R1..R5 in precedence order to one table row.
RuleMatch evaluate_finding(const tsa::DeviationRow& row, const EvidenceBundle& bundle);

std::string hypothesis_id(CauseKind cause, const ElementRef& scope);

// Rule backend passes. Both are pure functions of their arguments.
ReasoningOutput rule_reason_initial(const EvidenceBundle& bundle);
ReflectionOutput rule_reflect(const EvidenceBundle& bundle, const std::vector<Hypothesis>& prior,
                              const EvidenceBundle& delta);

// Ordered follow-up templates for a hypothesis, given the bundle it came from.
std::vector<FollowUpQuery> query_templates(const Hypothesis& h, const EvidenceBundle& bundle);

// For every unresolved hypothesis, its first template not yet issued in the
// trace (nor earlier in this call). Empty when everything is resolved.
std::vector<FollowUpQuery> refine_queries(const ReasoningTrace& trace, const std::vector<Hypothesis>& hypotheses,
                                          const EvidenceBundle& bundle);

}  // namespace ranagent::reasoning
