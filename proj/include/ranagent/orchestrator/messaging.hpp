#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ranagent/core/errors.hpp"
#include "ranagent/orchestrator/plan.hpp"
#include "ranagent/reasoning/types.hpp"
#include "ranagent/store/store.hpp"

namespace ranagent::orchestrator {

enum class Role { master, analysis, historical, documentation, validation };
inline constexpr std::array<Role, 5> kAllRoles{Role::master, Role::analysis, Role::historical, Role::documentation,
                                               Role::validation};
std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

enum class IntentTag {
  analyze_request,
  analysis_result,
  query_request,
  query_result,
  precedent_request,
  precedent_result,
  doc_request,
  doc_result,
  validate_request,
  validation_result,
  cancel,
  failure,
};
std::string_view to_string(IntentTag tag);

// Payloads, one per tag.
struct AnalyzeRequest {
  Intent intent;
};
struct AnalysisResult {
  reasoning::EvidenceBundle bundle;
};
struct QueryRequest {
  std::vector<reasoning::FollowUpQuery> queries;
};
struct QueryResult {
  reasoning::EvidenceBundle delta;
};
struct PrecedentRequest {
  struct Target {
    ElementRef element;
    std::string action_kind;
  };
  std::vector<Target> targets;
};
struct PrecedentResult {
  std::vector<store::OptimizationRecord> precedents;
  std::map<std::string, sim::CellConfig> configs;  // current configuration of the targets
};
struct DocRequest {
  std::string terms;
  std::size_t k = 3;
};
struct DocResult {
  std::vector<reasoning::DocExcerpt> excerpts;
  bool stopword_only = false;
};
struct ValidateRequest {
  reasoning::ProposedAction action;
};
struct ValidationOutcome {
  store::Outcome outcome = store::Outcome::confirmed;
  std::map<std::string, double> kpi_delta;
  std::string snapshot_id;
  std::string record_id;
  double baseline_mean = 0.0;  // guarded KPI, diurnal-adjusted
  double post_mean = 0.0;
  double change_percent = 0.0;  // signed; positive is an improvement
  bool restored = false;
};
struct ValidationResult {
  ValidationOutcome outcome;
};
struct Cancel {
  std::string reason;
};
// Reply of an agent whose task raised an error.
struct AgentFailure {
  Errc code = Errc::internal;
  std::string message;
};

using Payload = std::variant<AnalyzeRequest, AnalysisResult, QueryRequest, QueryResult, PrecedentRequest,
                             PrecedentResult, DocRequest, DocResult, ValidateRequest, ValidationResult, Cancel,
                             AgentFailure>;

// Tag whose payload type is held by `payload`.
IntentTag tag_of(const Payload& payload);

struct AgentMessage {
  std::string message_id;
  std::string correlation_id;  // run id
  Role sender = Role::master;
  Role recipient = Role::analysis;
  IntentTag tag = IntentTag::cancel;
  Payload payload = Cancel{};
  Timestamp sent_at = 0;  // simulated time
  std::string in_reply_to;
};

// sender != recipient and payload type matches the tag. Throws
// Error(invalid_argument).
void validate_message(const AgentMessage& message);

// Summary used for logs and exported traces (payload digests and counts
// rather than full bundles).
Json to_json(const AgentMessage& message);
Json payload_summary(const Payload& payload);
Json to_json(const ValidationOutcome& outcome);

struct Receipt {
  Role recipient = Role::analysis;
  std::size_t position = 0;  // 1-based enqueue position in the recipient's mailbox
};

// Per-run set of role mailboxes. Delivery is at most once into an ordered
// queue; each sender's messages keep their order.
class MessageBus {
public:
  void register_role(Role role);
  bool registered(Role role) const;

  // Errors: Error(unknown_recipient), Error(mailbox_closed), plus
  // validate_message failures.
  Receipt dispatch(const AgentMessage& message);

  // Blocks until a message for `role` satisfying `match` (any when empty)
  // arrives, the timeout passes (nullopt) or the bus closes (nullopt).
  std::optional<AgentMessage> receive(Role role, std::chrono::milliseconds timeout,
                                      const std::function<bool(const AgentMessage&)>& match = {});

  // Closes every mailbox; pending receivers wake up.
  void close();
  bool closed() const;

private:
  struct Mailbox {
    std::deque<AgentMessage> queue;
    std::size_t delivered = 0;
  };
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<Role, Mailbox> boxes_;
  bool closed_ = false;
};

}  // namespace ranagent::orchestrator
