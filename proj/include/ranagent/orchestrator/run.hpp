#pragma once

#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "ranagent/orchestrator/memory.hpp"
#include "ranagent/orchestrator/messaging.hpp"
#include "ranagent/orchestrator/plan.hpp"
#include "ranagent/reasoning/backend.hpp"
#include "ranagent/sim/scenario.hpp"

namespace ranagent::orchestrator {

enum class RunStatus { running, awaiting_approval, validating, confirmed, rolled_back, completed, failed };
inline constexpr std::array<RunStatus, 7> kAllStatuses{RunStatus::running,   RunStatus::awaiting_approval,
                                                       RunStatus::validating, RunStatus::confirmed,
                                                       RunStatus::rolled_back, RunStatus::completed,
                                                       RunStatus::failed};
std::string_view to_string(RunStatus status);
RunStatus run_status_from_string(std::string_view text);
bool is_terminal(RunStatus status);
bool legal_transition(RunStatus from, RunStatus to);

enum class EventKind { status_change, pass_completed, message_sent, approval_requested, validation_result };
std::string_view to_string(EventKind kind);

struct EventRecord {
  std::string run_id;
  std::uint64_t seq = 0;  // per run, gapless from 1
  EventKind kind = EventKind::status_change;
  Json payload;
  double emitted_at = 0.0;  // unix seconds; not part of exported traces
};

Json to_json(const EventRecord& event, bool with_time = true);

enum class ApprovalMode { interactive, auto_approve, auto_reject };
std::string_view to_string(ApprovalMode mode);
ApprovalMode approval_mode_from_string(std::string_view text);

enum class Decision { approve, reject };
std::string_view to_string(Decision decision);
Decision decision_from_string(std::string_view text);

struct PendingApproval {
  std::string approval_id;
  std::string run_id;
  reasoning::ProposedAction action;
  reasoning::Hypothesis hypothesis;
  std::vector<std::string> precedent_ids;
  Timestamp requested_at = 0;  // simulated time
};

Json to_json(const PendingApproval& approval);

struct AgentLimits {
  int max_iterations = 3;
  int max_queries = 16;
};

struct RunRequest {
  std::string run_id;  // assigned by the orchestrator when empty
  Mode mode = Mode::agentic;
  Intent intent;
  sim::ScenarioSpec scenario;
  ApprovalMode approval_mode = ApprovalMode::interactive;
  AgentLimits limits;
  std::int64_t evaluation_window = reasoning::kDefaultEvaluationWindow;
  double guard_percent = reasoning::kDefaultGuardPercent;
  std::optional<reasoning::ExternalBackendConfig> external;  // rule backend when absent
  std::chrono::milliseconds agent_timeout{60000};

  // Decisions applied in order instead of waiting for the approval endpoint;
  // used by trace replay.
  std::vector<std::pair<Decision, std::string>> scripted_decisions;
  // Roles that swallow their requests; fault injection for tests.
  std::set<Role> unresponsive_roles;
};

// Everything that defines the run's behaviour (scenario included); the run id
// is left out so equal requests digest equally.
Json request_json(const RunRequest& request);
// Inverse of request_json; the scenario must be inline. Errors carry field paths.
RunRequest request_from_json(const Json& doc, const std::string& path = "request");

struct RunFailure {
  std::string step;
  std::string role;  // agent that failed or timed out, if any
  Errc code = Errc::internal;
  std::string message;
};

struct RunReport {
  tsa::DeviationTable deviation_table;
  std::vector<reasoning::Hypothesis> hypotheses;
  std::vector<reasoning::Retirement> retired;
  bool no_finding = false;
  int iterations = 0;
  std::string termination;  // resolved | no_queries | query_limit | limit | no_finding
  int queries_executed = 0;
  std::optional<PendingApproval> proposal;
  std::string action_status = "none";  // none | declined | ticket_opened | applied
  std::optional<ValidationOutcome> validation;
  std::optional<RunFailure> failure;
  std::map<std::string, sim::CellConfig> final_configs;
  std::size_t cm_changes_applied = 0;  // changes with source "action" or "restore"
  std::size_t memory_entries = 0;
};

Json to_json(const RunReport& report);

class RunEngine;

// Shared state of one run. Status, events and trace entries are appended by
// the run's own thread; approval decisions arrive from other threads and are
// serialized here.
class Run {
public:
  Run(std::string id, RunRequest request, std::vector<store::OptimizationRecord> precedents);

  const std::string& id() const { return id_; }
  Mode mode() const { return request_.mode; }
  const RunRequest& request() const { return request_; }

  RunStatus status() const;
  bool terminal() const { return is_terminal(status()); }

  // Events with seq >= from, in order.
  std::vector<EventRecord> events_from(std::uint64_t from) const;
  std::uint64_t event_count() const;
  // Waits until an event with seq >= from exists or the run is terminal.
  // Returns false on timeout.
  bool wait_for_event(std::uint64_t from, std::chrono::milliseconds timeout) const;
  // Waits for a terminal status; returns the status seen.
  RunStatus wait(std::chrono::milliseconds timeout = std::chrono::hours(24)) const;

  std::optional<PendingApproval> pending_approval() const;

  // The only way out of awaiting_approval for interactive runs.
  // Errors: Error(conflict) when the id is not this run's pending approval.
  void decide(const std::string& approval_id, Decision decision, const std::string& note);

  RunReport report() const;
  Plan plan() const;

  // JSON lines: header, then plan, steps, passes, messages, approvals and
  // events in the order they happened, then a footer once terminal. Timing
  // is excluded, so equal requests give equal bytes.
  std::vector<std::string> export_trace() const;

  // Summary for get_run.
  Json state_json() const;

  // Stops a run that is waiting for a decision without changing its status;
  // used on shutdown.
  void abandon();

private:
  friend class RunEngine;

  void emit(EventKind kind, Json payload);          // requires mu_
  void transition(RunStatus to, Json detail = {});  // requires mu_
  void add_entry(Json entry);                       // requires mu_
  void decide_locked(const std::string& approval_id, Decision decision, const std::string& note, bool automatic);

  std::string id_;
  RunRequest request_;
  std::vector<store::OptimizationRecord> precedents_;
  Json header_;
  Plan plan_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  RunStatus status_ = RunStatus::running;
  std::vector<EventRecord> events_;
  std::vector<Json> entries_;
  std::optional<PendingApproval> pending_;
  std::optional<std::pair<Decision, std::string>> decision_;
  RunReport report_;
  std::optional<std::string> footer_;
  bool abandoned_ = false;
};

// Starts and tracks runs. Each run owns its simulation, store and threads;
// confirmed and rolled-back outcomes feed the shared cross-run memory.
class Orchestrator {
public:
  explicit Orchestrator(std::shared_ptr<CrossRunMemory> memory = std::make_shared<CrossRunMemory>());
  ~Orchestrator();
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  // Validates the request and starts the run on its own thread.
  // Errors: Error(invalid_argument) with field paths, Error(unsupported_intent).
  std::shared_ptr<Run> start(RunRequest request);
  // start() followed by waiting for a terminal status.
  std::shared_ptr<Run> execute(RunRequest request);

  std::shared_ptr<Run> find(const std::string& run_id) const;  // nullptr when unknown
  std::vector<std::shared_ptr<Run>> runs() const;
  std::vector<PendingApproval> pending_approvals() const;
  // Errors: Error(conflict) for unknown or already-decided approvals.
  void decide(const std::string& approval_id, Decision decision, const std::string& note);

  CrossRunMemory& memory() { return *memory_; }

private:
  std::shared_ptr<CrossRunMemory> memory_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::vector<std::string> order_;
  std::vector<std::thread> threads_;
};

// Request validation shared by the orchestrator and the service.
void validate_request(const RunRequest& request);

struct ReplayResult {
  std::string run_id;
  RunStatus recorded = RunStatus::running;
  RunStatus replayed = RunStatus::running;
  bool identical = false;  // exported bytes match
  std::vector<std::string> lines;
};

// Re-executes a rule-backend trace from its header, feeding recorded approval
// decisions back in. Errors: Error(parse_error) for malformed traces,
// Error(invalid_argument) for traces of external-backend runs.
ReplayResult replay_trace(const std::vector<std::string>& lines);

}  // namespace ranagent::orchestrator
