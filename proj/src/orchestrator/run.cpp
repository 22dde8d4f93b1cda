#include "ranagent/orchestrator/run.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "ranagent/orchestrator/pipeline.hpp"
#include "ranagent/reasoning/rules.hpp"

namespace ranagent::orchestrator {

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::running: return "running";
    case RunStatus::awaiting_approval: return "awaiting_approval";
    case RunStatus::validating: return "validating";
    case RunStatus::confirmed: return "confirmed";
    case RunStatus::rolled_back: return "rolled_back";
    case RunStatus::completed: return "completed";
    case RunStatus::failed: return "failed";
  }
  return "failed";
}

RunStatus run_status_from_string(std::string_view text) {
  for (auto s : kAllStatuses) {
    if (to_string(s) == text) return s;
  }
  throw Error(Errc::invalid_argument, "unknown run status '" + std::string(text) + "'", "status");
}

bool is_terminal(RunStatus s) {
  return s == RunStatus::confirmed || s == RunStatus::rolled_back || s == RunStatus::completed ||
         s == RunStatus::failed;
}

bool legal_transition(RunStatus from, RunStatus to) {
  switch (from) {
    case RunStatus::running:
      return to == RunStatus::awaiting_approval || to == RunStatus::completed || to == RunStatus::failed;
    case RunStatus::awaiting_approval: return to == RunStatus::validating || to == RunStatus::completed;
    case RunStatus::validating: return to == RunStatus::confirmed || to == RunStatus::rolled_back;
    default: return false;
  }
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::status_change: return "status_change";
    case EventKind::pass_completed: return "pass_completed";
    case EventKind::message_sent: return "message_sent";
    case EventKind::approval_requested: return "approval_requested";
    case EventKind::validation_result: return "validation_result";
  }
  return "status_change";
}

Json to_json(const EventRecord& e, bool with_time) {
  Json j{{"run_id", e.run_id}, {"seq", e.seq}, {"kind", std::string(to_string(e.kind))}, {"payload", e.payload}};
  if (with_time) j["emitted_at"] = e.emitted_at;
  return j;
}

std::string_view to_string(ApprovalMode mode) {
  switch (mode) {
    case ApprovalMode::interactive: return "interactive";
    case ApprovalMode::auto_approve: return "auto_approve";
    case ApprovalMode::auto_reject: return "auto_reject";
  }
  return "interactive";
}

ApprovalMode approval_mode_from_string(std::string_view text) {
  for (auto m : {ApprovalMode::interactive, ApprovalMode::auto_approve, ApprovalMode::auto_reject}) {
    if (to_string(m) == text) return m;
  }
  throw Error(Errc::invalid_argument, "unknown approval mode '" + std::string(text) + "'", "approval_mode");
}

std::string_view to_string(Decision d) { return d == Decision::approve ? "approve" : "reject"; }

Decision decision_from_string(std::string_view text) {
  if (text == "approve") return Decision::approve;
  if (text == "reject") return Decision::reject;
  throw Error(Errc::invalid_argument, "decision must be approve or reject", "decision");
}

Json to_json(const PendingApproval& a) {
  return Json{{"approval_id", a.approval_id},
              {"run_id", a.run_id},
              {"action", reasoning::to_json(a.action)},
              {"hypothesis", reasoning::to_json(a.hypothesis)},
              {"precedent_ids", a.precedent_ids},
              {"requested_at", a.requested_at}};
}

Json request_json(const RunRequest& r) {
  Json roles = Json::array();
  for (auto role : r.unresponsive_roles) roles.push_back(std::string(to_string(role)));
  return Json{{"mode", std::string(to_string(r.mode))},
              {"intent", to_json(r.intent)},
              {"scenario", sim::to_json(r.scenario)},
              {"approval_mode", std::string(to_string(r.approval_mode))},
              {"limits", {{"max_iterations", r.limits.max_iterations}, {"max_queries", r.limits.max_queries}}},
              {"evaluation_window", r.evaluation_window},
              {"guard_percent", r.guard_percent},
              {"backend", r.external ? Json{{"kind", "external"}, {"external", reasoning::to_json(*r.external)}}
                                     : Json{{"kind", "rule"}}},
              {"agent_timeout_ms", r.agent_timeout.count()},
              {"unresponsive_roles", roles}};
}

RunRequest request_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "expected an object", path);
  RunRequest r;
  if (doc.contains("mode")) {
    try {
      r.mode = mode_from_string(require_string(doc, "mode", path));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), join_path(path, "mode"));
    }
  }
  r.intent = intent_from_json(doc.contains("intent") ? doc.at("intent") : Json::object(), join_path(path, "intent"));
  try {
    r.scenario = sim::scenario_from_json(require(doc, "scenario", path));
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), e.path().empty() ? join_path(path, "scenario") : join_path(join_path(path, "scenario"), e.path()));
  }
  if (doc.contains("approval_mode")) {
    try {
      r.approval_mode = approval_mode_from_string(require_string(doc, "approval_mode", path));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), join_path(path, "approval_mode"));
    }
  }
  if (auto it = doc.find("limits"); it != doc.end()) {
    const auto lp = join_path(path, "limits");
    if (!it->is_object()) throw Error(Errc::invalid_argument, "expected an object", lp);
    if (it->contains("max_iterations")) r.limits.max_iterations = static_cast<int>(require_int(*it, "max_iterations", lp));
    if (it->contains("max_queries")) r.limits.max_queries = static_cast<int>(require_int(*it, "max_queries", lp));
  }
  if (doc.contains("evaluation_window")) r.evaluation_window = require_int(doc, "evaluation_window", path);
  if (doc.contains("guard_percent")) r.guard_percent = require_number(doc, "guard_percent", path);
  if (auto it = doc.find("backend"); it != doc.end() && !it->is_null()) {
    const auto bp = join_path(path, "backend");
    const std::string kind = it->is_string() ? it->get<std::string>() : require_string(*it, "kind", bp);
    if (kind == "external") {
      if (!it->is_object() || !it->contains("external")) {
        auto env = reasoning::external_config_from_env();
        if (!env) throw Error(Errc::invalid_argument, "external backend requires a configured endpoint", bp);
        r.external = *env;
      } else {
        r.external = reasoning::external_config_from_json(it->at("external"), join_path(bp, "external"));
      }
    } else if (kind != "rule") {
      throw Error(Errc::invalid_argument, "backend must be rule or external", join_path(bp, "kind"));
    }
  }
  if (doc.contains("agent_timeout_ms")) {
    r.agent_timeout = std::chrono::milliseconds(require_int(doc, "agent_timeout_ms", path));
  }
  if (auto it = doc.find("unresponsive_roles"); it != doc.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      try {
        r.unresponsive_roles.insert(role_from_string(it->at(i).get<std::string>()));
      } catch (const std::exception& e) {
        throw Error(Errc::invalid_argument, e.what(), index_path(join_path(path, "unresponsive_roles"), i));
      }
    }
  }
  return r;
}

void validate_request(const RunRequest& r) {
  const auto topology = sim::build_topology(r.scenario.topology);
  try {
    sim::validate_scenario(r.scenario, topology);
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), e.path().empty() ? "scenario" : "scenario." + e.path());
  }
  Intent resolved = r.intent;
  if (resolved.end == 0) resolved.end = r.scenario.horizon_end();
  try {
    validate_intent(resolved, topology);
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), e.path().empty() ? "intent" : e.path());
  }
  if (resolved.end > r.scenario.horizon_end()) {
    throw Error(Errc::invalid_argument, "intent window ends after the scenario data", "intent.end");
  }
  if (r.intent.goal != GoalKind::investigate_degradation) decompose_intent(r.intent, r.mode, "");
  if (r.limits.max_iterations < 1) throw Error(Errc::invalid_argument, "max_iterations must be >= 1", "limits.max_iterations");
  if (r.limits.max_queries < 0) throw Error(Errc::invalid_argument, "max_queries must be >= 0", "limits.max_queries");
  if (r.evaluation_window < 1) throw Error(Errc::invalid_argument, "evaluation_window must be >= 1", "evaluation_window");
  if (!(r.guard_percent > 0.0)) throw Error(Errc::invalid_argument, "guard_percent must be > 0", "guard_percent");
  if (r.agent_timeout.count() <= 0) throw Error(Errc::invalid_argument, "agent timeout must be > 0", "agent_timeout_ms");
  if (r.external && r.external->endpoint.empty()) {
    throw Error(Errc::invalid_argument, "external backend requires a configured endpoint", "backend.external.endpoint");
  }
}

Json to_json(const RunReport& r) {
  Json hyps = Json::array();
  for (const auto& h : r.hypotheses) hyps.push_back(reasoning::to_json(h));
  Json retired = Json::array();
  for (const auto& x : r.retired) retired.push_back(reasoning::to_json(x));
  Json configs = Json::object();
  for (const auto& [cell, c] : r.final_configs) {
    configs[cell] = {{"tx_power_dbm", c.tx_power_dbm},
                     {"electrical_tilt_deg", c.electrical_tilt_deg},
                     {"handover_offset_db", c.handover_offset_db},
                     {"config_version", c.config_version}};
  }
  Json j{{"deviation_table", tsa::to_json(r.deviation_table)},
         {"hypotheses", hyps},
         {"retired", retired},
         {"no_finding", r.no_finding},
         {"iterations", r.iterations},
         {"termination", r.termination},
         {"queries_executed", r.queries_executed},
         {"proposal", r.proposal ? to_json(*r.proposal) : Json(nullptr)},
         {"action_status", r.action_status},
         {"validation", r.validation ? to_json(*r.validation) : Json(nullptr)},
         {"failure", nullptr},
         {"final_configs", configs},
         {"cm_changes_applied", r.cm_changes_applied},
         {"memory_entries", r.memory_entries}};
  if (r.failure) {
    j["failure"] = {{"step", r.failure->step},
                    {"role", r.failure->role},
                    {"code", std::string(to_string(r.failure->code))},
                    {"message", r.failure->message}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Run

namespace {

double wall_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

Run::Run(std::string id, RunRequest request, std::vector<store::OptimizationRecord> precedents)
    : id_(std::move(id)), request_(std::move(request)), precedents_(std::move(precedents)) {
  Json recs = Json::array();
  for (const auto& r : precedents_) recs.push_back(store::to_json(r));
  header_ = Json{{"type", "header"},
                 {"format", "ranagent-trace/1"},
                 {"run_id", id_},
                 {"request", request_json(request_)},
                 {"precedents", recs}};
  std::lock_guard lock(mu_);
  emit(EventKind::status_change, Json{{"from", nullptr}, {"to", "running"}});
}

void Run::add_entry(Json entry) { entries_.push_back(std::move(entry)); }

void Run::emit(EventKind kind, Json payload) {
  EventRecord e{id_, events_.size() + 1, kind, std::move(payload), wall_seconds()};
  add_entry(Json{{"type", "event"}, {"event", to_json(e, false)}});
  events_.push_back(std::move(e));
  cv_.notify_all();
}

void Run::transition(RunStatus to, Json detail) {
  if (!legal_transition(status_, to)) {
    throw Error(Errc::illegal_transition,
                "illegal transition " + std::string(to_string(status_)) + " -> " + std::string(to_string(to)), "status");
  }
  Json payload = detail.is_object() ? std::move(detail) : Json::object();
  payload["from"] = std::string(to_string(status_));
  payload["to"] = std::string(to_string(to));
  // The event is in the stream before the new status is observable.
  emit(EventKind::status_change, std::move(payload));
  status_ = to;
  cv_.notify_all();
}

RunStatus Run::status() const {
  std::lock_guard lock(mu_);
  return status_;
}

std::vector<EventRecord> Run::events_from(std::uint64_t from) const {
  std::lock_guard lock(mu_);
  std::vector<EventRecord> out;
  for (std::size_t i = from > 0 ? from - 1 : 0; i < events_.size(); ++i) out.push_back(events_[i]);
  return out;
}

std::uint64_t Run::event_count() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

bool Run::wait_for_event(std::uint64_t from, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return events_.size() >= from || footer_.has_value(); });
}

RunStatus Run::wait(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return footer_.has_value(); });
  return status_;
}

std::optional<PendingApproval> Run::pending_approval() const {
  std::lock_guard lock(mu_);
  return pending_;
}

void Run::decide(const std::string& approval_id, Decision decision, const std::string& note) {
  std::lock_guard lock(mu_);
  decide_locked(approval_id, decision, note, false);
}

void Run::decide_locked(const std::string& approval_id, Decision decision, const std::string& note, bool automatic) {
  if (!pending_ || pending_->approval_id != approval_id || status_ != RunStatus::awaiting_approval) {
    throw Error(Errc::conflict, "approval " + approval_id + " is unknown or already decided", "approval_id");
  }
  add_entry(Json{{"type", "approval"},
                 {"approval_id", approval_id},
                 {"decision", std::string(to_string(decision))},
                 {"note", note},
                 {"automatic", automatic}});
  const bool applies = decision == Decision::approve && pending_->action.changes_config();
  decision_ = {decision, note};
  pending_.reset();
  if (applies) transition(RunStatus::validating, Json{{"approval_id", approval_id}});
  cv_.notify_all();
}

RunReport Run::report() const {
  std::lock_guard lock(mu_);
  return report_;
}

Plan Run::plan() const {
  std::lock_guard lock(mu_);
  return plan_;
}

std::vector<std::string> Run::export_trace() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> lines;
  lines.reserve(entries_.size() + 2);
  lines.push_back(canonical_dump(header_));
  for (const auto& e : entries_) lines.push_back(canonical_dump(e));
  if (footer_) lines.push_back(*footer_);
  return lines;
}

Json Run::state_json() const {
  std::lock_guard lock(mu_);
  Json hyps = Json::array();
  for (const auto& h : report_.hypotheses) hyps.push_back(reasoning::to_json(h));
  Json j{{"run_id", id_},
         {"mode", std::string(to_string(request_.mode))},
         {"status", std::string(to_string(status_))},
         {"terminal", is_terminal(status_)},
         {"events", events_.size()},
         {"pending_approval", pending_ ? to_json(*pending_) : Json(nullptr)},
         {"hypotheses", hyps},
         {"no_finding", report_.no_finding},
         {"iterations", report_.iterations},
         {"termination", report_.termination},
         {"action_status", report_.action_status},
         {"validation", report_.validation ? to_json(*report_.validation) : Json(nullptr)},
         {"failure", nullptr}};
  if (report_.failure) {
    j["failure"] = {{"step", report_.failure->step},
                    {"role", report_.failure->role},
                    {"code", std::string(to_string(report_.failure->code))},
                    {"message", report_.failure->message}};
  }
  return j;
}

void Run::abandon() {
  std::lock_guard lock(mu_);
  abandoned_ = true;
  cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Engine

namespace {

struct AgentTimeout : Error {
  AgentTimeout(Role role, std::chrono::milliseconds t)
      : Error(Errc::timeout,
              std::string(to_string(role)) + " agent did not answer within " + std::to_string(t.count()) +
                  " ms (retried once)",
              "role"),
        role(role) {}
  Role role;
};

struct AgentError : Error {
  AgentError(Role role, Errc code, const std::string& message) : Error(code, message), role(role) {}
  Role role;
};

struct Abandoned {};

Json hypotheses_memory(const std::vector<reasoning::Hypothesis>& hs) {
  Json out = Json::array();
  for (const auto& h : hs) {
    out.push_back({{"id", h.id}, {"cause_kind", std::string(reasoning::to_string(h.cause_kind))},
                   {"confidence", h.confidence}});
  }
  return out;
}

std::string doc_terms(const std::vector<reasoning::Hypothesis>& hs) {
  std::set<std::string> words;
  std::string out;
  auto add = [&](std::string w) {
    for (auto& ch : w) {
      if (ch == '_') ch = ' ';
    }
    if (words.insert(w).second) out += (out.empty() ? "" : " ") + w;
  };
  for (const auto& h : hs) {
    add(std::string(reasoning::to_string(h.cause_kind)));
    if (h.proposed_action) {
      add(std::string(reasoning::to_string(h.proposed_action->kind)));
      if (!h.proposed_action->parameter.empty()) add(h.proposed_action->parameter);
      if (h.proposed_action->changes_config()) add("rollback guard");
    }
  }
  return out;
}

}  // namespace

class RunEngine {
public:
  RunEngine(std::shared_ptr<Run> run, std::shared_ptr<CrossRunMemory> memory)
      : run_(std::move(run)), memory_(std::move(memory)), req_(run_->request()) {}

  void execute() {
    try {
      backend_ = reasoning::make_backend(req_.external);
      const Plan plan = decompose_intent(req_.intent, req_.mode, digest_of(request_json(req_)));
      {
        std::lock_guard lock(run_->mu_);
        run_->plan_ = plan;
        run_->add_entry(Json{{"type", "plan"}, {"plan", to_json(plan)}});
      }
      step_ = "setup";
      ctx_ = std::make_unique<RunContext>(req_.scenario, run_->precedents_);
      switch (req_.mode) {
        case Mode::workflow: run_workflow(); break;
        case Mode::agent: run_agent(); break;
        case Mode::agentic: run_agentic(); break;
      }
    } catch (const Abandoned&) {
      shutdown_agents();
      return;
    } catch (const AgentTimeout& e) {
      fail(e.code(), e.what(), std::string(to_string(e.role)));
    } catch (const AgentError& e) {
      fail(e.code(), e.what(), std::string(to_string(e.role)));
    } catch (const Error& e) {
      fail(e.code(), e.path().empty() ? e.what() : std::string(e.what()) + " (at " + e.path() + ")", "");
    } catch (const std::exception& e) {
      fail(Errc::internal, e.what(), "");
    }
  }

private:
  // -- trace helpers -------------------------------------------------------

  Timestamp now() const { return sim_time_; }

  void record_step(const std::string& id, int iteration, const std::string& agent, Json detail = Json::object()) {
    const PlanStep* s = plan_step(id);
    std::lock_guard lock(run_->mu_);
    run_->add_entry(Json{{"type", "step"},
                         {"step", id},
                         {"kind", s ? std::string(to_string(s->kind)) : std::string()},
                         {"iteration", iteration},
                         {"agent", agent},
                         {"detail", std::move(detail)}});
  }

  const PlanStep* plan_step(const std::string& id) {
    std::lock_guard lock(run_->mu_);
    for (const auto& s : run_->plan_.steps) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }

  void record_pass(reasoning::ReasoningPass pass, int iteration) {
    const std::size_t index = trace_.passes().size() + 1;
    trace_.append(pass);
    const Json summary = reasoning::to_json(pass, false);
    memory_log_.append(iteration, MemoryKind::pass, now(), Json{{"index", index}, {"kind", summary["kind"]}});
    memory_log_.append(iteration, MemoryKind::hypotheses, now(), hypotheses_memory(pass.hypotheses));
    Json top = nullptr;
    if (!pass.hypotheses.empty()) {
      const auto& h = pass.hypotheses.front();
      top = {{"id", h.id}, {"cause_kind", std::string(reasoning::to_string(h.cause_kind))},
             {"confidence", h.confidence}};
    }
    std::lock_guard lock(run_->mu_);
    run_->add_entry(Json{{"type", "pass"}, {"index", index}, {"iteration", iteration}, {"pass", summary}});
    run_->emit(EventKind::pass_completed, Json{{"index", index},
                                               {"kind", summary["kind"]},
                                               {"iteration", iteration},
                                               {"hypotheses", pass.hypotheses.size()},
                                               {"retired", pass.retired.size()},
                                               {"queries", pass.queries.size()},
                                               {"top", top}});
    run_->report_.hypotheses = hyps_;
    run_->report_.iterations = iteration;
  }

  // -- reasoning -----------------------------------------------------------

  template <class F>
  auto timed(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = f();
    elapsed_ms_ = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

  void initial_pass(int iteration) {
    step_ = "reason";
    auto out = timed([&] { return backend_->reason_initial(bundle_); });
    hyps_ = out.hypotheses;
    no_finding_ = out.no_finding || out.hypotheses.empty();
    add_pending(out.queries);
    record_pass({reasoning::PassKind::initial, digest_of(reasoning::to_json(bundle_)), out.hypotheses, {},
                 out.queries, backend_->name(), elapsed_ms_},
                iteration);
  }

  void reflection_pass(const reasoning::EvidenceBundle& delta, int iteration) {
    auto merged = reasoning::merge(bundle_, delta);
    auto out = timed([&] { return backend_->reflect(merged, hyps_, delta); });
    bundle_ = std::move(merged);
    hyps_ = out.hypotheses;
    retired_.insert(retired_.end(), out.retired.begin(), out.retired.end());
    record_pass({reasoning::PassKind::reflection, digest_of(reasoning::to_json(delta)), out.hypotheses, out.retired,
                 {}, backend_->name(), elapsed_ms_},
                iteration);
  }

  void refinement_pass(int iteration) {
    auto qs = timed([&] { return reasoning::refine_queries(trace_, hyps_, bundle_); });
    add_pending(qs);
    record_pass({reasoning::PassKind::refinement, digest_of(reasoning::to_json(bundle_)), hyps_, {}, qs,
                 backend_->name(), elapsed_ms_},
                iteration);
  }

  void add_pending(const std::vector<reasoning::FollowUpQuery>& qs) {
    for (const auto& q : qs) {
      const auto key = q.key();
      if (executed_keys_.count(key)) continue;
      if (std::any_of(pending_.begin(), pending_.end(), [&](const auto& p) { return p.key() == key; })) continue;
      pending_.push_back(q);
    }
  }

  // Removes up to `budget` pending queries (all when negative) and logs them.
  std::vector<reasoning::FollowUpQuery> take_pending(int budget, int iteration) {
    std::size_t n = pending_.size();
    if (budget >= 0) n = std::min<std::size_t>(n, static_cast<std::size_t>(budget));
    std::vector<reasoning::FollowUpQuery> batch(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
    for (const auto& q : batch) {
      executed_keys_.insert(q.key());
      Json j = reasoning::to_json(q);
      j["key"] = q.key();
      memory_log_.append(iteration, MemoryKind::query, now(), std::move(j));
    }
    queries_executed_ += static_cast<int>(n);
    return batch;
  }

  bool all_resolved() const {
    return std::none_of(hyps_.begin(), hyps_.end(), [](const auto& h) { return reasoning::is_unresolved(h); });
  }

  std::optional<std::string> stop_reason(int iteration) const {
    if (hyps_.empty()) return "no_finding";
    if (all_resolved()) return "resolved";
    if (iteration >= req_.limits.max_iterations) return "limit";
    if (queries_executed_ >= req_.limits.max_queries) return "query_limit";
    if (pending_.empty()) return "no_queries";
    return std::nullopt;
  }

  Json queries_json(const std::vector<reasoning::FollowUpQuery>& qs) const {
    Json out = Json::array();
    for (const auto& q : qs) out.push_back(reasoning::to_json(q));
    return out;
  }

  // -- modes ---------------------------------------------------------------

  void local_query_and_analyze(bool with_inventory) {
    step_ = "query";
    const auto data = query_step(*ctx_, req_.intent);
    record_step("query", 1, "run", Json{{"series", data.pm.size()}, {"alarms", data.alarms.size()},
                                        {"cm_changes", data.changes.size()}});
    step_ = "analyze";
    bundle_ = analyze_step(*ctx_, req_.intent, data, with_inventory);
    record_step("analyze", 1, "run", Json{{"rows", bundle_.deviation_table.rows.size()}});
  }

  void run_workflow() {
    sim_time_ = ctx_->simulation().now();
    local_query_and_analyze(false);
    initial_pass(1);
    record_step("reason", 1, "run", Json{{"hypotheses", hyps_.size()}});
    if (!no_finding_) {
      step_ = "reflect-context";
      reflection_pass(inventory_delta(*ctx_, hyps_), 1);
      record_step("reflect-context", 1, "run");
      refinement_pass(1);
      step_ = "follow-up";
      const auto batch = take_pending(-1, 1);
      const auto delta = execute_queries(*ctx_, batch);
      record_step("follow-up", 1, "run", Json{{"queries", queries_json(batch)}});
      step_ = "reflect";
      reflection_pass(delta, 1);
      record_step("reflect", 1, "run");
    }
    finish(RunStatus::completed, no_finding_ ? "no_finding" : "completed", 1);
  }

  void run_agent() {
    sim_time_ = ctx_->simulation().now();
    local_query_and_analyze(false);
    initial_pass(1);
    record_step("reason", 1, "run", Json{{"hypotheses", hyps_.size()}});
    int iteration = 1;
    auto reason = stop_reason(iteration);
    while (!reason) {
      ++iteration;
      step_ = "follow-up";
      const auto batch = take_pending(req_.limits.max_queries - queries_executed_, iteration);
      const auto delta = execute_queries(*ctx_, batch);
      record_step("follow-up", iteration, "run", Json{{"queries", queries_json(batch)}});
      step_ = "reflect";
      reflection_pass(delta, iteration);
      refinement_pass(iteration);
      record_step("reflect", iteration, "run");
      reason = stop_reason(iteration);
    }
    finish(RunStatus::completed, *reason, iteration);
  }

  // -- agentic -------------------------------------------------------------

  std::string next_message_id() { return run_->id() + "/m" + std::to_string(++message_seq_); }

  void log_message(const AgentMessage& m) {
    std::lock_guard lock(run_->mu_);
    run_->add_entry(Json{{"type", "message"}, {"message", to_json(m)}});
    run_->emit(EventKind::message_sent, Json{{"message_id", m.message_id},
                                             {"sender", std::string(to_string(m.sender))},
                                             {"recipient", std::string(to_string(m.recipient))},
                                             {"tag", std::string(to_string(m.tag))}});
  }

  std::string send(Role to, const Payload& payload) {
    AgentMessage m;
    m.message_id = next_message_id();
    m.correlation_id = run_->id();
    m.sender = Role::master;
    m.recipient = to;
    m.tag = tag_of(payload);
    m.payload = payload;
    m.sent_at = now();
    bus_.dispatch(m);
    log_message(m);
    return m.message_id;
  }

  // Waits for the reply to `id`; on timeout re-sends once.
  AgentMessage await_reply(Role from, const Payload& request, std::string id) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      if (attempt == 1) id = send(from, request);
      auto reply = bus_.receive(Role::master, req_.agent_timeout,
                                [&](const AgentMessage& m) { return m.in_reply_to == id; });
      if (reply) {
        log_message(*reply);
        if (const auto* f = std::get_if<AgentFailure>(&reply->payload)) throw AgentError(from, f->code, f->message);
        return *reply;
      }
    }
    throw AgentTimeout(from, req_.agent_timeout);
  }

  AgentMessage call(Role to, const Payload& payload) { return await_reply(to, payload, send(to, payload)); }

  Payload handle(Role role, const AgentMessage& m) {
    switch (role) {
      case Role::analysis:
        if (const auto* a = std::get_if<AnalyzeRequest>(&m.payload)) {
          const auto data = query_step(*ctx_, a->intent);
          return AnalysisResult{analyze_step(*ctx_, a->intent, data, true)};
        }
        if (const auto* q = std::get_if<QueryRequest>(&m.payload)) return QueryResult{execute_queries(*ctx_, q->queries)};
        break;
      case Role::historical:
        if (const auto* p = std::get_if<PrecedentRequest>(&m.payload)) return retrieve_precedents(*ctx_, *p);
        break;
      case Role::documentation:
        if (const auto* d = std::get_if<DocRequest>(&m.payload)) return consult_docs(*d);
        break;
      case Role::validation:
        if (const auto* v = std::get_if<ValidateRequest>(&m.payload)) {
          return ValidationResult{validate_and_guard(*ctx_, v->action, run_->id())};
        }
        break;
      case Role::master: break;
    }
    return AgentFailure{Errc::invalid_argument,
                        std::string(to_string(role)) + " agent cannot handle " + std::string(to_string(m.tag))};
  }

  void worker(Role role) {
    const bool silent = req_.unresponsive_roles.count(role) > 0;
    while (true) {
      auto m = bus_.receive(role, std::chrono::milliseconds(500));
      if (!m) {
        if (bus_.closed()) return;
        continue;
      }
      if (silent || m->tag == IntentTag::cancel) continue;
      Payload reply;
      try {
        reply = handle(role, *m);
      } catch (const Error& e) {
        reply = AgentFailure{e.code(), e.what()};
      } catch (const std::exception& e) {
        reply = AgentFailure{Errc::internal, e.what()};
      }
      AgentMessage out;
      out.message_id = m->message_id + "/reply";
      out.correlation_id = run_->id();
      out.sender = role;
      out.recipient = Role::master;
      out.tag = tag_of(reply);
      out.payload = std::move(reply);
      out.sent_at = m->sent_at;
      out.in_reply_to = m->message_id;
      try {
        bus_.dispatch(out);
      } catch (const Error&) {
        return;  // run finished meanwhile
      }
    }
  }

  void start_agents() {
    for (auto role : kAllRoles) bus_.register_role(role);
    for (auto role : kAllRoles) {
      if (role != Role::master) workers_.emplace_back([this, role] { worker(role); });
    }
  }

  void shutdown_agents() {
    if (workers_.empty()) return;
    bus_.close();
    for (auto& t : workers_) t.join();
    workers_.clear();
    // Replies that arrived after their request was retried still belong in
    // the message log.
    while (auto m = bus_.receive(Role::master, std::chrono::milliseconds(0))) log_message(*m);
  }

  void run_agentic() {
    sim_time_ = ctx_->simulation().now();
    start_agents();

    step_ = "query";
    const auto analysis = call(Role::analysis, AnalyzeRequest{req_.intent});
    bundle_ = std::get<AnalysisResult>(analysis.payload).bundle;
    ctx_->set_analysis_cache(bundle_.deviation_table);
    record_step("query", 1, "analysis");
    record_step("analyze", 1, "analysis", Json{{"rows", bundle_.deviation_table.rows.size()}});

    initial_pass(1);
    record_step("reason", 1, "master", Json{{"hypotheses", hyps_.size()}});
    if (no_finding_) {
      finish_agentic(RunStatus::completed, "no_finding", 1);
      return;
    }

    // Historical and documentation agents work concurrently; replies are
    // taken in a fixed order so the log does not depend on scheduling.
    step_ = "precedents";
    PrecedentRequest pr;
    std::set<std::pair<ElementRef, std::string>> seen;
    for (const auto& h : hyps_) {
      const ElementRef target = h.proposed_action ? h.proposed_action->target : h.scope;
      const std::string kind = h.proposed_action ? std::string(reasoning::to_string(h.proposed_action->kind)) : "";
      if (seen.insert({target, kind}).second) pr.targets.push_back({target, kind});
    }
    const Payload doc_request = DocRequest{doc_terms(hyps_), 3};
    const std::string pr_id = send(Role::historical, pr);
    const std::string doc_id = send(Role::documentation, doc_request);
    const auto precedents = await_reply(Role::historical, pr, pr_id);
    record_step("precedents", 1, "historical");
    step_ = "docs";
    const auto docs = await_reply(Role::documentation, doc_request, doc_id);
    record_step("docs", 1, "documentation");

    reasoning::EvidenceBundle context;
    context.topology = bundle_.topology;
    context.interval = bundle_.interval;
    context.deviation_table.window_start = bundle_.deviation_table.window_start;
    context.deviation_table.window_end = bundle_.deviation_table.window_end;
    const auto& prec = std::get<PrecedentResult>(precedents.payload);
    context.precedents = prec.precedents;
    context.configs = prec.configs;
    context.doc_excerpts = std::get<DocResult>(docs.payload).excerpts;
    step_ = "reflect";
    reflection_pass(context, 1);
    refinement_pass(1);
    record_step("reflect", 1, "master");

    int iteration = 1;
    auto reason = stop_reason(iteration);
    while (!reason) {
      ++iteration;
      const auto batch = take_pending(req_.limits.max_queries - queries_executed_, iteration);
      const auto reply = call(Role::analysis, QueryRequest{batch});
      reflection_pass(std::get<QueryResult>(reply.payload).delta, iteration);
      refinement_pass(iteration);
      record_step("reflect", iteration, "master", Json{{"queries", queries_json(batch)}});
      reason = stop_reason(iteration);
    }
    termination_ = *reason;
    iterations_ = iteration;

    step_ = "propose";
    const auto& top = hyps_.front();
    if (!top.proposed_action || top.confidence < reasoning::kResolvedHigh) {
      record_step("propose", iteration, "master", Json{{"proposed", false}});
      finish_agentic(RunStatus::completed, termination_, iteration);
      return;
    }
    PendingApproval approval;
    approval.approval_id = run_->id() + "-a1";
    approval.run_id = run_->id();
    approval.action = *top.proposed_action;
    approval.action.hypothesis_id = top.id;
    approval.action.evaluation_window = req_.evaluation_window;
    approval.action.guard_percent = req_.guard_percent;
    approval.hypothesis = top;
    for (const auto& r : bundle_.precedents) approval.precedent_ids.push_back(r.record_id);
    approval.requested_at = now();
    record_step("propose", iteration, "master", Json{{"proposed", true}, {"action_id", approval.action.action_id}});

    const auto decision = await_decision(approval);
    if (decision == Decision::reject) {
      finish_agentic(RunStatus::completed, termination_, iteration, "declined");
      return;
    }
    if (!approval.action.changes_config()) {
      finish_agentic(RunStatus::completed, termination_, iteration, "ticket_opened");
      return;
    }

    step_ = "validate";
    pre_action_configs_ = ctx_->simulation().configs();
    ValidationOutcome outcome;
    try {
      const auto reply = call(Role::validation, ValidateRequest{approval.action});
      outcome = std::get<ValidationResult>(reply.payload).outcome;
    } catch (const Error& e) {
      recover_validation(e);
      return;
    }
    sim_time_ = ctx_->simulation().now();
    record_step("validate", iteration, "validation", Json{{"outcome", std::string(store::to_string(outcome.outcome))}});
    for (const auto& rec : ctx_->store().optimizations()) {
      if (rec.record_id == outcome.record_id) memory_->add(rec);
    }
    {
      std::lock_guard lock(run_->mu_);
      run_->emit(EventKind::validation_result, to_json(outcome));
      run_->report_.validation = outcome;
    }
    finish_agentic(outcome.outcome == store::Outcome::confirmed ? RunStatus::confirmed : RunStatus::rolled_back,
                   termination_, iteration, "applied");
  }

  Decision await_decision(const PendingApproval& approval) {
    std::unique_lock lock(run_->mu_);
    run_->report_.proposal = approval;
    run_->pending_ = approval;
    run_->transition(RunStatus::awaiting_approval, Json{{"approval_id", approval.approval_id}});
    run_->emit(EventKind::approval_requested, Json{{"approval_id", approval.approval_id},
                                                   {"action", reasoning::to_json(approval.action)},
                                                   {"hypothesis_id", approval.hypothesis.id}});
    if (req_.approval_mode == ApprovalMode::auto_approve) {
      run_->decide_locked(approval.approval_id, Decision::approve, "auto", true);
    } else if (req_.approval_mode == ApprovalMode::auto_reject) {
      run_->decide_locked(approval.approval_id, Decision::reject, "auto", true);
    } else if (!req_.scripted_decisions.empty()) {
      const auto& [d, note] = req_.scripted_decisions.front();
      run_->decide_locked(approval.approval_id, d, note, false);
    }
    run_->cv_.wait(lock, [&] { return run_->decision_.has_value() || run_->abandoned_; });
    if (!run_->decision_) throw Abandoned{};
    return run_->decision_->first;
  }

  // The validation agent failed or timed out after approval. Once it has
  // stopped, any change it left behind is undone from the pre-action copy.
  void recover_validation(const Error& e) {
    std::string role = "validation";
    shutdown_agents();
    auto& sim = ctx_->simulation();
    bool changed = false;
    for (const auto& [cell, cfg] : pre_action_configs_) {
      if (!sim.config(cell).same_values(cfg)) changed = true;
    }
    if (changed) {
      const auto snap = ctx_->store().snapshot_config(pre_action_configs_, sim.now());
      ctx_->store().restore_config(snap.snapshot_id, sim);
    }
    std::lock_guard lock(run_->mu_);
    run_->report_.failure = RunFailure{step_, role, e.code(), e.what()};
    complete_locked(RunStatus::rolled_back, termination_, iterations_, "applied");
  }

  void finish_agentic(RunStatus status, const std::string& termination, int iteration,
                      const std::string& action_status = "none") {
    shutdown_agents();
    std::lock_guard lock(run_->mu_);
    complete_locked(status, termination, iteration, action_status);
  }

  void finish(RunStatus status, const std::string& termination, int iteration) {
    std::lock_guard lock(run_->mu_);
    complete_locked(status, termination, iteration, "none");
  }

  void fail(Errc code, const std::string& message, const std::string& role) {
    shutdown_agents();
    std::lock_guard lock(run_->mu_);
    run_->report_.failure = RunFailure{step_, role, code, message};
    run_->pending_.reset();
    if (run_->status_ == RunStatus::validating) {
      // Only reachable if something other than the agent call failed while
      // validating; the configuration was already restored or never changed.
      complete_locked(RunStatus::rolled_back, termination_, iterations_, "applied");
    } else if (run_->status_ == RunStatus::awaiting_approval) {
      complete_locked(RunStatus::completed, termination_, iterations_, "none");
    } else {
      complete_locked(RunStatus::failed, termination_, iterations_, "none");
    }
  }

  // Requires run_->mu_.
  void complete_locked(RunStatus status, const std::string& termination, int iteration,
                       const std::string& action_status) {
    auto& r = run_->report_;
    r.deviation_table = bundle_.deviation_table;
    r.hypotheses = hyps_;
    r.retired = retired_;
    r.no_finding = no_finding_;
    r.iterations = iteration;
    r.termination = termination;
    r.queries_executed = queries_executed_;
    r.action_status = action_status;
    r.memory_entries = memory_log_.size();
    if (ctx_) {
      r.final_configs = ctx_->simulation().configs();
      r.cm_changes_applied = static_cast<std::size_t>(
          std::count_if(ctx_->simulation().cm_log().begin(), ctx_->simulation().cm_log().end(),
                        [](const sim::CmChange& c) { return c.source != "scenario"; }));
    }
    run_->transition(status, Json{{"termination", termination}, {"action_status", action_status}});
    run_->footer_ = canonical_dump(Json{{"type", "footer"},
                                        {"status", std::string(to_string(status))},
                                        {"events", run_->events_.size()},
                                        {"entries", run_->entries_.size()},
                                        {"passes", trace_.passes().size()}});
    run_->cv_.notify_all();
  }

  std::shared_ptr<Run> run_;
  std::shared_ptr<CrossRunMemory> memory_;
  const RunRequest& req_;
  std::unique_ptr<reasoning::ReasoningBackend> backend_;
  std::unique_ptr<RunContext> ctx_;
  Timestamp sim_time_ = 0;
  std::string step_ = "plan";

  reasoning::EvidenceBundle bundle_;
  std::vector<reasoning::Hypothesis> hyps_;
  std::vector<reasoning::Retirement> retired_;
  bool no_finding_ = false;
  reasoning::ReasoningTrace trace_;
  EpisodicMemory memory_log_;
  std::vector<reasoning::FollowUpQuery> pending_;
  std::set<std::string> executed_keys_;
  int queries_executed_ = 0;
  double elapsed_ms_ = 0.0;
  std::string termination_;
  int iterations_ = 1;

  MessageBus bus_;
  std::vector<std::thread> workers_;
  std::uint64_t message_seq_ = 0;
  std::map<std::string, sim::CellConfig> pre_action_configs_;
};

// ---------------------------------------------------------------------------
// Orchestrator

Orchestrator::Orchestrator(std::shared_ptr<CrossRunMemory> memory) : memory_(std::move(memory)) {}

Orchestrator::~Orchestrator() {
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, run] : runs_) run->abandon();
    threads = std::move(threads_);
  }
  for (auto& t : threads) t.join();
}

std::shared_ptr<Run> Orchestrator::start(RunRequest request) {
  validate_request(request);
  decompose_intent(request.intent, request.mode, "");
  if (request.external) reasoning::ExternalBackend probe(*request.external);  // validates the config

  std::lock_guard lock(mu_);
  std::string id = request.run_id;
  if (id.empty()) {
    const std::string base = "r-" + digest_of(request_json(request));
    id = base;
    for (int n = 2; runs_.count(id); ++n) id = base + "-" + std::to_string(n);
  } else if (runs_.count(id)) {
    throw Error(Errc::conflict, "run id " + id + " already exists", "run_id");
  }
  request.run_id = id;
  auto run = std::make_shared<Run>(id, std::move(request), memory_->records());
  runs_[id] = run;
  order_.push_back(id);
  threads_.emplace_back([run, memory = memory_] {
    RunEngine engine(run, memory);
    engine.execute();
  });
  return run;
}

std::shared_ptr<Run> Orchestrator::execute(RunRequest request) {
  auto run = start(std::move(request));
  run->wait();
  return run;
}

std::shared_ptr<Run> Orchestrator::find(const std::string& run_id) const {
  std::lock_guard lock(mu_);
  auto it = runs_.find(run_id);
  return it == runs_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<Run>> Orchestrator::runs() const {
  std::lock_guard lock(mu_);
  std::vector<std::shared_ptr<Run>> out;
  for (const auto& id : order_) out.push_back(runs_.at(id));
  return out;
}

std::vector<PendingApproval> Orchestrator::pending_approvals() const {
  std::vector<PendingApproval> out;
  for (const auto& run : runs()) {
    if (auto p = run->pending_approval()) out.push_back(*p);
  }
  return out;
}

void Orchestrator::decide(const std::string& approval_id, Decision decision, const std::string& note) {
  for (const auto& run : runs()) {
    const auto pending = run->pending_approval();
    if (pending && pending->approval_id == approval_id) {
      run->decide(approval_id, decision, note);
      return;
    }
  }
  throw Error(Errc::conflict, "approval " + approval_id + " is unknown or already decided", "approval_id");
}

// ---------------------------------------------------------------------------
// Replay

ReplayResult replay_trace(const std::vector<std::string>& lines) {
  if (lines.empty()) throw Error(Errc::parse_error, "empty trace", "line[0]");
  std::vector<Json> docs;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      docs.push_back(Json::parse(lines[i]));
    } catch (const Json::parse_error& e) {
      throw Error(Errc::parse_error, e.what(), index_path("line", i));
    }
  }
  const Json& header = docs.front();
  if (header.value("type", "") != "header") throw Error(Errc::parse_error, "first line is not a header", "line[0]");
  const Json& footer = docs.back();
  if (footer.value("type", "") != "footer") {
    throw Error(Errc::parse_error, "trace has no footer (run not terminal)", index_path("line", lines.size() - 1));
  }

  RunRequest request = request_from_json(require(header, "request", "header"), "header.request");
  if (request.external) throw Error(Errc::invalid_argument, "only rule-backend traces can be replayed", "header.request.backend");
  request.run_id = require_string(header, "run_id", "header");
  for (const auto& d : docs) {
    if (d.value("type", "") == "approval" && !d.value("automatic", false)) {
      request.scripted_decisions.emplace_back(decision_from_string(d.value("decision", "")), d.value("note", ""));
    }
  }
  auto memory = std::make_shared<CrossRunMemory>();
  const Json& precedents = require(header, "precedents", "header");
  for (std::size_t i = 0; i < precedents.size(); ++i) {
    memory->add(store::optimization_record_from_json(precedents[i], index_path("header.precedents", i)));
  }

  ReplayResult out;
  out.run_id = request.run_id;
  out.recorded = run_status_from_string(require_string(footer, "status", "footer"));
  Orchestrator orchestrator(memory);
  auto run = orchestrator.execute(std::move(request));
  out.replayed = run->status();
  out.lines = run->export_trace();
  out.identical = out.lines == lines;
  return out;
}

}  // namespace ranagent::orchestrator
