#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "ranagent/orchestrator/pipeline.hpp"
#include "ranagent/orchestrator/run.hpp"
#include "ranagent/reasoning/rules.hpp"
#include "ranagent/sim/suites.hpp"

using namespace ranagent;
using namespace ranagent::orchestrator;
using namespace std::chrono_literals;

namespace {

RunRequest request_for(const sim::ScenarioSpec& scenario, Mode mode,
                       ApprovalMode approval = ApprovalMode::auto_approve) {
  RunRequest r;
  r.mode = mode;
  r.scenario = scenario;
  r.approval_mode = approval;
  return r;
}

std::vector<Json> parse_lines(const std::vector<std::string>& lines) {
  std::vector<Json> out;
  for (const auto& l : lines) out.push_back(Json::parse(l));
  return out;
}

std::size_t count_type(const std::vector<Json>& docs, const std::string& type) {
  return static_cast<std::size_t>(
      std::count_if(docs.begin(), docs.end(), [&](const Json& d) { return d.value("type", "") == type; }));
}

void check_event_stream(const Run& run) {
  const auto events = run.events_from(1);
  REQUIRE_FALSE(events.empty());
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == i + 1);
  const auto docs = parse_lines(run.export_trace());
  CHECK(count_type(docs, "event") == events.size());
  // Every status the run went through is announced by a status_change event.
  RunStatus status = RunStatus::running;
  for (const auto& e : events) {
    if (e.kind != EventKind::status_change || e.payload["from"].is_null()) continue;
    const auto from = run_status_from_string(e.payload["from"].get<std::string>());
    const auto to = run_status_from_string(e.payload["to"].get<std::string>());
    CHECK(from == status);
    CHECK(legal_transition(from, to));
    status = to;
  }
  CHECK(status == run.status());
}

}  // namespace

TEST_CASE("decompose_intent templates") {
  Intent intent;
  const auto agent = decompose_intent(intent, Mode::agent, "ctx");
  REQUIRE(agent.steps.size() == 5);
  CHECK(agent.find("analyze")->depends_on == std::vector<std::string>{"query"});
  CHECK(agent.find("reason")->depends_on == std::vector<std::string>{"analyze"});

  const auto workflow = decompose_intent(intent, Mode::workflow, "ctx");
  CHECK(workflow.steps.size() == 6);

  const auto agentic = decompose_intent(intent, Mode::agentic, "ctx");
  REQUIRE(agentic.steps.size() == 8);
  CHECK(agentic.find("precedents")->kind == StepKind::retrieve_precedents);
  CHECK(agentic.find("docs")->kind == StepKind::consult_docs);
  CHECK(agentic.find("reflect")->depends_on == std::vector<std::string>{"precedents", "docs"});
  CHECK(agentic.find("propose")->depends_on == std::vector<std::string>{"reflect"});
  CHECK(agentic.find("validate")->depends_on == std::vector<std::string>{"propose"});

  CHECK(canonical_dump(to_json(decompose_intent(intent, Mode::agentic, "ctx"))) == canonical_dump(to_json(agentic)));

  intent.goal = GoalKind::minimize_latency;
  try {
    decompose_intent(intent, Mode::agent, "ctx");
    FAIL("expected unsupported_intent");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unsupported_intent);
    CHECK(std::string(e.what()).find("investigate_degradation") != std::string::npos);
  }
}

TEST_CASE("validate_plan rejects cycles and dangling dependencies") {
  Plan p;
  p.steps = {{"a", StepKind::query, Json::object(), {"b"}}, {"b", StepKind::analyze, Json::object(), {"a"}}};
  CHECK_THROWS_AS(validate_plan(p), Error);
  p.steps = {{"a", StepKind::query, Json::object(), {"missing"}}};
  CHECK_THROWS_AS(validate_plan(p), Error);
  p.steps = {{"a", StepKind::query, Json::object(), {}}, {"a", StepKind::query, Json::object(), {}}};
  CHECK_THROWS_AS(validate_plan(p), Error);
}

TEST_CASE("dispatch keeps per-sender order and enforces registration") {
  MessageBus bus;
  bus.register_role(Role::master);
  bus.register_role(Role::analysis);
  AgentMessage req{"m1", "run", Role::master, Role::analysis, IntentTag::analyze_request, AnalyzeRequest{}, 0, ""};
  AgentMessage cancel{"m2", "run", Role::master, Role::analysis, IntentTag::cancel, Cancel{"stop"}, 0, ""};
  CHECK(bus.dispatch(req).position == 1);
  CHECK(bus.dispatch(cancel).position == 2);
  auto first = bus.receive(Role::analysis, 0ms);
  auto second = bus.receive(Role::analysis, 0ms);
  REQUIRE(first);
  REQUIRE(second);
  CHECK(first->message_id == "m1");
  CHECK(second->message_id == "m2");

  AgentMessage to_docs = req;
  to_docs.recipient = Role::documentation;
  try {
    bus.dispatch(to_docs);
    FAIL("expected unknown_recipient");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_recipient);
  }

  AgentMessage self = req;
  self.recipient = Role::master;
  CHECK_THROWS_AS(bus.dispatch(self), Error);
  AgentMessage mismatched = req;
  mismatched.tag = IntentTag::doc_request;
  CHECK_THROWS_AS(bus.dispatch(mismatched), Error);

  bus.close();
  try {
    bus.dispatch(req);
    FAIL("expected mailbox_closed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::mailbox_closed);
  }
}

TEST_CASE("status transition table") {
  const std::set<std::pair<RunStatus, RunStatus>> legal{
      {RunStatus::running, RunStatus::awaiting_approval},  {RunStatus::running, RunStatus::completed},
      {RunStatus::running, RunStatus::failed},             {RunStatus::awaiting_approval, RunStatus::validating},
      {RunStatus::awaiting_approval, RunStatus::completed}, {RunStatus::validating, RunStatus::confirmed},
      {RunStatus::validating, RunStatus::rolled_back},
  };
  for (auto from : kAllStatuses) {
    for (auto to : kAllStatuses) {
      CAPTURE(to_string(from));
      CAPTURE(to_string(to));
      CHECK(legal_transition(from, to) == (legal.count({from, to}) > 0));
    }
    if (is_terminal(from)) {
      for (auto to : kAllStatuses) CHECK_FALSE(legal_transition(from, to));
    }
  }
}

TEST_CASE("workflow examples") {
  Orchestrator orch;
  SUBCASE("event-free scenario reports no finding") {
    auto run = orch.execute(request_for(sim::base_scenario("quiet", 7), Mode::workflow));
    CHECK(run->status() == RunStatus::completed);
    const auto report = run->report();
    CHECK(report.hypotheses.empty());
    CHECK(report.no_finding);
    check_event_stream(*run);
  }
  SUBCASE("cell step gives cell_local_degradation on that cell") {
    const auto c = sim::cell_degradation_case(11, "c5");
    auto run = orch.execute(request_for(c.scenario, Mode::workflow));
    REQUIRE(run->status() == RunStatus::completed);
    const auto report = run->report();
    REQUIRE_FALSE(report.hypotheses.empty());
    CHECK(report.hypotheses[0].cause_kind == reasoning::CauseKind::cell_local_degradation);
    CHECK(report.hypotheses[0].scope == ElementRef{Level::cell, "c5"});
    CHECK(report.cm_changes_applied == 0);
    check_event_stream(*run);
  }
  SUBCASE("CM regression references the injected change") {
    const auto c = sim::config_regression_case(12, "c9");
    auto run = orch.execute(request_for(c.scenario, Mode::workflow));
    const auto report = run->report();
    REQUIRE_FALSE(report.hypotheses.empty());
    const auto& top = report.hypotheses[0];
    CHECK(top.cause_kind == reasoning::CauseKind::config_regression);
    // Injection schedule: tilt 4 -> 9 on c9 at 3/4 of the horizon.
    sim::CmChange injected{"c9", std::string(param::tilt), (672 * 3 / 4) * 900, 4.0, 9.0, "scenario"};
    CHECK(std::count(top.evidence_refs.begin(), top.evidence_refs.end(), "cm:" + injected.id()) == 1);
    REQUIRE(top.proposed_action);
    CHECK(top.proposed_action->cm_change_id == injected.id());
  }
}

TEST_CASE("agent mode termination") {
  Orchestrator orch;
  SUBCASE("resolved in one pass") {
    const auto c = sim::hardware_fault_case(21, "c6");
    auto req = request_for(c.scenario, Mode::agent);
    auto run = orch.execute(req);
    const auto report = run->report();
    CHECK(report.iterations == 1);
    CHECK(report.termination == "resolved");
    CHECK(report.hypotheses.at(0).cause_kind == reasoning::CauseKind::hardware_fault);
  }
  SUBCASE("ambiguous scenario hits the iteration limit") {
    auto req = request_for(sim::ambiguous_node_scenario(22, "n2"), Mode::agent);
    req.limits.max_iterations = 3;
    auto run = orch.execute(req);
    const auto report = run->report();
    CHECK(report.iterations == 3);
    CHECK(report.termination == "limit");
    REQUIRE_FALSE(report.hypotheses.empty());
    CHECK(report.hypotheses[0].cause_kind == reasoning::CauseKind::unknown);
    CHECK(report.hypotheses[0].scope == ElementRef{Level::node, "n2"});
    CHECK(report.queries_executed > 0);
  }
  SUBCASE("max_queries 0 is a single pass") {
    const auto c = sim::cell_degradation_case(23, "c2");
    auto req = request_for(c.scenario, Mode::agent);
    req.limits.max_queries = 0;
    auto run = orch.execute(req);
    const auto report = run->report();
    CHECK(report.iterations == 1);
    CHECK(report.queries_executed == 0);
    CHECK(report.termination == "query_limit");
    const auto docs = parse_lines(run->export_trace());
    CHECK(count_type(docs, "pass") == 1);
  }
  SUBCASE("cell degradation is confirmed by its siblings") {
    const auto c = sim::cell_degradation_case(24, "c11");
    auto run = orch.execute(request_for(c.scenario, Mode::agent));
    const auto report = run->report();
    CHECK(report.termination == "resolved");
    CHECK(report.iterations == 2);
    CHECK(report.hypotheses.at(0).confidence == doctest::Approx(0.8));
    CHECK(report.memory_entries > 0);
  }
}

TEST_CASE("agentic: config regression is reverted and confirmed") {
  Orchestrator orch;
  const auto c = sim::config_regression_case(31, "c4");
  auto run = orch.execute(request_for(c.scenario, Mode::agentic));
  REQUIRE(run->status() == RunStatus::confirmed);
  const auto report = run->report();
  REQUIRE(report.validation);
  REQUIRE(report.proposal);
  CHECK(report.proposal->action.kind == reasoning::ActionKind::revert_config_change);
  CHECK(report.final_configs.at("c4").electrical_tilt_deg == 4.0);
  // The regression removed 35% of the mean; undoing it must bring the
  // diurnal-adjusted mean back to the pre-event level within one noise sigma.
  const auto& base = c.scenario.baseline.at(std::string(kpi::dl_throughput));
  const double recovered = report.validation->kpi_delta.at(std::string(kpi::dl_throughput));
  CHECK(std::abs(recovered - 0.35 * base.mean) < base.noise_sigma);
  CHECK(orch.memory().size() == 1);
  check_event_stream(*run);

  const auto docs = parse_lines(run->export_trace());
  std::set<std::string> roles;
  for (const auto& d : docs) {
    if (d.value("type", "") == "message") roles.insert(d["message"]["recipient"].get<std::string>());
  }
  CHECK(roles == std::set<std::string>{"master", "analysis", "historical", "documentation", "validation"});
}

TEST_CASE("agentic: guarded actions") {
  Orchestrator orch;
  SUBCASE("worsening action is rolled back to the snapshot") {
    auto req = request_for(sim::scripted_action_scenario(41, -30.0), Mode::agentic);
    auto run = orch.execute(req);
    REQUIRE(run->status() == RunStatus::rolled_back);
    const auto report = run->report();
    REQUIRE(report.validation);
    CHECK(report.validation->restored);
    CHECK(report.validation->change_percent < -10.0);
    // Independent copy of the pre-action configuration: the scenario has no
    // config events, so it is the topology's initial configuration.
    const auto topo = sim::build_topology(req.scenario.topology);
    for (const auto& cell : topo.cells()) {
      CAPTURE(cell.id);
      CHECK(report.final_configs.at(cell.id).same_values(cell.initial_config));
    }
  }
  SUBCASE("improving action is confirmed with a positive delta") {
    auto run = orch.execute(request_for(sim::scripted_action_scenario(42, 25.0), Mode::agentic));
    REQUIRE(run->status() == RunStatus::confirmed);
    const auto report = run->report();
    CHECK(report.validation->kpi_delta.at(std::string(kpi::dl_throughput)) > 0.0);
    CHECK(report.final_configs.at("c7").tx_power_dbm == 44.0);
    const auto records = orch.memory().records();
    REQUIRE(records.size() == 1);
    CHECK(records[0].outcome == store::Outcome::confirmed);
    CHECK(records[0].kpi_delta.at(std::string(kpi::dl_throughput)) > 0.0);
  }
  SUBCASE("zero-effect action is confirmed") {
    auto run = orch.execute(request_for(sim::scripted_action_scenario(43, 0.0), Mode::agentic));
    CHECK(run->status() == RunStatus::confirmed);
  }
  SUBCASE("auto_reject never touches the configuration") {
    auto run = orch.execute(request_for(sim::scripted_action_scenario(44, -30.0), Mode::agentic,
                                        ApprovalMode::auto_reject));
    CHECK(run->status() == RunStatus::completed);
    const auto report = run->report();
    CHECK(report.action_status == "declined");
    CHECK(report.cm_changes_applied == 0);
    for (const auto& [cell, cfg] : report.final_configs) CHECK(cfg.config_version == 1);
    CHECK(orch.memory().size() == 0);
  }
}

TEST_CASE("interactive approval is the only way out of awaiting_approval") {
  Orchestrator orch;
  auto run = orch.start(request_for(sim::scripted_action_scenario(51, 25.0), Mode::agentic, ApprovalMode::interactive));
  for (int i = 0; i < 600 && !run->pending_approval(); ++i) std::this_thread::sleep_for(50ms);
  REQUIRE(run->pending_approval());
  std::this_thread::sleep_for(100ms);
  CHECK(run->status() == RunStatus::awaiting_approval);
  const auto pending = orch.pending_approvals();
  REQUIRE(pending.size() == 1);
  CHECK_THROWS_AS(orch.decide("nope", Decision::approve, ""), Error);
  orch.decide(pending[0].approval_id, Decision::approve, "looks right");
  CHECK(run->status() != RunStatus::awaiting_approval);
  CHECK(orch.pending_approvals().empty());
  try {
    orch.decide(pending[0].approval_id, Decision::reject, "again");
    FAIL("expected conflict");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::conflict);
  }
  CHECK(run->wait() == RunStatus::confirmed);
  const auto docs = parse_lines(run->export_trace());
  auto it = std::find_if(docs.begin(), docs.end(), [](const Json& d) { return d.value("type", "") == "approval"; });
  REQUIRE(it != docs.end());
  CHECK((*it)["note"] == "looks right");
  CHECK((*it)["automatic"] == false);
  check_event_stream(*run);

  SUBCASE("replay feeds the recorded decision back") {
    const auto replay = replay_trace(run->export_trace());
    CHECK(replay.replayed == RunStatus::confirmed);
    CHECK(replay.identical);
  }
}

TEST_CASE("interactive rejection completes with the action declined") {
  Orchestrator orch;
  auto run = orch.start(request_for(sim::scripted_action_scenario(52, 25.0), Mode::agentic, ApprovalMode::interactive));
  for (int i = 0; i < 600 && !run->pending_approval(); ++i) std::this_thread::sleep_for(50ms);
  REQUIRE(run->pending_approval());
  run->decide(run->pending_approval()->approval_id, Decision::reject, "not now");
  CHECK(run->wait() == RunStatus::completed);
  CHECK(run->report().action_status == "declined");
  CHECK(run->report().cm_changes_applied == 0);
}

TEST_CASE("undecided interactive run is released on shutdown") {
  std::shared_ptr<Run> run;
  {
    Orchestrator orch;
    run = orch.start(request_for(sim::scripted_action_scenario(53, 25.0), Mode::agentic, ApprovalMode::interactive));
    for (int i = 0; i < 600 && !run->pending_approval(); ++i) std::this_thread::sleep_for(50ms);
  }
  CHECK(run->status() == RunStatus::awaiting_approval);
}

TEST_CASE("agent timeout: one retry, then failure naming the role") {
  Orchestrator orch;
  auto req = request_for(sim::cell_degradation_case(61, "c1").scenario, Mode::agentic);
  req.agent_timeout = 150ms;
  req.unresponsive_roles = {Role::analysis};
  auto run = orch.execute(req);
  CHECK(run->status() == RunStatus::failed);
  const auto report = run->report();
  REQUIRE(report.failure);
  CHECK(report.failure->role == "analysis");
  CHECK(report.failure->code == Errc::timeout);
  const auto docs = parse_lines(run->export_trace());
  std::size_t requests = 0;
  for (const auto& d : docs) {
    if (d.value("type", "") == "message" && d["message"]["tag"] == "analyze_request") ++requests;
  }
  CHECK(requests == 2);
  check_event_stream(*run);
}

TEST_CASE("documentation timeout fails the run after the retry") {
  Orchestrator orch;
  auto req = request_for(sim::cell_degradation_case(62, "c1").scenario, Mode::agentic);
  req.agent_timeout = 3000ms;  // analysis of a week of data must fit
  req.unresponsive_roles = {Role::documentation};
  auto run = orch.execute(req);
  CHECK(run->status() == RunStatus::failed);
  CAPTURE(run->report().failure->message);
  CAPTURE(run->report().failure->step);
  CHECK(run->report().failure->role == "documentation");
}

TEST_CASE("determinism and replay") {
  for (auto mode : {Mode::workflow, Mode::agent, Mode::agentic}) {
    CAPTURE(to_string(mode));
    const auto c = sim::config_regression_case(71, "c13");
    Orchestrator a;
    Orchestrator b;
    auto r1 = a.execute(request_for(c.scenario, mode));
    auto r2 = b.execute(request_for(c.scenario, mode));
    CHECK(r1->id() == r2->id());
    CHECK(r1->export_trace() == r2->export_trace());
    CHECK(r1->export_trace() == r1->export_trace());
    const auto replay = replay_trace(r1->export_trace());
    CHECK(replay.replayed == r1->status());
    CHECK(replay.recorded == r1->status());
    CHECK(replay.identical);
  }
}

TEST_CASE("run ids are derived from the request and stay unique") {
  Orchestrator orch;
  const auto scenario = sim::base_scenario("quiet", 3, 192);
  auto r1 = orch.execute(request_for(scenario, Mode::workflow));
  auto r2 = orch.execute(request_for(scenario, Mode::workflow));
  CHECK(r1->id() != r2->id());
  CHECK(r2->id() == r1->id() + "-2");
  CHECK(orch.find(r1->id()) == r1);
  CHECK(orch.find("missing") == nullptr);
}

TEST_CASE("request validation") {
  Orchestrator orch;
  auto req = request_for(sim::base_scenario("quiet", 3, 192), Mode::agent);
  SUBCASE("unknown scope") {
    req.intent.scope = ElementRef{Level::cell, "c99"};
    try {
      orch.start(req);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.path().find("intent") == 0);
    }
  }
  SUBCASE("limits") {
    req.limits.max_iterations = 0;
    try {
      orch.start(req);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.path() == "limits.max_iterations");
    }
  }
  SUBCASE("unsupported goal") {
    req.intent.goal = GoalKind::reduce_energy;
    try {
      orch.start(req);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unsupported_intent);
    }
  }
  SUBCASE("request JSON round trip") {
    req.limits.max_queries = 4;
    req.intent.scope = ElementRef{Level::node, "n1"};
    const auto back = request_from_json(Json::parse(canonical_dump(request_json(req))));
    CHECK(canonical_dump(request_json(back)) == canonical_dump(request_json(req)));
  }
}

TEST_CASE("scoped intent keeps analysis inside the scope") {
  Orchestrator orch;
  const auto c = sim::cell_degradation_case(81, "c5");
  auto req = request_for(c.scenario, Mode::agent);
  req.intent.scope = ElementRef{Level::node, "n2"};
  auto run = orch.execute(req);
  const auto report = run->report();
  const auto topo = sim::build_topology(c.scenario.topology);
  const auto inside = topo.member_cells({Level::node, "n2"});
  for (const auto& row : report.deviation_table.rows) {
    for (const auto& cell : topo.member_cells({row.level, row.element_id})) {
      CHECK(std::find(inside.begin(), inside.end(), cell) != inside.end());
    }
  }
  REQUIRE_FALSE(report.hypotheses.empty());
  CHECK(report.hypotheses[0].scope == ElementRef{Level::cell, "c5"});
}

TEST_CASE("validate_and_guard boundaries") {
  const auto scenario = sim::scripted_action_scenario(91, -30.0);
  RunContext ctx(scenario, {});
  reasoning::ProposedAction action;
  action.action_id = "a";
  action.kind = reasoning::ActionKind::adjust_parameter;
  action.target = {Level::cell, "c7"};
  action.parameter = std::string(param::tx_power);
  action.value = 99.0;  // outside bounds
  action.guarded_kpi = std::string(kpi::dl_throughput);
  const auto before = ctx.simulation().configs();
  CHECK_THROWS_AS(validate_and_guard(ctx, action, "r"), Error);
  for (const auto& [cell, cfg] : ctx.simulation().configs()) CHECK(cfg.same_values(before.at(cell)));
  CHECK(ctx.store().optimizations().empty());

  action.kind = reasoning::ActionKind::open_ticket;
  CHECK_THROWS_AS(validate_and_guard(ctx, action, "r"), Error);
}

TEST_CASE("episodic memory is append-only and ordered") {
  EpisodicMemory m;
  m.append(1, MemoryKind::hypotheses, 0, Json::array({Json{{"id", "h"}, {"confidence", 0.7}}}));
  m.append(2, MemoryKind::query, 0, Json{{"key", "k1"}});
  m.append(2, MemoryKind::hypotheses, 0, Json::array({Json{{"id", "h"}, {"confidence", 0.8}}}));
  CHECK(m.size() == 3);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(m.entries()[i].seq == i + 1);
  CHECK(m.confidence_history("h") == std::vector<double>{0.7, 0.8});
  CHECK(m.issued_query_keys() == std::vector<std::string>{"k1"});

  CrossRunMemory x;
  store::OptimizationRecord rec;
  rec.record_id = "r1";
  CHECK_FALSE(x.add(rec));
  rec.outcome = store::Outcome::confirmed;
  CHECK(x.add(rec));
  CHECK(x.size() == 1);
}
