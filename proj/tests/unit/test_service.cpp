#include <doctest.h>
#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

#include "ranagent/service/core.hpp"
#include "ranagent/sim/suites.hpp"

using namespace ranagent;
using namespace ranagent::service;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

sim::ScenarioSpec named(sim::ScenarioSpec spec, const std::string& name) {
  spec.name = name;
  return spec;
}

Json body_of(const Response& r) { return Json::parse(r.body); }

void check_error(const Response& r, int status, const std::string& code, const std::string& path) {
  CHECK(r.status == status);
  const auto doc = body_of(r);
  REQUIRE(doc.contains("error"));
  CHECK(doc["error"]["code"] == code);
  CHECK(doc["error"]["path"] == path);
  CHECK_FALSE(doc["error"]["message"].get<std::string>().empty());
}

Json wait_for_status(ServiceCore& core, const std::string& id, const std::string& status) {
  for (int i = 0; i < 600; ++i) {
    auto doc = body_of(core.get_run(id));
    if (doc["status"] == status || doc["terminal"].get<bool>()) return doc;
    std::this_thread::sleep_for(50ms);
  }
  FAIL("run never reached " << status);
  return {};
}

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("ranagent-svc-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Sse {
  std::vector<std::uint64_t> ids;
  std::vector<std::string> kinds;
  bool ended = false;
};

Sse parse_sse(const std::string& text) {
  Sse out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.rfind("id: ", 0) == 0) out.ids.push_back(std::stoull(line.substr(4)));
    if (line.rfind("event: ", 0) == 0) {
      out.kinds.push_back(line.substr(7));
      if (line == "event: end") out.ended = true;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("service config from file values and environment") {
  const auto c = config_from_json(Json{{"bind", "0.0.0.0:9100"}, {"datastore", "/tmp/ds"}, {"scenarios", "sc"}});
  CHECK(c.host == "0.0.0.0");
  CHECK(c.port == 9100);
  CHECK(c.datastore_path == "/tmp/ds");
  CHECK(c.scenario_dir == "sc");
  CHECK_FALSE(c.backend);

  try {
    config_from_json(Json{{"bind", "localhost:x"}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_argument);
    CHECK(e.path() == "config.bind");
  }

  ServiceConfig env_config = c;
  ::setenv("RANAGENT_BIND", "127.0.0.1:9200", 1);
  ::setenv("RANAGENT_DATASTORE", "/var/ds", 1);
  apply_env_overrides(env_config);
  ::unsetenv("RANAGENT_BIND");
  ::unsetenv("RANAGENT_DATASTORE");
  CHECK(env_config.port == 9200);
  CHECK(env_config.host == "127.0.0.1");
  CHECK(env_config.datastore_path == "/var/ds");
  CHECK(env_config.scenario_dir == "sc");
}

TEST_CASE("kpi queries are byte-stable and validated") {
  ServiceCore core(ServiceConfig{});
  core.ingest_scenario(named(sim::base_scenario("x", 7, 96), "quiet"));
  const Params p{{"elements", "c1,c2"}, {"kpis", "dl_throughput_mbps"}, {"start", "0"}, {"end", "3600"}};
  const auto a = core.query_kpi(p);
  const auto b = core.query_kpi(p);
  REQUIRE(a.status == 200);
  CHECK(a.body == b.body);
  const auto doc = body_of(a);
  REQUIRE(doc["series"].size() == 2);
  CHECK(doc["series"][0]["element_id"] == "c1");
  CHECK(doc["series"][0]["points"].size() == 4);  // 900 s intervals
  CHECK(doc["series"][0]["points"][1][0] == 900);

  const auto node = body_of(core.query_kpi({{"level", "node"}, {"elements", "n1"}, {"kpis", "dl_throughput_mbps"}}));
  CHECK(node["series"][0]["points"].size() == 96);

  check_error(core.query_kpi({{"start", "900"}, {"end", "900"}}), 400, "invalid_argument", "time_range");
  check_error(core.query_kpi({{"kpis", "bogus"}}), 400, "unknown_kpi", "kpis");
  check_error(core.query_kpi({{"start", "abc"}}), 400, "invalid_argument", "start");
  check_error(core.query_kpi({{"scenario", "nope"}}), 404, "not_found", "scenario");
  check_error(core.query_kpi({{"level", "planet"}}), 400, "invalid_argument", "level");

  core.ingest_scenario(named(sim::base_scenario("x", 8, 96), "other"));
  check_error(core.query_kpi({}), 400, "invalid_argument", "scenario");
  CHECK(core.query_kpi({{"scenario", "other"}}).status == 200);
  CHECK(body_of(core.list_scenarios())["scenarios"].size() == 2);
}

TEST_CASE("deviations localize a band fault at band level") {
  ServiceCore core(ServiceConfig{});
  const auto fault = sim::band_fault_case(3);
  core.ingest_scenario(named(fault.scenario, "band"));
  const auto r = core.query_deviations({{"levels", "cell,band,node"}});
  REQUIRE(r.status == 200);
  const auto doc = body_of(r);
  REQUIRE_FALSE(doc["rows"].empty());
  CHECK(doc["rows"][0]["level"] == "band");
  CHECK(doc["rows"][0]["element_id"] == fault.band);
  CHECK(core.query_deviations({{"levels", "cell,band,node"}}).body == r.body);

  // A node scope keeps only elements wholly inside it.
  const auto scoped = body_of(core.query_deviations({{"scope", "node:n1"}}));
  for (const auto& row : scoped["rows"]) CHECK(row["level"] != "band");

  check_error(core.query_deviations({{"scope", "node:n99"}}), 400, "unknown_element", "scope");
  check_error(core.query_deviations({{"scope", "n1"}}), 400, "invalid_argument", "scope");
  check_error(core.query_deviations({{"start", "5000"}, {"end", "10"}}), 400, "invalid_argument", "time_range");
}

TEST_CASE("topology lists the hierarchy") {
  ServiceCore core(ServiceConfig{});
  core.ingest_scenario(named(sim::base_scenario("x", 1, 8), "t"));
  const auto doc = body_of(core.topology({}));
  CHECK(doc["cells"].size() == 20);
  CHECK(doc["levels"]["region"] == Json::array({"r1", "r2"}));
  CHECK(doc["levels"]["node"].size() == 5);
}

TEST_CASE("run lifecycle through approvals") {
  ServiceCore core(ServiceConfig{});
  core.ingest_scenario(named(sim::config_regression_case(11, "c9").scenario, "cfg"));

  check_error(core.get_run("r-missing"), 404, "not_found", "run_id");
  check_error(core.create_run(R"({"scenario": "missing"})"), 400, "invalid_argument", "scenario");
  check_error(core.create_run("{not json"), 400, "invalid_argument", "body");
  check_error(core.create_run(R"({"scenario": "cfg", "mode": "psychic"})"), 400, "invalid_argument", "mode");
  check_error(core.create_run(R"({"scenario": "cfg", "backend": "external"})"), 400, "invalid_argument", "backend");
  check_error(core.create_run(R"({"scenario": "cfg", "intent": {"scope": {"level": "cell", "id": "c99"}}})"), 400,
              "invalid_argument", "intent.scope");

  SUBCASE("approve, then a second decision conflicts") {
    const auto created = core.create_run(R"({"scenario": "cfg", "mode": "agentic"})");
    REQUIRE(created.status == 202);
    const auto id = body_of(created)["run_id"].get<std::string>();
    auto state = wait_for_status(core, id, "awaiting_approval");
    REQUIRE(state["status"] == "awaiting_approval");

    const auto approvals = body_of(core.list_approvals())["approvals"];
    REQUIRE(approvals.size() == 1);
    const auto approval_id = approvals[0]["approval_id"].get<std::string>();
    CHECK(approvals[0]["run_id"] == id);
    CHECK(approvals[0]["action"]["target"]["id"] == "c9");

    const auto decided = core.decide_approval(approval_id, R"({"decision": "approve", "note": "ok"})");
    REQUIRE(decided.status == 200);
    CHECK(body_of(decided)["status"] == "validating");
    check_error(core.decide_approval(approval_id, R"({"decision": "approve"})"), 409, "conflict", "approval_id");
    check_error(core.decide_approval(approval_id, R"({"decision": "maybe"})"), 400, "invalid_argument", "decision");

    state = wait_for_status(core, id, "confirmed");
    CHECK(state["status"] == "confirmed");
    const auto t1 = core.get_trace(id);
    CHECK(t1.content_type == "application/x-ndjson");
    std::this_thread::sleep_for(100ms);
    CHECK(core.get_trace(id).body == t1.body);
    CHECK(body_of(core.list_approvals())["approvals"].empty());
  }

  SUBCASE("reject declines the action") {
    const auto id = body_of(core.create_run(R"({"scenario": "cfg", "mode": "agentic"})"))["run_id"].get<std::string>();
    wait_for_status(core, id, "awaiting_approval");
    const auto approval_id = body_of(core.list_approvals())["approvals"][0]["approval_id"].get<std::string>();
    CHECK(core.decide_approval(approval_id, R"({"decision": "reject"})").status == 200);
    const auto state = wait_for_status(core, id, "completed");
    CHECK(state["status"] == "completed");
    CHECK(state["action_status"] == "declined");
  }

  check_error(core.decide_approval("r-none-a1", R"({"decision": "approve"})"), 409, "conflict", "approval_id");
}

TEST_CASE("datastore persists ingested scenarios") {
  const auto dir = temp_dir("ds");
  ServiceConfig config;
  config.datastore_path = dir.string();
  std::string before;
  {
    ServiceCore core(config);
    core.ingest_scenario(named(sim::base_scenario("x", 5, 48), "persist"));
    before = core.query_kpi({{"kpis", "dl_throughput_mbps,rrc_setup_success_rate_pct"}}).body;
  }
  ServiceCore reopened(config);
  CHECK(reopened.scenario_names() == std::vector<std::string>{"persist"});
  CHECK(reopened.query_kpi({{"kpis", "dl_throughput_mbps,rrc_setup_success_rate_pct"}}).body == before);

  sim::ScenarioSpec bad = sim::base_scenario("x", 5, 8);
  bad.name = "../escape";
  CHECK_THROWS_AS(reopened.ingest_scenario(bad), Error);
  fs::remove_all(dir);
}

TEST_CASE("scenario directory is ingested at startup") {
  const auto dir = temp_dir("sc");
  std::ofstream(dir / "a.json") << canonical_dump(sim::to_json(named(sim::base_scenario("x", 2, 16), "from-file")));
  ServiceConfig config;
  config.scenario_dir = dir.string();
  ServiceCore core(config);
  CHECK(core.scenario_names() == std::vector<std::string>{"from-file"});
  fs::remove_all(dir);
}

TEST_CASE("http routes and event stream") {
  ServiceCore core(ServiceConfig{});
  core.ingest_scenario(named(sim::cell_degradation_case(4, "c5").scenario, "deg"));
  HttpServer server(core);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread serving([&] { server.serve(); });

  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(30, 0);
  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);

  auto missing = client.Get("/runs/r-nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(Json::parse(missing->body)["error"]["path"] == "run_id");
  auto no_route = client.Get("/nowhere");
  REQUIRE(no_route);
  CHECK(no_route->status == 404);

  auto created = client.Post("/runs", R"({"scenario": "deg", "mode": "workflow"})", "application/json");
  REQUIRE(created);
  REQUIRE(created->status == 202);
  const auto id = Json::parse(created->body)["run_id"].get<std::string>();

  // The stream follows the run live and closes once it is terminal.
  auto full = client.Get("/runs/" + id + "/events?from=1");
  REQUIRE(full);
  CHECK(full->get_header_value("Content-Type") == "text/event-stream");
  const auto all = parse_sse(full->body);
  REQUIRE(all.ids.size() >= 5);
  for (std::size_t i = 0; i < all.ids.size(); ++i) CHECK(all.ids[i] == i + 1);
  CHECK(all.ended);
  CHECK(all.kinds.front() == "status_change");

  auto tail = parse_sse(client.Get("/runs/" + id + "/events?from=5")->body);
  REQUIRE_FALSE(tail.ids.empty());
  CHECK(tail.ids.front() == 5);
  CHECK(tail.ids.back() == all.ids.back());

  httplib::Headers resume{{"Last-Event-ID", std::to_string(all.ids.size() - 1)}};
  auto resumed = parse_sse(client.Get("/runs/" + id + "/events", resume)->body);
  CHECK(resumed.ids == std::vector<std::uint64_t>{all.ids.back()});

  auto past = parse_sse(client.Get("/runs/" + id + "/events?from=" + std::to_string(all.ids.size() + 10))->body);
  CHECK(past.ids.empty());
  CHECK(past.ended);

  auto bad_from = client.Get("/runs/" + id + "/events?from=x");
  REQUIRE(bad_from);
  CHECK(bad_from->status == 400);

  auto trace = client.Get("/runs/" + id + "/trace");
  REQUIRE(trace);
  CHECK(trace->body == core.get_trace(id).body);
  auto runs = client.Get("/runs");
  REQUIRE(runs);
  CHECK(Json::parse(runs->body)["runs"][0]["run_id"] == id);

  auto kpi = client.Get("/kpi?elements=c5&kpis=dl_throughput_mbps&start=0&end=9000");
  REQUIRE(kpi);
  CHECK(kpi->body == core.query_kpi({{"elements", "c5"}, {"kpis", "dl_throughput_mbps"}, {"start", "0"}, {"end", "9000"}}).body);
  auto bad_range = client.Get("/kpi?start=10&end=5");
  REQUIRE(bad_range);
  CHECK(bad_range->status == 400);
  CHECK(Json::parse(bad_range->body)["error"]["path"] == "time_range");

  server.stop();
  serving.join();
}
