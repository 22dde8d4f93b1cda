// Headless front end: runs the service, or drives the same operations either
// in-process or against a running server (--server).

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "ranagent/service/core.hpp"
#include "ranagent/sim/suites.hpp"

using namespace ranagent;
using namespace std::chrono_literals;

namespace {

constexpr int kMismatchExit = 1;

struct Builtin {
  std::string description;
  std::function<sim::ScenarioSpec(std::uint64_t)> make;
};

const std::map<std::string, Builtin>& builtins() {
  static const std::map<std::string, Builtin> table{
      {"quiet", {"no injected events", [](auto s) { return sim::base_scenario("quiet", s); }}},
      {"detection", {"one 5..8 sigma step on a random cell/KPI", [](auto s) { return sim::detection_case(s).scenario; }}},
      {"band-fault", {"throughput drop on every cell of one band", [](auto s) { return sim::band_fault_case(s).scenario; }}},
      {"cell-degradation", {"cell-local degradation on c5", [](auto s) { return sim::cell_degradation_case(s, "c5").scenario; }}},
      {"hardware-fault", {"hardware alarm and degradation on c6", [](auto s) { return sim::hardware_fault_case(s, "c6").scenario; }}},
      {"config-regression", {"tilt change on c9 followed by a throughput drop", [](auto s) { return sim::config_regression_case(s, "c9").scenario; }}},
      {"band-interference", {"interference across band n78", [](auto s) { return sim::band_interference_case(s, "n78").scenario; }}},
      {"ambiguous-node", {"all cells of n2 shift with no alarm or CM change", [](auto s) { return sim::ambiguous_node_scenario(s, "n2"); }}},
      {"action-improving", {"c7 degradation whose tx-power fix helps by 25%", [](auto s) { return sim::scripted_action_scenario(s, 25.0); }}},
      {"action-worsening", {"c7 degradation whose tx-power fix hurts by 30%", [](auto s) { return sim::scripted_action_scenario(s, -30.0); }}},
  };
  return table;
}

sim::ScenarioSpec builtin_scenario(const std::string& name, std::uint64_t seed) {
  auto it = builtins().find(name);
  if (it == builtins().end()) throw Error(Errc::not_found, "unknown builtin scenario '" + name + "'", "scenario");
  auto spec = it->second.make(seed);
  spec.name = name + "-" + std::to_string(seed);
  return spec;
}

// A file path, or builtin:<name>[:<seed>].
sim::ScenarioSpec resolve_scenario(const std::string& source) {
  if (source.rfind("builtin:", 0) == 0) {
    std::string rest = source.substr(8);
    std::uint64_t seed = 1;
    if (auto colon = rest.find(':'); colon != std::string::npos) {
      seed = std::stoull(rest.substr(colon + 1));
      rest = rest.substr(0, colon);
    }
    return builtin_scenario(rest, seed);
  }
  if (!std::filesystem::exists(source)) throw Error(Errc::not_found, "no scenario file " + source, "scenario");
  return sim::load_scenario_file(source);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::not_found, "cannot read " + path, "file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write " + path, "out");
  out << text;
}

std::optional<ElementRef> parse_element(const std::string& text, const std::string& path) {
  if (text.empty()) return std::nullopt;
  const auto colon = text.find(':');
  auto level = colon == std::string::npos ? std::nullopt : parse_level(text.substr(0, colon));
  if (!level) throw Error(Errc::invalid_argument, "expected <level>:<id>, got '" + text + "'", path);
  return ElementRef{*level, text.substr(colon + 1)};
}

// Error raised from an HTTP error payload, so the exit code follows the
// server's classification.
Error remote_error(const httplib::Result& res) {
  try {
    const auto doc = Json::parse(res->body);
    const auto& e = doc.at("error");
    const auto code = errc_from_string(e.value("code", "internal")).value_or(Errc::internal);
    return Error(code, e.value("message", ""), e.value("path", ""));
  } catch (const std::exception&) {
    return Error(Errc::backend_failure, "HTTP " + std::to_string(res->status) + ": " + res->body, "");
  }
}

class Remote {
public:
  explicit Remote(const std::string& url) : client_(url) {
    client_.set_connection_timeout(5, 0);
    client_.set_read_timeout(3600, 0);
  }

  Json get(const std::string& path) { return Json::parse(get_text(path)); }
  std::string get_text(const std::string& path) {
    auto res = client_.Get(path);
    check(res, path);
    return res->body;
  }
  Json post(const std::string& path, const Json& body) {
    auto res = client_.Post(path, canonical_dump(body), "application/json");
    check(res, path);
    return Json::parse(res->body);
  }

  // Follows the event stream until the server ends it.
  void stream(const std::string& path, const std::function<void(const std::string&)>& on_frame) {
    std::string buffer;
    auto res = client_.Get(path, [&](const char* data, std::size_t n) {
      buffer.append(data, n);
      for (auto end = buffer.find("\n\n"); end != std::string::npos; end = buffer.find("\n\n")) {
        on_frame(buffer.substr(0, end));
        buffer.erase(0, end + 2);
      }
      return true;
    });
    check(res, path);
  }

private:
  static void check(const httplib::Result& res, const std::string& path) {
    if (!res) throw Error(Errc::backend_failure, "server unreachable (" + httplib::to_string(res.error()) + ")", path);
    if (res->status >= 400) throw remote_error(res);
  }

  httplib::Client client_;
};

void print_event(const orchestrator::EventRecord& e) {
  std::cout << "#" << e.seq << " " << orchestrator::to_string(e.kind) << " "
            << canonical_dump(e.payload) << std::endl;
}

void print_sse_frame(const std::string& frame) {
  std::string id, kind, data;
  std::stringstream ss(frame);
  for (std::string line; std::getline(ss, line);) {
    if (line.rfind("id: ", 0) == 0) id = line.substr(4);
    if (line.rfind("event: ", 0) == 0) kind = line.substr(7);
    if (line.rfind("data: ", 0) == 0) data = line.substr(6);
  }
  if (kind == "end") return;
  const auto doc = Json::parse(data);
  std::cout << "#" << id << " " << kind << " " << canonical_dump(doc.value("payload", Json::object())) << std::endl;
}

std::string trace_text(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

// --- serve -------------------------------------------------------------------

struct ServeOptions {
  std::string config_file;
  std::string bind;
  std::string datastore;
  std::string scenarios;
};

int cmd_serve(const ServeOptions& o) {
  service::ServiceConfig config = o.config_file.empty() ? service::ServiceConfig{} : service::load_config(o.config_file);
  service::apply_env_overrides(config);
  if (!o.bind.empty()) service::set_bind(config, o.bind, "--bind");
  if (!o.datastore.empty()) config.datastore_path = o.datastore;
  if (!o.scenarios.empty()) config.scenario_dir = o.scenarios;

  // Signals are taken synchronously on a watcher thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::ServiceCore core(config);
  service::HttpServer server(core);
  const int port = server.bind(config.host, config.port);
  if (port < 0) throw Error(Errc::io_error, "cannot bind " + config.host + ":" + std::to_string(config.port), "bind");
  std::cerr << "listening on " << config.host << ":" << port << " with " << core.scenario_names().size()
            << " scenario(s)" << std::endl;
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.serve();
  if (watcher.joinable()) {
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
  }
  return 0;
}

// --- scenario -----------------------------------------------------------------

int cmd_scenario_builtin(const std::string& name, std::uint64_t seed, const std::string& out) {
  if (name.empty()) {
    for (const auto& [n, b] : builtins()) std::cout << n << "\t" << b.description << "\n";
    return 0;
  }
  write_output(out, canonical_dump(sim::to_json(builtin_scenario(name, seed))) + "\n");
  return 0;
}

int cmd_scenario_ingest(const std::vector<std::string>& sources, const std::string& datastore) {
  if (datastore.empty()) throw Error(Errc::invalid_argument, "--datastore is required", "datastore");
  service::ServiceConfig config;
  config.datastore_path = datastore;
  service::ServiceCore core(config);
  for (const auto& s : sources) {
    const auto spec = resolve_scenario(s);
    core.ingest_scenario(spec);
    std::cout << "ingested " << spec.name << "\n";
  }
  return 0;
}

int cmd_scenario_list(const std::string& datastore, const std::string& server) {
  Json doc;
  if (!server.empty()) {
    doc = Remote(server).get("/scenarios");
  } else {
    if (datastore.empty()) throw Error(Errc::invalid_argument, "--datastore or --server is required", "datastore");
    service::ServiceConfig config;
    config.datastore_path = datastore;
    doc = Json::parse(service::ServiceCore(config).list_scenarios().body);
  }
  for (const auto& s : doc["scenarios"]) {
    std::cout << s["name"].get<std::string>() << "\thorizon=" << s["horizon"] << "\tseed=" << s["seed"]
              << "\tevents=" << s["events"] << "\n";
  }
  return 0;
}

// --- analyze ------------------------------------------------------------------

struct AnalyzeOptions {
  std::string scenario;
  std::string datastore;
  std::string server;
  std::string name;
  std::optional<std::int64_t> start, end;
  std::string scope, levels, kpis;
  bool json = false;
};

int cmd_analyze(const AnalyzeOptions& o) {
  service::Params params;
  if (!o.name.empty()) params["scenario"] = o.name;
  if (o.start) params["start"] = std::to_string(*o.start);
  if (o.end) params["end"] = std::to_string(*o.end);
  if (!o.scope.empty()) params["scope"] = o.scope;
  if (!o.levels.empty()) params["levels"] = o.levels;
  if (!o.kpis.empty()) params["kpis"] = o.kpis;

  if (!o.server.empty()) {
    std::string query;
    for (const auto& [k, v] : params) query += (query.empty() ? "?" : "&") + k + "=" + httplib::detail::encode_query_param(v);
    std::cout << canonical_dump(Remote(o.server).get("/deviations" + query)) << "\n";
    return 0;
  }
  service::ServiceConfig config;
  config.datastore_path = o.scenario.empty() ? o.datastore : "";
  if (o.scenario.empty() && o.datastore.empty()) {
    throw Error(Errc::invalid_argument, "one of --scenario, --datastore or --server is required", "scenario");
  }
  service::ServiceCore core(config);
  if (!o.scenario.empty()) {
    const auto spec = resolve_scenario(o.scenario);
    core.ingest_scenario(spec);
    params["scenario"] = spec.name;
  }
  const auto table = core.deviation_table(params);
  if (o.json) {
    std::cout << canonical_dump(tsa::to_json(table)) << "\n";
  } else {
    std::cout << tsa::render_text(table);
  }
  return 0;
}

// --- run ----------------------------------------------------------------------

struct RunOptions {
  std::string scenario;
  std::string mode = "agentic";
  std::string approval = "interactive";
  std::string scope;
  std::optional<std::int64_t> start, end;
  std::string server;
  bool watch = false;
  std::string trace_out;
  int max_iterations = 3;
  int max_queries = 16;
};

Json run_body(const RunOptions& o) {
  Json intent = Json::object();
  if (auto scope = parse_element(o.scope, "intent.scope")) intent["scope"] = {{"level", to_string(scope->level)}, {"id", scope->id}};
  if (o.start) intent["start"] = *o.start;
  if (o.end) intent["end"] = *o.end;
  return Json{{"mode", o.mode},
              {"approval_mode", o.approval},
              {"intent", intent},
              {"limits", {{"max_iterations", o.max_iterations}, {"max_queries", o.max_queries}}}};
}

int exit_for_state(const Json& state) {
  if (state.value("status", "") != "failed" || !state["failure"].is_object()) return 0;
  const auto code = errc_from_string(state["failure"].value("code", "internal")).value_or(Errc::internal);
  return exit_code_for(code);
}

std::pair<orchestrator::Decision, std::string> prompt_decision(const orchestrator::PendingApproval& p) {
  std::cout << "approval " << p.approval_id << " requested:\n"
            << canonical_dump(orchestrator::to_json(p)) << "\n"
            << "approve or reject, optionally followed by a note: " << std::flush;
  for (std::string line; std::getline(std::cin, line);) {
    std::stringstream ss(line);
    std::string word, note;
    ss >> word;
    std::getline(ss >> std::ws, note);
    if (word == "approve" || word == "reject") return {orchestrator::decision_from_string(word), note};
    std::cout << "type approve or reject: " << std::flush;
  }
  return {orchestrator::Decision::reject, "no decision on stdin"};
}

int run_local(const RunOptions& o) {
  Json body = run_body(o);
  body["scenario"] = sim::to_json(resolve_scenario(o.scenario));
  orchestrator::Orchestrator orch;
  auto run = orch.start(orchestrator::request_from_json(body, ""));
  std::uint64_t next = 1;
  while (true) {
    const bool done = run->terminal();
    for (const auto& e : run->events_from(next)) {
      if (o.watch) print_event(e);
      next = e.seq + 1;
    }
    if (done) break;
    if (auto p = run->pending_approval(); p && run->status() == orchestrator::RunStatus::awaiting_approval) {
      auto [decision, note] = prompt_decision(*p);
      run->decide(p->approval_id, decision, note);
      continue;
    }
    run->wait_for_event(next, 200ms);
  }
  const auto state = run->state_json();
  std::cout << canonical_dump(state) << "\n";
  if (!o.trace_out.empty()) write_output(o.trace_out, trace_text(run->export_trace()));
  return exit_for_state(state);
}

int run_remote(const RunOptions& o) {
  Remote remote(o.server);
  Json body = run_body(o);
  if (std::filesystem::exists(o.scenario) || o.scenario.rfind("builtin:", 0) == 0) {
    body["scenario"] = sim::to_json(resolve_scenario(o.scenario));
  } else {
    body["scenario"] = o.scenario;  // name of an ingested scenario
  }
  const auto created = remote.post("/runs", body);
  const auto id = created["run_id"].get<std::string>();
  std::cerr << "run " << id << std::endl;
  if (o.watch) {
    // The stream stays open while the run waits for an approval; decide from
    // another shell with `approvals decide`.
    remote.stream("/runs/" + id + "/events?from=1", print_sse_frame);
  }
  Json state;
  while (true) {
    state = remote.get("/runs/" + id);
    if (state["terminal"].get<bool>() || state["status"] == "awaiting_approval") break;
    std::this_thread::sleep_for(200ms);
  }
  std::cout << canonical_dump(state) << "\n";
  if (!o.trace_out.empty()) write_output(o.trace_out, remote.get_text("/runs/" + id + "/trace"));
  return exit_for_state(state);
}

// --- approvals and traces -------------------------------------------------------

int cmd_approvals_list(const std::string& server) {
  const auto doc = Remote(server).get("/approvals");
  for (const auto& a : doc["approvals"]) {
    std::cout << a["approval_id"].get<std::string>() << "\trun=" << a["run_id"].get<std::string>()
              << "\taction=" << canonical_dump(a["action"]) << "\n";
  }
  return 0;
}

int cmd_approvals_decide(const std::string& server, const std::string& id, const std::string& decision,
                         const std::string& note) {
  const auto ack = Remote(server).post("/approvals/" + id + "/decision", Json{{"decision", decision}, {"note", note}});
  std::cout << canonical_dump(ack) << "\n";
  return 0;
}

int cmd_trace_export(const std::string& server, const std::string& run_id, const std::string& out) {
  write_output(out, Remote(server).get_text("/runs/" + run_id + "/trace"));
  return 0;
}

int cmd_trace_replay(const std::string& file) {
  std::vector<std::string> lines;
  std::stringstream ss(read_file(file));
  for (std::string line; std::getline(ss, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  const auto result = orchestrator::replay_trace(lines);
  std::cout << "run " << result.run_id << ": recorded " << orchestrator::to_string(result.recorded) << ", replayed "
            << orchestrator::to_string(result.replayed) << ", trace " << (result.identical ? "identical" : "differs")
            << "\n";
  return result.identical && result.recorded == result.replayed ? 0 : kMismatchExit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RAN KPI analysis and optimization agent"};
  app.require_subcommand(1);
  std::function<int()> action;

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--config", serve.config_file, "JSON config file");
  serve_cmd->add_option("--bind", serve.bind, "host:port (overrides config and RANAGENT_BIND)");
  serve_cmd->add_option("--datastore", serve.datastore, "Datastore directory");
  serve_cmd->add_option("--scenarios", serve.scenarios, "Directory of scenario files ingested at startup");
  serve_cmd->callback([&] { action = [&] { return cmd_serve(serve); }; });

  auto* scenario_cmd = app.add_subcommand("scenario", "Scenario files and ingestion");
  scenario_cmd->require_subcommand(1);
  std::string builtin_name, builtin_out;
  std::uint64_t builtin_seed = 1;
  auto* builtin_cmd = scenario_cmd->add_subcommand("builtin", "List builtin generators, or write one as JSON");
  builtin_cmd->add_option("name", builtin_name, "Generator name");
  builtin_cmd->add_option("--seed", builtin_seed, "Seed");
  builtin_cmd->add_option("-o,--out", builtin_out, "Output file (stdout by default)");
  builtin_cmd->callback([&] { action = [&] { return cmd_scenario_builtin(builtin_name, builtin_seed, builtin_out); }; });

  std::vector<std::string> ingest_sources;
  std::string ingest_store;
  auto* ingest_cmd = scenario_cmd->add_subcommand("ingest", "Generate scenarios and store their data");
  ingest_cmd->add_option("sources", ingest_sources, "Scenario files or builtin:<name>[:<seed>]")->required();
  ingest_cmd->add_option("--datastore", ingest_store, "Datastore directory")->required();
  ingest_cmd->callback([&] { action = [&] { return cmd_scenario_ingest(ingest_sources, ingest_store); }; });

  std::string list_store, list_server;
  auto* list_cmd = scenario_cmd->add_subcommand("list", "List ingested scenarios");
  list_cmd->add_option("--datastore", list_store, "Datastore directory");
  list_cmd->add_option("--server", list_server, "Service URL");
  list_cmd->callback([&] { action = [&] { return cmd_scenario_list(list_store, list_server); }; });

  AnalyzeOptions analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Print the deviation table of a scenario");
  analyze_cmd->add_option("--scenario", analyze.scenario, "Scenario file or builtin:<name>[:<seed>]");
  analyze_cmd->add_option("--datastore", analyze.datastore, "Datastore directory");
  analyze_cmd->add_option("--server", analyze.server, "Service URL");
  analyze_cmd->add_option("--name", analyze.name, "Ingested scenario name");
  analyze_cmd->add_option("--start", analyze.start, "Window start (unix seconds)");
  analyze_cmd->add_option("--end", analyze.end, "Window end (exclusive)");
  analyze_cmd->add_option("--scope", analyze.scope, "<level>:<id>");
  analyze_cmd->add_option("--levels", analyze.levels, "Comma-separated levels");
  analyze_cmd->add_option("--kpis", analyze.kpis, "Comma-separated KPIs");
  analyze_cmd->add_flag("--json", analyze.json, "Structured output");
  analyze_cmd->callback([&] { action = [&] { return cmd_analyze(analyze); }; });

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Execute a run");
  run_cmd->add_option("--scenario", run.scenario, "Scenario file, builtin:<name>[:<seed>], or ingested name")->required();
  run_cmd->add_option("--mode", run.mode, "workflow | agent | agentic")->check(CLI::IsMember({"workflow", "agent", "agentic"}));
  run_cmd->add_option("--approval", run.approval, "interactive | auto_approve | auto_reject")
      ->check(CLI::IsMember({"interactive", "auto_approve", "auto_reject"}));
  run_cmd->add_option("--scope", run.scope, "Intent scope <level>:<id>");
  run_cmd->add_option("--start", run.start, "Intent window start");
  run_cmd->add_option("--end", run.end, "Intent window end");
  run_cmd->add_option("--max-iterations", run.max_iterations, "Reasoning pass limit");
  run_cmd->add_option("--max-queries", run.max_queries, "Follow-up query limit");
  run_cmd->add_option("--server", run.server, "Service URL (in-process when absent)");
  run_cmd->add_flag("--watch", run.watch, "Print events as they happen");
  run_cmd->add_option("--trace-out", run.trace_out, "Write the exported trace here");
  run_cmd->callback([&] { action = [&] { return run.server.empty() ? run_local(run) : run_remote(run); }; });

  auto* approvals_cmd = app.add_subcommand("approvals", "Pending approvals");
  approvals_cmd->require_subcommand(1);
  std::string approvals_server = "http://127.0.0.1:8080";
  approvals_cmd->add_option("--server", approvals_server, "Service URL")->envname("RANAGENT_SERVER");
  approvals_cmd->fallthrough();
  approvals_cmd->add_subcommand("list", "List pending approvals")->callback([&] {
    action = [&] { return cmd_approvals_list(approvals_server); };
  });
  std::string decide_id, decide_decision, decide_note;
  auto* decide_cmd = approvals_cmd->add_subcommand("decide", "Approve or reject");
  decide_cmd->add_option("approval_id", decide_id)->required();
  decide_cmd->add_option("decision", decide_decision)->required()->check(CLI::IsMember({"approve", "reject"}));
  decide_cmd->add_option("--note", decide_note, "Operator note");
  decide_cmd->callback([&] {
    action = [&] { return cmd_approvals_decide(approvals_server, decide_id, decide_decision, decide_note); };
  });

  auto* trace_cmd = app.add_subcommand("trace", "Run traces");
  trace_cmd->require_subcommand(1);
  std::string export_server = "http://127.0.0.1:8080", export_id, export_out;
  auto* export_cmd = trace_cmd->add_subcommand("export", "Download a run trace");
  export_cmd->add_option("run_id", export_id)->required();
  export_cmd->add_option("--server", export_server, "Service URL")->envname("RANAGENT_SERVER");
  export_cmd->add_option("-o,--out", export_out, "Output file (stdout by default)");
  export_cmd->callback([&] { action = [&] { return cmd_trace_export(export_server, export_id, export_out); }; });
  std::string replay_file;
  auto* replay_cmd = trace_cmd->add_subcommand("replay", "Re-execute a trace and compare");
  replay_cmd->add_option("file", replay_file)->required();
  replay_cmd->callback([&] { action = [&] { return cmd_trace_replay(replay_file); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what();
    if (!e.path().empty()) std::cerr << " (at " << e.path() << ")";
    std::cerr << std::endl;
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
