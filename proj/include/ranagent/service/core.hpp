#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ranagent/orchestrator/run.hpp"
#include "ranagent/service/config.hpp"
#include "ranagent/store/store.hpp"
#include "ranagent/tsa/deviation_table.hpp"

namespace ranagent::service {

using Params = std::map<std::string, std::string>;

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// {"error": {"code", "message", "path"}} with the HTTP status of the code.
Response error_response(const Error& error);

// One "id/event/data" block of a server-sent event stream.
std::string format_sse(const orchestrator::EventRecord& event);

// Transport-independent request handling. Every JSON body is written with
// canonical_dump, so identical requests give identical bytes.
class ServiceCore {
public:
  explicit ServiceCore(ServiceConfig config);
  ~ServiceCore();

  const ServiceConfig& config() const { return config_; }
  orchestrator::Orchestrator& orchestrator() { return *orchestrator_; }

  // Generates the scenario and stores its PM/FM/CM data under its name
  // (persisted below the datastore path when one is configured).
  void ingest_scenario(const sim::ScenarioSpec& spec);
  std::vector<std::string> scenario_names() const;
  std::optional<sim::ScenarioSpec> scenario(const std::string& name) const;

  Response create_run(const std::string& body);
  Response get_run(const std::string& run_id) const;
  Response get_trace(const std::string& run_id) const;
  Response list_approvals() const;
  Response decide_approval(const std::string& approval_id, const std::string& body);
  Response query_kpi(const Params& params) const;
  Response query_deviations(const Params& params) const;
  // The table behind query_deviations; throws Error.
  tsa::DeviationTable deviation_table(const Params& params) const;
  Response topology(const Params& params) const;
  Response list_scenarios() const;

  // Null when the run is unknown.
  std::shared_ptr<orchestrator::Run> run(const std::string& run_id) const;

  // Parses a RunRequest body, resolving scenario references and the backend
  // selection against this service. Throws Error with field paths.
  orchestrator::RunRequest parse_run_request(const std::string& body) const;

private:
  struct Entry {
    sim::ScenarioSpec spec;
    std::shared_ptr<const sim::NetworkTopology> topology;
    std::unique_ptr<store::Store> store;
  };

  const Entry& entry_for(const Params& params) const;
  void load_datastore();

  ServiceConfig config_;
  std::unique_ptr<orchestrator::Orchestrator> orchestrator_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> scenarios_;
};

// HTTP binding of ServiceCore.
class HttpServer {
public:
  explicit HttpServer(ServiceCore& core);
  ~HttpServer();

  // Binds to port (0: any free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Serves until stop(); blocking.
  void serve();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ranagent::service
