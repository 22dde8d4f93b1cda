#pragma once

#include <optional>
#include <string>

#include "ranagent/core/json_io.hpp"
#include "ranagent/reasoning/backend.hpp"

namespace ranagent::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string datastore_path;  // empty: in-memory only
  std::string scenario_dir;    // scenario files ingested at startup
  std::optional<reasoning::ExternalBackendConfig> backend;  // external model, if configured
};

// Reads a JSON config file:
//   {"bind": "host:port", "datastore": "...", "scenarios": "...",
//    "backend": {"endpoint": ..., "model": ..., ...}}
// Errors: Error(io_error), Error(invalid_argument) with field paths.
ServiceConfig load_config(const std::string& path);
ServiceConfig config_from_json(const Json& doc);

// RANAGENT_BIND, RANAGENT_DATASTORE and RANAGENT_SCENARIOS override the file;
// RANAGENT_MODEL_* (see external_config_from_env) replace the backend block.
void apply_env_overrides(ServiceConfig& config);

// Sets host and port from "host:port". Errors: Error(invalid_argument) at `path`.
void set_bind(ServiceConfig& config, const std::string& text, const std::string& path = "bind");

Json to_json(const ServiceConfig& config);

}  // namespace ranagent::service
