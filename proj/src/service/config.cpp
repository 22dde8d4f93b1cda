#include "ranagent/service/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ranagent::service {

namespace {

void parse_bind(const std::string& text, ServiceConfig& c, const std::string& path) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw Error(Errc::invalid_argument, "bind must be host:port", path);
  c.host = text.substr(0, colon);
  try {
    std::size_t used = 0;
    c.port = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, "invalid port in '" + text + "'", path);
  }
  if (c.port < 0 || c.port > 65535) throw Error(Errc::invalid_argument, "port out of range", path);
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

}  // namespace

ServiceConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "config must be an object", "config");
  ServiceConfig c;
  if (doc.contains("bind")) parse_bind(require_string(doc, "bind", "config"), c, "config.bind");
  if (doc.contains("datastore")) c.datastore_path = require_string(doc, "datastore", "config");
  if (doc.contains("scenarios")) c.scenario_dir = require_string(doc, "scenarios", "config");
  if (auto it = doc.find("backend"); it != doc.end() && !it->is_null()) {
    c.backend = reasoning::external_config_from_json(*it, "config.backend");
  }
  return c;
}

ServiceConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read config file " + path, "config");
  std::stringstream ss;
  ss << in.rdbuf();
  Json doc;
  try {
    doc = Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw Error(Errc::parse_error, e.what(), "config");
  }
  return config_from_json(doc);
}

void apply_env_overrides(ServiceConfig& c) {
  if (const char* v = env("RANAGENT_BIND")) parse_bind(v, c, "RANAGENT_BIND");
  if (const char* v = env("RANAGENT_DATASTORE")) c.datastore_path = v;
  if (const char* v = env("RANAGENT_SCENARIOS")) c.scenario_dir = v;
  if (auto b = reasoning::external_config_from_env()) c.backend = *b;
}

void set_bind(ServiceConfig& config, const std::string& text, const std::string& path) {
  parse_bind(text, config, path);
}

Json to_json(const ServiceConfig& c) {
  return Json{{"bind", c.host + ":" + std::to_string(c.port)},
              {"datastore", c.datastore_path},
              {"scenarios", c.scenario_dir},
              {"backend", c.backend ? reasoning::to_json(*c.backend) : Json(nullptr)}};
}

}  // namespace ranagent::service
