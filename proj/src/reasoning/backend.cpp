#include "ranagent/reasoning/backend.hpp"

#include <cstdlib>
#include <map>
#include <set>

#include <fmt/format.h>
#include <httplib.h>

namespace ranagent::reasoning {

namespace {

constexpr std::string_view kInstruction =
    "You diagnose radio access network KPI deviations. Reply with a single JSON object that conforms "
    "to the schema below and nothing else. Every evidence_ref must name a member of the supplied "
    "evidence (row:, alarm:, cm:, im:, precedent: or doc: followed by its id). Confidence lies in [0, 1]. "
    "A hypothesis with cause_kind unknown carries no proposed_action.";

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

long env_long(const char* name, long fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const long parsed = std::strtol(v, &end, 10);
  if (end == v || *end != '\0') throw Error(Errc::invalid_argument, fmt::format("{} is not an integer", name), name);
  return parsed;
}

void check(const ExternalBackendConfig& c, const std::string& path) {
  if (c.endpoint.empty()) throw Error(Errc::invalid_argument, "endpoint is required", join_path(path, "endpoint"));
  if (c.timeout.count() <= 0) throw Error(Errc::invalid_argument, "timeout must be positive", join_path(path, "timeout_ms"));
  if (c.max_repairs < 0) throw Error(Errc::invalid_argument, "max_repairs must be >= 0", join_path(path, "max_repairs"));
  if (c.max_in_flight < 1 || c.max_in_flight > 64) {
    throw Error(Errc::invalid_argument, "max_in_flight must lie in [1, 64]", join_path(path, "max_in_flight"));
  }
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Releases the slot on every exit path.
class SlotGuard {
public:
  explicit SlotGuard(std::counting_semaphore<64>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

private:
  std::counting_semaphore<64>& s_;
};

}  // namespace

std::optional<ExternalBackendConfig> external_config_from_env() {
  ExternalBackendConfig c;
  c.endpoint = env_or("RANAGENT_MODEL_ENDPOINT", "");
  if (c.endpoint.empty()) return std::nullopt;
  c.model = env_or("RANAGENT_MODEL", "");
  c.token_env = env_or("RANAGENT_MODEL_TOKEN_ENV", c.token_env);
  c.timeout = std::chrono::milliseconds(env_long("RANAGENT_MODEL_TIMEOUT_MS", c.timeout.count()));
  c.max_repairs = static_cast<int>(env_long("RANAGENT_MODEL_MAX_REPAIRS", c.max_repairs));
  c.max_in_flight = static_cast<int>(env_long("RANAGENT_MODEL_MAX_IN_FLIGHT", c.max_in_flight));
  check(c, "env");
  return c;
}

ExternalBackendConfig external_config_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "expected an object", path);
  ExternalBackendConfig c;
  c.endpoint = require_string(doc, "endpoint", path);
  c.path = doc.value("path", c.path);
  c.model = doc.value("model", c.model);
  c.token_env = doc.value("token_env", c.token_env);
  if (doc.contains("timeout_ms")) c.timeout = std::chrono::milliseconds(require_int(doc, "timeout_ms", path));
  if (doc.contains("max_repairs")) c.max_repairs = static_cast<int>(require_int(doc, "max_repairs", path));
  if (doc.contains("max_in_flight")) c.max_in_flight = static_cast<int>(require_int(doc, "max_in_flight", path));
  check(c, path);
  return c;
}

Json to_json(const ExternalBackendConfig& c) {
  return Json{{"endpoint", c.endpoint},           {"path", c.path},
              {"model", c.model},                 {"token_env", c.token_env},
              {"timeout_ms", c.timeout.count()},  {"max_repairs", c.max_repairs},
              {"max_in_flight", c.max_in_flight}};
}

ExternalBackend::ExternalBackend(ExternalBackendConfig config)
    : config_(std::move(config)), in_flight_(config_.max_in_flight) {
  check(config_, "backend");
}

ExternalBackend::~ExternalBackend() = default;

std::string ExternalBackend::name() const {
  return config_.model.empty() ? std::string("external") : "external:" + config_.model;
}

std::string ExternalBackend::post(const Json& request) {
  SlotGuard slot(in_flight_);
  httplib::Client client(config_.endpoint);
  const auto secs = config_.timeout.count() / 1000;
  const auto usecs = (config_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(config_.path, headers, request.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const auto waited = std::chrono::steady_clock::now() - started;
    if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && waited >= config_.timeout)) {
      throw Error(Errc::timeout, fmt::format("model request exceeded {} ms", config_.timeout.count()), "backend");
    }
    throw Error(Errc::backend_failure, "model request failed: " + httplib::to_string(err), "backend");
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(Errc::backend_failure, fmt::format("model endpoint answered HTTP {}", res->status), "backend");
  }
  try {
    const Json reply = Json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(Errc::backend_failure, std::string("unexpected reply shape: ") + e.what(), "backend");
  }
}

BackendOutput ExternalBackend::complete(const std::string& task, const Json& input, const EvidenceBundle& bundle,
                                        const std::vector<Hypothesis>* prior) {
  Json messages = Json::array();
  messages.push_back({{"role", "system"}, {"content", fmt::format("{}\n\n{}", kInstruction, output_schema())}});
  messages.push_back({{"role", "user"}, {"content", canonical_dump(Json{{"task", task}, {"input", input}})}});
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_repairs; ++attempt) {
    Json request{{"model", config_.model},
                 {"messages", messages},
                 {"temperature", 0},
                 {"response_format", {{"type", "json_object"}}}};
    const std::string content = trim(post(request));
    try {
      BackendOutput out = validate_backend_output(content, bundle);
      if (prior) {
        // Each prior must be kept, merged or retired explicitly.
        std::set<std::string> seen;
        for (const auto& h : out.hypotheses) seen.insert(h.id);
        for (const auto& r : out.retired) seen.insert(r.id);
        for (const auto& p : *prior) {
          if (!seen.contains(p.id)) {
            throw OutputError(OutputIssue::unresolved_ref, "prior hypothesis '" + p.id + "' not accounted for",
                              "retired");
          }
        }
      }
      return out;
    } catch (const OutputError& e) {
      last_error = fmt::format("{} at {}", e.what(), e.path());
      messages.push_back({{"role", "assistant"}, {"content", content}});
      messages.push_back(
          {{"role", "user"}, {"content", "Your reply was rejected: " + last_error + ". Reply again with corrected JSON."}});
    }
  }
  throw Error(Errc::backend_failure,
              fmt::format("model output invalid after {} repair attempts: {}", config_.max_repairs, last_error),
              "backend");
}

ReasoningOutput ExternalBackend::reason_initial(const EvidenceBundle& bundle) {
  ReasoningOutput out;
  if (bundle.deviation_table.rows.empty()) {
    out.no_finding = true;
    return out;
  }
  auto result = complete("initial", to_json(bundle), bundle, nullptr);
  out.hypotheses = std::move(result.hypotheses);
  out.queries = std::move(result.queries);
  return out;
}

ReflectionOutput ExternalBackend::reflect(const EvidenceBundle& bundle, const std::vector<Hypothesis>& prior,
                                          const EvidenceBundle& delta) {
  ReflectionOutput out;
  if (delta.empty()) {
    out.hypotheses = prior;
    return out;
  }
  const EvidenceBundle merged = merge(bundle, delta);
  Json prior_json = Json::array();
  for (const auto& h : prior) prior_json.push_back(to_json(h));
  auto result = complete("reflect", Json{{"evidence", to_json(merged)}, {"prior", prior_json}, {"delta", to_json(delta)}},
                         merged, &prior);
  std::map<std::string, const Hypothesis*> by_id;
  for (const auto& p : prior) by_id[p.id] = &p;
  std::vector<std::string> fresh;
  for (const auto& h : result.hypotheses) {
    if (!by_id.contains(h.id)) fresh.push_back(h.id);
  }
  for (const auto& r : result.retired) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) continue;
    out.retired.push_back({*it->second, r.reason, fresh});
  }
  out.hypotheses = std::move(result.hypotheses);
  return out;
}

std::unique_ptr<ReasoningBackend> make_backend(const std::optional<ExternalBackendConfig>& external) {
  if (external) return std::make_unique<ExternalBackend>(*external);
  return std::make_unique<RuleBackend>();
}

}  // namespace ranagent::reasoning
