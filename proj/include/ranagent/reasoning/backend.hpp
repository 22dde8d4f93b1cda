#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "ranagent/reasoning/rules.hpp"
#include "ranagent/reasoning/validation.hpp"

namespace ranagent::reasoning {

// One interface for the deterministic rule oracle and the external model.
class ReasoningBackend {
public:
  virtual ~ReasoningBackend() = default;
  virtual std::string name() const = 0;
  virtual ReasoningOutput reason_initial(const EvidenceBundle& bundle) = 0;
  virtual ReflectionOutput reflect(const EvidenceBundle& bundle, const std::vector<Hypothesis>& prior,
                                   const EvidenceBundle& delta) = 0;
};

class RuleBackend final : public ReasoningBackend {
public:
  std::string name() const override { return "rules"; }
  ReasoningOutput reason_initial(const EvidenceBundle& bundle) override { return rule_reason_initial(bundle); }
  ReflectionOutput reflect(const EvidenceBundle& bundle, const std::vector<Hypothesis>& prior,
                           const EvidenceBundle& delta) override {
    return rule_reflect(bundle, prior, delta);
  }
};

struct ExternalBackendConfig {
  std::string endpoint;  // base address, e.g. "http://127.0.0.1:8080"
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string token_env = "RANAGENT_MODEL_TOKEN";  // name of the variable holding the bearer token
  std::chrono::milliseconds timeout{30000};
  int max_repairs = 2;
  int max_in_flight = 2;
};

// Reads RANAGENT_MODEL_ENDPOINT, _MODEL, _TOKEN_ENV, _TIMEOUT_MS, _MAX_REPAIRS
// and _MAX_IN_FLIGHT; nullopt when no endpoint is set.
std::optional<ExternalBackendConfig> external_config_from_env();
ExternalBackendConfig external_config_from_json(const Json& doc, const std::string& path = "backend");
Json to_json(const ExternalBackendConfig& config);

// Chat-completion client. The model receives the evidence, the output schema
// and, on repair attempts, the previous validation error. Output is accepted
// only through validate_backend_output.
// Errors: Error(timeout) when a request exceeds the timeout,
// Error(backend_failure) for transport errors, non-2xx replies and output that
// is still invalid after max_repairs retries.
class ExternalBackend final : public ReasoningBackend {
public:
  explicit ExternalBackend(ExternalBackendConfig config);
  ~ExternalBackend() override;

  std::string name() const override;
  ReasoningOutput reason_initial(const EvidenceBundle& bundle) override;
  ReflectionOutput reflect(const EvidenceBundle& bundle, const std::vector<Hypothesis>& prior,
                           const EvidenceBundle& delta) override;

  const ExternalBackendConfig& config() const { return config_; }

private:
  BackendOutput complete(const std::string& task, const Json& input, const EvidenceBundle& bundle,
                         const std::vector<Hypothesis>* prior);
  std::string post(const Json& request);

  ExternalBackendConfig config_;
  std::counting_semaphore<64> in_flight_;
};

std::unique_ptr<ReasoningBackend> make_backend(const std::optional<ExternalBackendConfig>& external);

}  // namespace ranagent::reasoning
