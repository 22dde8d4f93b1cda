#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ranagent/core/errors.hpp"
#include "ranagent/reasoning/types.hpp"

namespace ranagent::reasoning {

enum class OutputIssue { malformed, out_of_range, unknown_enum, unresolved_ref };
std::string_view to_string(OutputIssue issue);

// Rejection of backend output; code() is always Errc::parse_error and path()
// points at the offending field (e.g. "hypotheses[0].confidence").
class OutputError : public Error {
public:
  OutputError(OutputIssue issue, std::string message, std::string path);
  OutputIssue issue() const noexcept { return issue_; }

private:
  OutputIssue issue_;
};

struct RetiredId {
  std::string id;
  std::string reason;
};

struct BackendOutput {
  std::vector<Hypothesis> hypotheses;  // sorted
  std::vector<FollowUpQuery> queries;
  std::vector<RetiredId> retired;
};

// JSON Schema of the structured output, as published in
// schemas/hypothesis_output.schema.json.
std::string_view output_schema();

// Parses and checks raw backend text against the output shape and the
// evidence it must refer to. Unknown fields are rejected; scopes and action
// targets must exist; a revert must name a CM change in the bundle and an
// adjustment must stay inside the configured bounds. Throws OutputError.
BackendOutput validate_backend_output(std::string_view raw, const EvidenceBundle& bundle);

}  // namespace ranagent::reasoning
