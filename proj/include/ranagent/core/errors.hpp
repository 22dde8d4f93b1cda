#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ranagent {

enum class Errc {
  invalid_argument,
  duplicate_id,
  dangling_reference,
  malformed_sample,
  unknown_element,
  unknown_kpi,
  out_of_bounds,
  series_too_short,
  empty_group,
  mismatched_timestamps,
  empty_corpus,
  unsupported_intent,
  illegal_transition,
  not_found,
  conflict,
  unknown_recipient,
  mailbox_closed,
  parse_error,
  backend_failure,
  timeout,
  io_error,
  internal,
};

std::string_view to_string(Errc code);
std::optional<Errc> errc_from_string(std::string_view text);

// Coarse classes used for CLI exit codes and HTTP status mapping.
enum class ErrorClass { validation, backend, not_found, conflict, internal };

ErrorClass classify(Errc code);

// Exit code contract: 0 success, 2 validation, 3 backend failure, 4 not found.
int exit_code_for(Errc code);

int http_status_for(Errc code);

class Error : public std::runtime_error {
public:
  Error(Errc code, std::string message, std::string path = {});

  Errc code() const noexcept { return code_; }

  // Field path of the offending input (e.g. "hypotheses[0].confidence"),
  // empty when not applicable.
  const std::string& path() const noexcept { return path_; }

private:
  Errc code_;
  std::string path_;
};

}  // namespace ranagent
