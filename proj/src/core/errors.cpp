#include "ranagent/core/errors.hpp"

namespace ranagent {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::duplicate_id: return "duplicate_id";
    case Errc::dangling_reference: return "dangling_reference";
    case Errc::malformed_sample: return "malformed_sample";
    case Errc::unknown_element: return "unknown_element";
    case Errc::unknown_kpi: return "unknown_kpi";
    case Errc::out_of_bounds: return "out_of_bounds";
    case Errc::series_too_short: return "series_too_short";
    case Errc::empty_group: return "empty_group";
    case Errc::mismatched_timestamps: return "mismatched_timestamps";
    case Errc::empty_corpus: return "empty_corpus";
    case Errc::unsupported_intent: return "unsupported_intent";
    case Errc::illegal_transition: return "illegal_transition";
    case Errc::not_found: return "not_found";
    case Errc::conflict: return "conflict";
    case Errc::unknown_recipient: return "unknown_recipient";
    case Errc::mailbox_closed: return "mailbox_closed";
    case Errc::parse_error: return "parse_error";
    case Errc::backend_failure: return "backend_failure";
    case Errc::timeout: return "timeout";
    case Errc::io_error: return "io_error";
    case Errc::internal: return "internal";
  }
  return "internal";
}

std::optional<Errc> errc_from_string(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(Errc::internal); ++i) {
    if (to_string(static_cast<Errc>(i)) == text) return static_cast<Errc>(i);
  }
  return std::nullopt;
}

ErrorClass classify(Errc code) {
  switch (code) {
    case Errc::not_found:
      return ErrorClass::not_found;
    case Errc::conflict:
    case Errc::mailbox_closed:
    case Errc::illegal_transition:
      return ErrorClass::conflict;
    case Errc::parse_error:
    case Errc::backend_failure:
    case Errc::timeout:
      return ErrorClass::backend;
    case Errc::io_error:
    case Errc::internal:
      return ErrorClass::internal;
    default:
      return ErrorClass::validation;
  }
}

int exit_code_for(Errc code) {
  switch (classify(code)) {
    case ErrorClass::validation:
    case ErrorClass::conflict:
      return 2;
    case ErrorClass::backend:
      return 3;
    case ErrorClass::not_found:
      return 4;
    case ErrorClass::internal:
      return 1;
  }
  return 1;
}

int http_status_for(Errc code) {
  switch (classify(code)) {
    case ErrorClass::validation: return 400;
    case ErrorClass::conflict: return 409;
    case ErrorClass::backend: return 502;
    case ErrorClass::not_found: return 404;
    case ErrorClass::internal: return 500;
  }
  return 500;
}

Error::Error(Errc code, std::string message, std::string path)
    : std::runtime_error(std::move(message)), code_(code), path_(std::move(path)) {}

}  // namespace ranagent
