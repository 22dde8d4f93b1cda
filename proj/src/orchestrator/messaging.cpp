#include "ranagent/orchestrator/messaging.hpp"

#include "ranagent/core/errors.hpp"
#include "ranagent/tsa/deviation_table.hpp"

namespace ranagent::orchestrator {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::master: return "master";
    case Role::analysis: return "analysis";
    case Role::historical: return "historical";
    case Role::documentation: return "documentation";
    case Role::validation: return "validation";
  }
  return "master";
}

Role role_from_string(std::string_view text) {
  for (auto r : kAllRoles) {
    if (to_string(r) == text) return r;
  }
  throw Error(Errc::invalid_argument, "unknown role '" + std::string(text) + "'", "role");
}

std::string_view to_string(IntentTag tag) {
  switch (tag) {
    case IntentTag::analyze_request: return "analyze_request";
    case IntentTag::analysis_result: return "analysis_result";
    case IntentTag::query_request: return "query_request";
    case IntentTag::query_result: return "query_result";
    case IntentTag::precedent_request: return "precedent_request";
    case IntentTag::precedent_result: return "precedent_result";
    case IntentTag::doc_request: return "doc_request";
    case IntentTag::doc_result: return "doc_result";
    case IntentTag::validate_request: return "validate_request";
    case IntentTag::validation_result: return "validation_result";
    case IntentTag::cancel: return "cancel";
    case IntentTag::failure: return "failure";
  }
  return "cancel";
}

IntentTag tag_of(const Payload& payload) {
  // Variant alternatives are declared in IntentTag order.
  return static_cast<IntentTag>(payload.index());
}

void validate_message(const AgentMessage& m) {
  if (m.sender == m.recipient) {
    throw Error(Errc::invalid_argument, "sender and recipient are both " + std::string(to_string(m.sender)),
                "message.recipient");
  }
  if (tag_of(m.payload) != m.tag) {
    throw Error(Errc::invalid_argument,
                "payload does not match intent tag " + std::string(to_string(m.tag)), "message.payload");
  }
  if (m.message_id.empty()) throw Error(Errc::invalid_argument, "message id is empty", "message.message_id");
}

namespace {

Json bundle_summary(const reasoning::EvidenceBundle& b) {
  return Json{{"rows", b.deviation_table.rows.size()},
              {"alarms", b.alarms.size()},
              {"cm_changes", b.recent_config_changes.size()},
              {"inventory", b.inventory.size()},
              {"precedents", b.precedents.size()},
              {"docs", b.doc_excerpts.size()},
              {"digest", digest_of(reasoning::to_json(b))}};
}

}  // namespace

Json to_json(const ValidationOutcome& o) {
  return Json{{"outcome", std::string(store::to_string(o.outcome))},
              {"kpi_delta", o.kpi_delta},
              {"snapshot_id", o.snapshot_id},
              {"record_id", o.record_id},
              {"baseline_mean", o.baseline_mean},
              {"post_mean", o.post_mean},
              {"change_percent", o.change_percent},
              {"restored", o.restored}};
}

Json payload_summary(const Payload& payload) {
  return std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, AnalyzeRequest>) {
          return Json{{"intent", to_json(p.intent)}};
        } else if constexpr (std::is_same_v<T, AnalysisResult>) {
          return bundle_summary(p.bundle);
        } else if constexpr (std::is_same_v<T, QueryRequest>) {
          Json qs = Json::array();
          for (const auto& q : p.queries) qs.push_back(reasoning::to_json(q));
          return Json{{"queries", qs}};
        } else if constexpr (std::is_same_v<T, QueryResult>) {
          return bundle_summary(p.delta);
        } else if constexpr (std::is_same_v<T, PrecedentRequest>) {
          Json ts = Json::array();
          for (const auto& t : p.targets) {
            ts.push_back({{"element", reasoning::element_json(t.element)}, {"action_kind", t.action_kind}});
          }
          return Json{{"targets", ts}};
        } else if constexpr (std::is_same_v<T, PrecedentResult>) {
          Json ids = Json::array();
          for (const auto& r : p.precedents) ids.push_back(r.record_id);
          Json cells = Json::array();
          for (const auto& [cell, cfg] : p.configs) cells.push_back(cell);
          return Json{{"precedents", ids}, {"configs", cells}};
        } else if constexpr (std::is_same_v<T, DocRequest>) {
          return Json{{"terms", p.terms}, {"k", p.k}};
        } else if constexpr (std::is_same_v<T, DocResult>) {
          Json ids = Json::array();
          for (const auto& d : p.excerpts) ids.push_back(d.doc_id);
          return Json{{"docs", ids}, {"stopword_only", p.stopword_only}};
        } else if constexpr (std::is_same_v<T, ValidateRequest>) {
          return Json{{"action", reasoning::to_json(p.action)}};
        } else if constexpr (std::is_same_v<T, ValidationResult>) {
          return to_json(p.outcome);
        } else if constexpr (std::is_same_v<T, Cancel>) {
          return Json{{"reason", p.reason}};
        } else {
          return Json{{"code", std::string(to_string(p.code))}, {"message", p.message}};
        }
      },
      payload);
}

Json to_json(const AgentMessage& m) {
  return Json{{"message_id", m.message_id},
              {"correlation_id", m.correlation_id},
              {"sender", std::string(to_string(m.sender))},
              {"recipient", std::string(to_string(m.recipient))},
              {"tag", std::string(to_string(m.tag))},
              {"payload", payload_summary(m.payload)},
              {"sent_at", m.sent_at},
              {"in_reply_to", m.in_reply_to}};
}

void MessageBus::register_role(Role role) {
  std::lock_guard lock(mu_);
  boxes_.try_emplace(role);
}

bool MessageBus::registered(Role role) const {
  std::lock_guard lock(mu_);
  return boxes_.contains(role);
}

Receipt MessageBus::dispatch(const AgentMessage& message) {
  validate_message(message);
  std::lock_guard lock(mu_);
  auto it = boxes_.find(message.recipient);
  if (it == boxes_.end()) {
    throw Error(Errc::unknown_recipient, "no agent registered for role " + std::string(to_string(message.recipient)),
                "message.recipient");
  }
  if (closed_) throw Error(Errc::mailbox_closed, "run has finished; mailboxes are closed", "message");
  it->second.queue.push_back(message);
  const std::size_t position = ++it->second.delivered;
  cv_.notify_all();
  return {message.recipient, position};
}

std::optional<AgentMessage> MessageBus::receive(Role role, std::chrono::milliseconds timeout,
                                                const std::function<bool(const AgentMessage&)>& match) {
  std::unique_lock lock(mu_);
  auto box = boxes_.find(role);
  if (box == boxes_.end()) {
    throw Error(Errc::unknown_recipient, "no agent registered for role " + std::string(to_string(role)), "role");
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    auto& q = box->second.queue;
    for (auto it = q.begin(); it != q.end(); ++it) {
      if (!match || match(*it)) {
        AgentMessage m = std::move(*it);
        q.erase(it);
        return m;
      }
    }
    if (closed_) return std::nullopt;
    if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
      for (auto it = q.begin(); it != q.end(); ++it) {
        if (!match || match(*it)) {
          AgentMessage m = std::move(*it);
          q.erase(it);
          return m;
        }
      }
      return std::nullopt;
    }
  }
}

void MessageBus::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

bool MessageBus::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

}  // namespace ranagent::orchestrator
