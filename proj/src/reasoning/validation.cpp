#include "ranagent/reasoning/validation.hpp"

#include <cmath>
#include <set>

#include "ranagent/reasoning/rules.hpp"
#include "schema_text.hpp"

namespace ranagent::reasoning {

namespace {

[[noreturn]] void fail(OutputIssue issue, std::string message, std::string path) {
  throw OutputError(issue, std::move(message), std::move(path));
}

void only_keys(const Json& obj, std::initializer_list<std::string_view> allowed, const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) fail(OutputIssue::malformed, "unexpected field '" + key + "'", join_path(path, key));
  }
}

const Json& field(const Json& obj, std::string_view key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(OutputIssue::malformed, "missing field", join_path(path, key));
  return *it;
}

std::string string_field(const Json& obj, std::string_view key, const std::string& path, bool allow_empty = false) {
  const Json& v = field(obj, key, path);
  if (!v.is_string()) fail(OutputIssue::malformed, "expected a string", join_path(path, key));
  auto s = v.get<std::string>();
  if (s.empty() && !allow_empty) fail(OutputIssue::malformed, "must not be empty", join_path(path, key));
  return s;
}

double number_field(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_number()) fail(OutputIssue::malformed, "expected a number", join_path(path, key));
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(OutputIssue::out_of_range, "must be finite", join_path(path, key));
  return d;
}

ElementRef element_field(const Json& obj, std::string_view key, const std::string& path,
                         const sim::NetworkTopology& topo) {
  const std::string p = join_path(path, key);
  const Json& v = field(obj, key, path);
  if (!v.is_object()) fail(OutputIssue::malformed, "expected an element object", p);
  only_keys(v, {"level", "id"}, p);
  const auto level_text = string_field(v, "level", p);
  auto level = parse_level(level_text);
  if (!level) fail(OutputIssue::unknown_enum, "unknown level '" + level_text + "'", join_path(p, "level"));
  ElementRef ref{*level, string_field(v, "id", p)};
  if (!topo.contains(ref)) fail(OutputIssue::unresolved_ref, "no such element " + to_string(ref), p);
  return ref;
}

ProposedAction parse_action(const Json& v, const std::string& path, const EvidenceBundle& bundle,
                            const Hypothesis& owner) {
  if (!v.is_object()) fail(OutputIssue::malformed, "expected an action object", path);
  only_keys(v,
            {"action_id", "kind", "target", "parameter", "delta", "value", "cm_change_id", "hypothesis_id",
             "guarded_kpi", "evaluation_window", "guard_percent"},
            path);
  const auto& topo = *bundle.topology;
  ProposedAction a;
  a.action_id = string_field(v, "action_id", path);
  const auto kind_text = string_field(v, "kind", path);
  auto kind = parse_action_kind(kind_text);
  if (!kind) fail(OutputIssue::unknown_enum, "unknown action kind '" + kind_text + "'", join_path(path, "kind"));
  a.kind = *kind;
  a.target = element_field(v, "target", path, topo);
  a.hypothesis_id = v.contains("hypothesis_id") ? string_field(v, "hypothesis_id", path, true) : owner.id;
  if (a.hypothesis_id.empty()) a.hypothesis_id = owner.id;
  if (a.hypothesis_id != owner.id) {
    fail(OutputIssue::unresolved_ref, "action belongs to another hypothesis", join_path(path, "hypothesis_id"));
  }
  if (v.contains("guarded_kpi")) {
    a.guarded_kpi = string_field(v, "guarded_kpi", path, true);
    if (!a.guarded_kpi.empty() && !is_known_kpi(a.guarded_kpi)) {
      fail(OutputIssue::unknown_enum, "unknown KPI '" + a.guarded_kpi + "'", join_path(path, "guarded_kpi"));
    }
  }
  if (v.contains("evaluation_window")) {
    const Json& w = v["evaluation_window"];
    if (!w.is_number_integer()) fail(OutputIssue::malformed, "expected an integer", join_path(path, "evaluation_window"));
    a.evaluation_window = w.get<std::int64_t>();
    if (a.evaluation_window < 1) fail(OutputIssue::out_of_range, "must be >= 1", join_path(path, "evaluation_window"));
  }
  if (v.contains("guard_percent")) {
    a.guard_percent = number_field(v, "guard_percent", path);
    if (a.guard_percent <= 0.0) fail(OutputIssue::out_of_range, "must be positive", join_path(path, "guard_percent"));
  }
  if (v.contains("parameter")) a.parameter = string_field(v, "parameter", path, true);

  switch (a.kind) {
    case ActionKind::open_ticket: break;
    case ActionKind::revert_config_change: {
      a.cm_change_id = string_field(v, "cm_change_id", path);
      const sim::CmChange* change = nullptr;
      for (const auto& c : bundle.recent_config_changes) {
        if (c.id() == a.cm_change_id) change = &c;
      }
      if (!change) {
        fail(OutputIssue::unresolved_ref, "no CM change '" + a.cm_change_id + "' in the evidence",
             join_path(path, "cm_change_id"));
      }
      if (a.target != ElementRef{Level::cell, change->cell}) {
        fail(OutputIssue::unresolved_ref, "revert target differs from the changed cell", join_path(path, "target"));
      }
      // The undo is fully determined by the change itself.
      a.parameter = change->parameter;
      a.value = change->old_value;
      auto cfg = bundle.configs.find(change->cell);
      const double current = cfg != bundle.configs.end() ? cfg->second.get(change->parameter) : change->new_value;
      a.delta = a.value - current;
      break;
    }
    case ActionKind::adjust_parameter: {
      if (a.target.level != Level::cell) {
        fail(OutputIssue::out_of_range, "parameters are adjusted per cell", join_path(path, "target"));
      }
      if (!is_known_parameter(a.parameter)) {
        fail(OutputIssue::unknown_enum, "unknown parameter '" + a.parameter + "'", join_path(path, "parameter"));
      }
      a.value = number_field(v, "value", path);
      const auto& bounds = topo.bounds().for_parameter(a.parameter);
      if (a.value < bounds.min || a.value > bounds.max) {
        fail(OutputIssue::out_of_range, "value outside the configured bounds", join_path(path, "value"));
      }
      auto cfg = bundle.configs.find(a.target.id);
      const double current = cfg != bundle.configs.end() ? cfg->second.get(a.parameter)
                                                         : topo.cell(a.target.id).initial_config.get(a.parameter);
      a.delta = a.value - current;
      break;
    }
  }
  return a;
}

}  // namespace

std::string_view to_string(OutputIssue issue) {
  switch (issue) {
    case OutputIssue::malformed: return "malformed";
    case OutputIssue::out_of_range: return "out_of_range";
    case OutputIssue::unknown_enum: return "unknown_enum";
    case OutputIssue::unresolved_ref: return "unresolved_ref";
  }
  return "malformed";
}

OutputError::OutputError(OutputIssue issue, std::string message, std::string path)
    : Error(Errc::parse_error, std::string(to_string(issue)) + ": " + message, std::move(path)), issue_(issue) {}

std::string_view output_schema() { return detail::kOutputSchemaText; }

BackendOutput validate_backend_output(std::string_view raw, const EvidenceBundle& bundle) {
  if (!bundle.topology) throw Error(Errc::invalid_argument, "bundle has no topology", "topology");
  const auto& topo = *bundle.topology;
  Json doc;
  try {
    doc = Json::parse(raw);
  } catch (const Json::parse_error& e) {
    fail(OutputIssue::malformed, std::string("not valid JSON: ") + e.what(), "$");
  }
  if (!doc.is_object()) fail(OutputIssue::malformed, "expected an object", "$");
  only_keys(doc, {"schema_version", "hypotheses", "queries", "retired"}, "");
  if (doc.contains("schema_version")) {
    const auto version = string_field(doc, "schema_version", "");
    if (version != kSchemaVersion) fail(OutputIssue::unknown_enum, "unsupported schema version", "schema_version");
  }

  BackendOutput out;
  const Json& hyps = field(doc, "hypotheses", "");
  if (!hyps.is_array()) fail(OutputIssue::malformed, "expected an array", "hypotheses");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const std::string path = index_path("hypotheses", i);
    const Json& v = hyps[i];
    if (!v.is_object()) fail(OutputIssue::malformed, "expected a hypothesis object", path);
    only_keys(v, {"id", "cause_kind", "scope", "confidence", "evidence_refs", "proposed_action"}, path);
    Hypothesis h;
    h.id = string_field(v, "id", path);
    if (!ids.insert(h.id).second) fail(OutputIssue::malformed, "duplicate hypothesis id", join_path(path, "id"));
    const auto cause_text = string_field(v, "cause_kind", path);
    auto cause = parse_cause_kind(cause_text);
    if (!cause) fail(OutputIssue::unknown_enum, "unknown cause_kind '" + cause_text + "'", join_path(path, "cause_kind"));
    h.cause_kind = *cause;
    h.scope = element_field(v, "scope", path, topo);
    h.confidence = number_field(v, "confidence", path);
    if (h.confidence < 0.0 || h.confidence > 1.0) {
      fail(OutputIssue::out_of_range, "confidence must lie in [0, 1]", join_path(path, "confidence"));
    }
    const Json& refs = field(v, "evidence_refs", path);
    if (!refs.is_array()) fail(OutputIssue::malformed, "expected an array", join_path(path, "evidence_refs"));
    for (std::size_t j = 0; j < refs.size(); ++j) {
      const std::string ref_path = index_path(join_path(path, "evidence_refs"), j);
      if (!refs[j].is_string()) fail(OutputIssue::malformed, "expected a string", ref_path);
      auto ref = refs[j].get<std::string>();
      if (!bundle.resolves(ref)) fail(OutputIssue::unresolved_ref, "'" + ref + "' does not resolve", ref_path);
      h.evidence_refs.push_back(std::move(ref));
    }
    if (auto it = v.find("proposed_action"); it != v.end() && !it->is_null()) {
      const std::string action_path = join_path(path, "proposed_action");
      if (h.cause_kind == CauseKind::unknown) {
        fail(OutputIssue::malformed, "an unknown cause cannot carry an action", action_path);
      }
      h.proposed_action = parse_action(*it, action_path, bundle, h);
    }
    out.hypotheses.push_back(std::move(h));
  }
  sort_hypotheses(out.hypotheses);

  if (auto it = doc.find("queries"); it != doc.end()) {
    if (!it->is_array()) fail(OutputIssue::malformed, "expected an array", "queries");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string path = index_path("queries", i);
      const Json& q = (*it)[i];
      if (q.is_object() && q.contains("kind") && q["kind"].is_string() &&
          !parse_query_kind(q["kind"].get<std::string>())) {
        fail(OutputIssue::unknown_enum, "unknown query kind", join_path(path, "kind"));
      }
      try {
        out.queries.push_back(follow_up_query_from_json(q, path));
      } catch (const OutputError&) {
        throw;
      } catch (const Error& e) {
        fail(OutputIssue::malformed, e.what(), e.path().empty() ? path : e.path());
      } catch (const Json::exception& e) {
        fail(OutputIssue::malformed, e.what(), path);
      }
      const auto& query = out.queries.back();
      if (query.kind == QueryKind::kpi && query.selector && query.selector->element_ids) {
        for (std::size_t j = 0; j < query.selector->element_ids->size(); ++j) {
          if (!topo.contains(query.selector->level, (*query.selector->element_ids)[j])) {
            fail(OutputIssue::unresolved_ref, "unknown element",
                 index_path(join_path(path, "selector.element_ids"), j));
          }
        }
      }
      if (query.scope && !topo.contains(*query.scope)) {
        fail(OutputIssue::unresolved_ref, "unknown element", join_path(path, "scope"));
      }
    }
  }

  if (auto it = doc.find("retired"); it != doc.end()) {
    if (!it->is_array()) fail(OutputIssue::malformed, "expected an array", "retired");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string path = index_path("retired", i);
      const Json& r = (*it)[i];
      if (!r.is_object()) fail(OutputIssue::malformed, "expected an object", path);
      only_keys(r, {"id", "reason"}, path);
      out.retired.push_back({string_field(r, "id", path), string_field(r, "reason", path)});
    }
  }
  return out;
}

}  // namespace ranagent::reasoning
