#include "ranagent/reasoning/types.hpp"

#include <algorithm>

#include "ranagent/core/errors.hpp"
#include "ranagent/reasoning/rules.hpp"

namespace ranagent::reasoning {

namespace {

constexpr std::pair<CauseKind, std::string_view> kCauses[] = {
    {CauseKind::hardware_fault, "hardware_fault"},
    {CauseKind::config_regression, "config_regression"},
    {CauseKind::band_level_interference, "band_level_interference"},
    {CauseKind::cell_local_degradation, "cell_local_degradation"},
    {CauseKind::capacity_overload, "capacity_overload"},
    {CauseKind::unknown, "unknown"},
};

constexpr std::pair<ActionKind, std::string_view> kActions[] = {
    {ActionKind::revert_config_change, "revert_config_change"},
    {ActionKind::adjust_parameter, "adjust_parameter"},
    {ActionKind::open_ticket, "open_ticket"},
};

constexpr std::pair<QueryKind, std::string_view> kQueries[] = {
    {QueryKind::kpi, "kpi"},
    {QueryKind::alarms, "alarms"},
    {QueryKind::cm_history, "cm_history"},
    {QueryKind::inventory, "inventory"},
    {QueryKind::precedents, "precedents"},
};

template <typename E, std::size_t N>
std::string_view name_of(const std::pair<E, std::string_view> (&table)[N], E value) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return table[0].second;
}

template <typename E, std::size_t N>
std::optional<E> value_of(const std::pair<E, std::string_view> (&table)[N], std::string_view text) {
  for (const auto& [v, name] : table) {
    if (name == text) return v;
  }
  return std::nullopt;
}

Json window_json(const QueryWindow& w) {
  Json j{{"start", w.start}, {"end", w.end}};
  j["scope"] = w.scope ? element_json(*w.scope) : Json(nullptr);
  return j;
}

Retirement retirement_from_json(const Json& doc, const std::string& path) {
  Retirement r;
  r.hypothesis = hypothesis_from_json(require(doc, "hypothesis", path), join_path(path, "hypothesis"));
  r.reason = require_string(doc, "reason", path);
  r.superseded_by = doc.value("superseded_by", std::vector<std::string>{});
  return r;
}

template <typename T, typename Id>
void append_unique(std::vector<T>& into, const std::vector<T>& from, Id id) {
  std::set<std::string> seen;
  for (const auto& x : into) seen.insert(id(x));
  for (const auto& x : from) {
    if (seen.insert(id(x)).second) into.push_back(x);
  }
}

}  // namespace

std::string_view to_string(CauseKind kind) { return name_of(kCauses, kind); }
std::optional<CauseKind> parse_cause_kind(std::string_view text) { return value_of(kCauses, text); }
std::string_view to_string(ActionKind kind) { return name_of(kActions, kind); }
std::optional<ActionKind> parse_action_kind(std::string_view text) { return value_of(kActions, text); }
std::string_view to_string(QueryKind kind) { return name_of(kQueries, kind); }
std::optional<QueryKind> parse_query_kind(std::string_view text) { return value_of(kQueries, text); }

std::string_view to_string(PassKind kind) {
  switch (kind) {
    case PassKind::initial: return "initial";
    case PassKind::reflection: return "reflection";
    case PassKind::refinement: return "refinement";
  }
  return "initial";
}

PassKind pass_kind_from_string(std::string_view text) {
  if (text == "initial") return PassKind::initial;
  if (text == "reflection") return PassKind::reflection;
  if (text == "refinement") return PassKind::refinement;
  throw Error(Errc::invalid_argument, "unknown pass kind '" + std::string(text) + "'");
}

Json element_json(const ElementRef& ref) {
  return Json{{"level", std::string(to_string(ref.level))}, {"id", ref.id}};
}

ElementRef element_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "expected an element object", path);
  auto level = parse_level(require_string(doc, "level", path));
  if (!level) throw Error(Errc::invalid_argument, "unknown level", join_path(path, "level"));
  return {*level, require_string(doc, "id", path)};
}

// ---- queries ----------------------------------------------------------------

std::string FollowUpQuery::key() const {
  Json j = to_json(*this);
  j.erase("reason");
  j.erase("hypothesis_id");
  return canonical_dump(j);
}

void validate_query(const FollowUpQuery& q, const std::string& path) {
  if (q.kind == QueryKind::kpi) {
    if (!q.selector) throw Error(Errc::invalid_argument, "kpi query needs a selector", join_path(path, "selector"));
    if (q.selector->start >= q.selector->end) {
      throw Error(Errc::invalid_argument, "start must precede end", join_path(path, "selector.time_range"));
    }
    for (std::size_t i = 0; i < q.selector->kpis.size(); ++i) {
      if (!is_known_kpi(q.selector->kpis[i])) {
        throw Error(Errc::invalid_argument, "unknown KPI", index_path(join_path(path, "selector.kpis"), i));
      }
    }
    return;
  }
  if (q.kind != QueryKind::precedents && q.kind != QueryKind::inventory && q.start >= q.end) {
    throw Error(Errc::invalid_argument, "start must precede end", join_path(path, "time_range"));
  }
  if ((q.kind == QueryKind::inventory || q.kind == QueryKind::precedents) && !q.scope) {
    throw Error(Errc::invalid_argument, "query needs a scope", join_path(path, "scope"));
  }
}

Json to_json(const FollowUpQuery& q) {
  Json j{{"kind", std::string(to_string(q.kind))}, {"reason", q.reason}, {"hypothesis_id", q.hypothesis_id}};
  if (q.kind == QueryKind::kpi) {
    j["selector"] = q.selector ? store::to_json(*q.selector) : Json(nullptr);
  } else {
    j["scope"] = q.scope ? element_json(*q.scope) : Json(nullptr);
    if (q.kind != QueryKind::inventory) {
      j["start"] = q.start;
      j["end"] = q.end;
    }
    if (q.kind == QueryKind::precedents) j["action_kind"] = q.action_kind;
  }
  return j;
}

FollowUpQuery follow_up_query_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "expected a query object", path);
  FollowUpQuery q;
  auto kind = parse_query_kind(require_string(doc, "kind", path));
  if (!kind) throw Error(Errc::invalid_argument, "unknown query kind", join_path(path, "kind"));
  q.kind = *kind;
  q.reason = doc.value("reason", std::string());
  q.hypothesis_id = doc.value("hypothesis_id", std::string());
  if (q.kind == QueryKind::kpi) {
    q.selector = store::kpi_selector_from_json(require(doc, "selector", path), join_path(path, "selector"));
  } else {
    if (auto it = doc.find("scope"); it != doc.end() && !it->is_null()) {
      q.scope = element_from_json(*it, join_path(path, "scope"));
    }
    if (q.kind != QueryKind::inventory) {
      q.start = require_int(doc, "start", path);
      q.end = require_int(doc, "end", path);
    }
    q.action_kind = doc.value("action_kind", std::string());
  }
  validate_query(q, path);
  return q;
}

// ---- hypotheses -------------------------------------------------------------

Json to_json(const ProposedAction& a) {
  return Json{{"action_id", a.action_id},
              {"kind", std::string(to_string(a.kind))},
              {"target", element_json(a.target)},
              {"parameter", a.parameter},
              {"delta", a.delta},
              {"value", a.value},
              {"cm_change_id", a.cm_change_id},
              {"hypothesis_id", a.hypothesis_id},
              {"guarded_kpi", a.guarded_kpi},
              {"evaluation_window", a.evaluation_window},
              {"guard_percent", a.guard_percent}};
}

ProposedAction proposed_action_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "expected an action object", path);
  ProposedAction a;
  a.action_id = require_string(doc, "action_id", path);
  auto kind = parse_action_kind(require_string(doc, "kind", path));
  if (!kind) throw Error(Errc::invalid_argument, "unknown action kind", join_path(path, "kind"));
  a.kind = *kind;
  a.target = element_from_json(require(doc, "target", path), join_path(path, "target"));
  a.parameter = doc.value("parameter", std::string());
  a.delta = doc.value("delta", 0.0);
  a.value = doc.value("value", 0.0);
  a.cm_change_id = doc.value("cm_change_id", std::string());
  a.hypothesis_id = doc.value("hypothesis_id", std::string());
  a.guarded_kpi = doc.value("guarded_kpi", std::string());
  a.evaluation_window = doc.value("evaluation_window", kDefaultEvaluationWindow);
  a.guard_percent = doc.value("guard_percent", kDefaultGuardPercent);
  return a;
}

Json to_json(const Hypothesis& h) {
  return Json{{"id", h.id},
              {"cause_kind", std::string(to_string(h.cause_kind))},
              {"scope", element_json(h.scope)},
              {"confidence", h.confidence},
              {"evidence_refs", h.evidence_refs},
              {"proposed_action", h.proposed_action ? to_json(*h.proposed_action) : Json(nullptr)}};
}

Hypothesis hypothesis_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "expected a hypothesis object", path);
  Hypothesis h;
  h.id = require_string(doc, "id", path);
  auto cause = parse_cause_kind(require_string(doc, "cause_kind", path));
  if (!cause) throw Error(Errc::invalid_argument, "unknown cause_kind", join_path(path, "cause_kind"));
  h.cause_kind = *cause;
  h.scope = element_from_json(require(doc, "scope", path), join_path(path, "scope"));
  h.confidence = require_number(doc, "confidence", path);
  h.evidence_refs = doc.value("evidence_refs", std::vector<std::string>{});
  if (auto it = doc.find("proposed_action"); it != doc.end() && !it->is_null()) {
    h.proposed_action = proposed_action_from_json(*it, join_path(path, "proposed_action"));
  }
  return h;
}

Json to_json(const Retirement& r) {
  return Json{{"hypothesis", to_json(r.hypothesis)}, {"reason", r.reason}, {"superseded_by", r.superseded_by}};
}

bool is_unresolved(const Hypothesis& h) { return h.confidence > kResolvedLow && h.confidence < kResolvedHigh; }

void sort_hypotheses(std::vector<Hypothesis>& hypotheses) {
  std::stable_sort(hypotheses.begin(), hypotheses.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    const int ra = static_cast<int>(rule_for(a.cause_kind));
    const int rb = static_cast<int>(rule_for(b.cause_kind));
    if (ra != rb) return ra < rb;
    if (a.scope.level != b.scope.level) return a.scope.level < b.scope.level;
    return a.id < b.id;
  });
}

// ---- bundle -----------------------------------------------------------------

bool EvidenceBundle::empty() const {
  return deviation_table.rows.empty() && alarms.empty() && recent_config_changes.empty() && inventory.empty() &&
         precedents.empty() && doc_excerpts.empty() && coverage.empty();
}

bool EvidenceBundle::resolves(const std::string& ref) const {
  const auto colon = ref.find(':');
  if (colon == std::string::npos) return false;
  const std::string_view prefix(ref.data(), colon);
  const std::string id = ref.substr(colon + 1);
  if (prefix == "row") return deviation_table.find(id) != nullptr;
  if (prefix == "alarm") {
    return std::any_of(alarms.begin(), alarms.end(), [&](const sim::FmAlarm& a) { return a.id() == id; });
  }
  if (prefix == "cm") {
    return std::any_of(recent_config_changes.begin(), recent_config_changes.end(),
                       [&](const sim::CmChange& c) { return c.id() == id; });
  }
  if (prefix == "im") {
    return std::any_of(inventory.begin(), inventory.end(), [&](const store::ImRecord& r) { return r.element_id == id; });
  }
  if (prefix == "precedent") {
    return std::any_of(precedents.begin(), precedents.end(),
                       [&](const store::OptimizationRecord& r) { return r.record_id == id; });
  }
  if (prefix == "doc") {
    return std::any_of(doc_excerpts.begin(), doc_excerpts.end(), [&](const DocExcerpt& d) { return d.doc_id == id; });
  }
  return false;
}

EvidenceBundle merge(const EvidenceBundle& base, const EvidenceBundle& delta) {
  EvidenceBundle out = base;
  if (!out.topology) out.topology = delta.topology;
  auto& table = out.deviation_table;
  if (table.rows.empty() && table.summary.empty()) {
    table.window_start = delta.deviation_table.window_start;
    table.window_end = delta.deviation_table.window_end;
  }
  for (const auto& [level, s] : delta.deviation_table.summary) table.summary.try_emplace(level);
  append_unique(table.rows, delta.deviation_table.rows, [](const tsa::DeviationRow& r) { return r.id; });
  tsa::rank_rows(table);
  table.errors.insert(table.errors.end(), delta.deviation_table.errors.begin(), delta.deviation_table.errors.end());
  table.warnings.insert(table.warnings.end(), delta.deviation_table.warnings.begin(),
                        delta.deviation_table.warnings.end());

  append_unique(out.alarms, delta.alarms, [](const sim::FmAlarm& a) { return a.id(); });
  append_unique(out.recent_config_changes, delta.recent_config_changes, [](const sim::CmChange& c) { return c.id(); });
  append_unique(out.inventory, delta.inventory, [](const store::ImRecord& r) { return r.element_id; });
  append_unique(out.precedents, delta.precedents, [](const store::OptimizationRecord& r) { return r.record_id; });
  append_unique(out.doc_excerpts, delta.doc_excerpts, [](const DocExcerpt& d) { return d.doc_id; });
  for (const auto& [cell, config] : delta.configs) out.configs[cell] = config;

  out.coverage.series.insert(delta.coverage.series.begin(), delta.coverage.series.end());
  auto& aw = out.coverage.alarm_windows;
  aw.insert(aw.end(), delta.coverage.alarm_windows.begin(), delta.coverage.alarm_windows.end());
  auto& cw = out.coverage.cm_windows;
  cw.insert(cw.end(), delta.coverage.cm_windows.begin(), delta.coverage.cm_windows.end());
  return out;
}

void validate_bundle(const EvidenceBundle& b) {
  if (!b.topology) throw Error(Errc::invalid_argument, "bundle has no topology", "topology");
  const auto& topo = *b.topology;
  const auto& table = b.deviation_table;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (!topo.contains(row.level, row.element_id)) {
      throw Error(Errc::invalid_argument, "unknown element " + row.element_id,
                  index_path("deviation_table.rows", i));
    }
  }
  for (std::size_t i = 0; i < b.alarms.size(); ++i) {
    if (!topo.contains(b.alarms[i].element)) {
      throw Error(Errc::invalid_argument, "unknown element " + to_string(b.alarms[i].element), index_path("alarms", i));
    }
  }
  for (std::size_t i = 0; i < b.recent_config_changes.size(); ++i) {
    if (!topo.contains(Level::cell, b.recent_config_changes[i].cell)) {
      throw Error(Errc::invalid_argument, "unknown cell " + b.recent_config_changes[i].cell,
                  index_path("recent_config_changes", i));
    }
  }
  for (std::size_t i = 0; i < b.inventory.size(); ++i) {
    if (!topo.contains(Level::node, b.inventory[i].element_id)) {
      throw Error(Errc::invalid_argument, "unknown node " + b.inventory[i].element_id, index_path("inventory", i));
    }
  }
  if (table.window_start > table.window_end) {
    throw Error(Errc::invalid_argument, "window start exceeds end", "deviation_table.window_start");
  }
}

Json to_json(const EvidenceBundle& b) {
  Json alarms = Json::array();
  for (const auto& a : b.alarms) alarms.push_back(sim::to_json(a));
  Json changes = Json::array();
  for (const auto& c : b.recent_config_changes) {
    Json j = sim::to_json(c);
    j["id"] = c.id();
    changes.push_back(j);
  }
  Json inventory = Json::array();
  for (const auto& r : b.inventory) inventory.push_back(store::to_json(r));
  Json precedents = Json::array();
  for (const auto& r : b.precedents) precedents.push_back(store::to_json(r));
  Json docs = Json::array();
  for (const auto& d : b.doc_excerpts) docs.push_back({{"doc_id", d.doc_id}, {"passage", d.passage}, {"score", d.score}});
  Json configs = Json::object();
  for (const auto& [cell, c] : b.configs) configs[cell] = sim::to_json(c);
  Json series = Json::array();
  for (const auto& e : b.coverage.series) series.push_back(element_json(e));
  Json alarm_windows = Json::array();
  for (const auto& w : b.coverage.alarm_windows) alarm_windows.push_back(window_json(w));
  Json cm_windows = Json::array();
  for (const auto& w : b.coverage.cm_windows) cm_windows.push_back(window_json(w));
  Json alarm_ids = Json::array();
  for (const auto& a : b.alarms) alarm_ids.push_back(a.id());
  return Json{{"interval_s", b.interval},
              {"deviation_table", tsa::to_json(b.deviation_table)},
              {"alarms", alarms},
              {"alarm_ids", alarm_ids},
              {"recent_config_changes", changes},
              {"inventory", inventory},
              {"precedents", precedents},
              {"doc_excerpts", docs},
              {"configs", configs},
              {"coverage", {{"series", series}, {"alarm_windows", alarm_windows}, {"cm_windows", cm_windows}}}};
}

// ---- trace ------------------------------------------------------------------

void ReasoningTrace::append(ReasoningPass pass) {
  if (passes_.empty() && pass.kind != PassKind::initial) {
    throw Error(Errc::illegal_transition, "the first reasoning pass must be initial");
  }
  if (!passes_.empty() && pass.kind == PassKind::initial) {
    throw Error(Errc::illegal_transition, "only the first reasoning pass may be initial");
  }
  passes_.push_back(std::move(pass));
}

std::vector<FollowUpQuery> ReasoningTrace::issued_queries() const {
  std::vector<FollowUpQuery> out;
  for (const auto& p : passes_) out.insert(out.end(), p.queries.begin(), p.queries.end());
  return out;
}

Json to_json(const ReasoningPass& p, bool with_timing) {
  Json hyps = Json::array();
  for (const auto& h : p.hypotheses) hyps.push_back(to_json(h));
  Json retired = Json::array();
  for (const auto& r : p.retired) retired.push_back(to_json(r));
  Json queries = Json::array();
  for (const auto& q : p.queries) queries.push_back(to_json(q));
  Json j{{"kind", std::string(to_string(p.kind))},
         {"input_digest", p.input_digest},
         {"hypotheses", hyps},
         {"retired", retired},
         {"queries", queries},
         {"backend", p.backend}};
  if (with_timing) j["elapsed_ms"] = p.elapsed_ms;
  return j;
}

Json to_json(const ReasoningTrace& trace, bool with_timing) {
  Json passes = Json::array();
  for (const auto& p : trace.passes()) passes.push_back(to_json(p, with_timing));
  return passes;
}

ReasoningPass reasoning_pass_from_json(const Json& doc, const std::string& path) {
  ReasoningPass p;
  p.kind = pass_kind_from_string(require_string(doc, "kind", path));
  p.input_digest = require_string(doc, "input_digest", path);
  p.backend = doc.value("backend", std::string());
  p.elapsed_ms = doc.value("elapsed_ms", 0.0);
  const auto hyps = doc.value("hypotheses", Json::array());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    p.hypotheses.push_back(hypothesis_from_json(hyps[i], index_path(join_path(path, "hypotheses"), i)));
  }
  const auto retired = doc.value("retired", Json::array());
  for (std::size_t i = 0; i < retired.size(); ++i) {
    p.retired.push_back(retirement_from_json(retired[i], index_path(join_path(path, "retired"), i)));
  }
  const auto queries = doc.value("queries", Json::array());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    p.queries.push_back(follow_up_query_from_json(queries[i], index_path(join_path(path, "queries"), i)));
  }
  return p;
}

}  // namespace ranagent::reasoning
