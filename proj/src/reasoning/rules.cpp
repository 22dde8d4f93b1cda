#include "ranagent/reasoning/rules.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "ranagent/core/errors.hpp"

namespace ranagent::reasoning {

namespace {

std::optional<std::string> node_of(const sim::NetworkTopology& topo, const ElementRef& e) {
  if (!topo.contains(e)) return std::nullopt;
  if (e.level == Level::node) return e.id;
  if (e.level == Level::cell) return topo.cell(e.id).node;
  return std::nullopt;
}

bool related(const sim::NetworkTopology& topo, const ElementRef& a, const ElementRef& b) {
  return a == b || topo.is_ancestor(a, b) || topo.is_ancestor(b, a);
}

bool within(Timestamp t, Timestamp lo, Timestamp hi) { return t >= lo && t <= hi; }

std::int64_t abs_diff(Timestamp a, Timestamp b) { return a > b ? a - b : b - a; }

void add_ref(std::vector<std::string>& refs, const std::string& ref) {
  if (std::find(refs.begin(), refs.end(), ref) == refs.end()) refs.push_back(ref);
}

bool is_degradation(const tsa::DeviationRow& row) {
  const KpiInfo* info = find_kpi(row.kpi);
  if (!info) return true;
  const bool down = row.magnitude < 0.0;
  return info->polarity == Polarity::higher_is_better ? down : !down;
}

sim::CellConfig current_config(const EvidenceBundle& b, const std::string& cell) {
  if (auto it = b.configs.find(cell); it != b.configs.end()) return it->second;
  return b.topology->cell(cell).initial_config;
}

// Cell-level change points on `kpi` coinciding with `onset`.
std::vector<const tsa::DeviationRow*> coincident_cell_shifts(const EvidenceBundle& b, const std::string& kpi,
                                                              Timestamp onset) {
  std::vector<const tsa::DeviationRow*> out;
  const Timestamp tolerance = kCoincidenceWindow * b.interval;
  for (const auto& r : b.deviation_table.rows) {
    if (r.kind == tsa::FindingKind::change_point && r.level == Level::cell && r.kpi == kpi &&
        abs_diff(r.timestamp, onset) <= tolerance) {
      out.push_back(&r);
    }
  }
  return out;
}

std::vector<const sim::FmAlarm*> colocated_alarms(const EvidenceBundle& b, const ElementRef& e, Timestamp onset,
                                                  const std::vector<sim::FmAlarm>& alarms) {
  const auto& topo = *b.topology;
  const auto node = node_of(topo, e);
  std::vector<const sim::FmAlarm*> out;
  for (const auto& a : alarms) {
    if (abs_diff(a.timestamp, onset) > kAlarmWindow * b.interval) continue;
    const auto alarm_node = node_of(topo, a.element);
    if (a.element == e || (node && alarm_node && *node == *alarm_node)) out.push_back(&a);
  }
  std::sort(out.begin(), out.end(), [](const sim::FmAlarm* x, const sim::FmAlarm* y) {
    return std::tie(x->timestamp, x->element, x->code) < std::tie(y->timestamp, y->element, y->code);
  });
  return out;
}

std::vector<const sim::CmChange*> candidate_changes(const EvidenceBundle& b, const ElementRef& e, Timestamp onset,
                                                    const std::vector<sim::CmChange>& changes) {
  std::set<std::string> cells;
  if (e.level == Level::cell) {
    cells.insert(e.id);
  } else if (b.topology->contains(e)) {
    for (const auto& c : b.topology->member_cells(e)) cells.insert(c);
  }
  const Timestamp lo = onset - kCmLookback * b.interval;
  const Timestamp hi = onset + kCmLookahead * b.interval;
  std::vector<const sim::CmChange*> out;
  for (const auto& c : changes) {
    if (cells.contains(c.cell) && within(c.timestamp, lo, hi)) out.push_back(&c);
  }
  std::sort(out.begin(), out.end(), [](const sim::CmChange* x, const sim::CmChange* y) {
    return std::tie(x->timestamp, x->cell, x->parameter) < std::tie(y->timestamp, y->cell, y->parameter);
  });
  return out;
}

ProposedAction make_action(ActionKind kind, const ElementRef& target, CauseKind cause, const ElementRef& scope,
                           const std::string& kpi) {
  ProposedAction a;
  a.hypothesis_id = hypothesis_id(cause, scope);
  a.action_id = "A-" + a.hypothesis_id.substr(2);
  a.kind = kind;
  a.target = target;
  a.guarded_kpi = kpi;
  return a;
}

std::optional<ProposedAction> cell_adjustment(const EvidenceBundle& b, const tsa::DeviationRow& row,
                                              const ElementRef& scope) {
  const auto config = current_config(b, row.element_id);
  const auto& bounds = b.topology->bounds();
  ProposedAction a = make_action(ActionKind::adjust_parameter, scope, CauseKind::cell_local_degradation, scope, row.kpi);
  if (config.tx_power_dbm + 1.0 <= bounds.tx_power_dbm.max) {
    a.parameter = std::string(param::tx_power);
    a.delta = 1.0;
    a.value = config.tx_power_dbm + 1.0;
  } else if (config.electrical_tilt_deg - 1.0 >= bounds.electrical_tilt_deg.min) {
    a.parameter = std::string(param::tilt);
    a.delta = -1.0;
    a.value = config.electrical_tilt_deg - 1.0;
  } else {
    a.kind = ActionKind::open_ticket;
  }
  return a;
}

// Earliest change point among the hypothesis's row references, falling back
// to the earliest referenced row of any kind.
const tsa::DeviationRow* anchor_row(const Hypothesis& h, const EvidenceBundle& b) {
  const tsa::DeviationRow* best = nullptr;
  const tsa::DeviationRow* any = nullptr;
  for (const auto& ref : h.evidence_refs) {
    if (ref.rfind("row:", 0) != 0) continue;
    const auto* row = b.deviation_table.find(ref.substr(4));
    if (!row) continue;
    auto earlier = [](const tsa::DeviationRow* x, const tsa::DeviationRow* y) {
      return !x || std::tie(y->timestamp, y->id) < std::tie(x->timestamp, x->id);
    };
    if (earlier(any, row)) any = row;
    if (row->kind == tsa::FindingKind::change_point && earlier(best, row)) best = row;
  }
  return best ? best : any;
}

std::vector<std::string> change_point_refs(const Hypothesis& h, const EvidenceBundle& b) {
  std::vector<std::string> out;
  for (const auto& ref : h.evidence_refs) {
    if (ref.rfind("row:", 0) != 0) continue;
    const auto* row = b.deviation_table.find(ref.substr(4));
    if (row && row->kind == tsa::FindingKind::change_point) out.push_back(ref);
  }
  return out;
}

std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool mentions(const std::string& passage, std::string_view token) {
  if (token.empty()) return false;
  const std::string text = lowercase(passage);
  std::string spaced(token);
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  return text.find(token) != std::string::npos || text.find(spaced) != std::string::npos;
}

// Inventory, precedent and documentation references for a hypothesis.
void attach_context(Hypothesis& h, const EvidenceBundle& b) {
  const auto& topo = *b.topology;
  std::optional<std::string> node = node_of(topo, h.scope);
  for (const auto& im : b.inventory) {
    if (node && im.element_id == *node) add_ref(h.evidence_refs, "im:" + im.element_id);
  }
  if (h.proposed_action) {
    const auto& action = *h.proposed_action;
    std::optional<std::string> model;
    if (auto target_node = node_of(topo, action.target)) {
      for (const auto& im : b.inventory) {
        if (im.element_id == *target_node) model = im.hardware_model;
      }
    }
    for (const auto& p : b.precedents) {
      if (p.action_kind != to_string(action.kind)) continue;
      bool match = p.target == action.target;
      if (!match && model) {
        if (auto pn = node_of(topo, p.target)) {
          for (const auto& im : b.inventory) {
            if (im.element_id == *pn && im.hardware_model == *model) match = true;
          }
        }
      }
      if (match) add_ref(h.evidence_refs, "precedent:" + p.record_id);
    }
  }
  for (const auto& d : b.doc_excerpts) {
    const bool by_cause = mentions(d.passage, to_string(h.cause_kind));
    const bool by_param = h.proposed_action && mentions(d.passage, h.proposed_action->parameter);
    if (by_cause || by_param) add_ref(h.evidence_refs, "doc:" + d.doc_id);
  }
}

bool window_covers(const sim::NetworkTopology& topo, const std::vector<QueryWindow>& windows, const ElementRef& e,
                   Timestamp lo, Timestamp hi) {
  for (const auto& w : windows) {
    const bool scope_ok = !w.scope || *w.scope == e || topo.is_ancestor(*w.scope, e);
    if (scope_ok && w.start <= lo && w.end > hi) return true;
  }
  return false;
}

// Reason for retiring `h` when the merged evidence contradicts its rule
// conditions; empty when not contradicted or not decidable.
std::string falsification(const Hypothesis& h, const EvidenceBundle& b) {
  const auto* anchor = anchor_row(h, b);
  if (!anchor) return {};
  const auto& topo = *b.topology;
  const Timestamp onset = anchor->timestamp;
  switch (h.cause_kind) {
    case CauseKind::config_regression: {
      if (h.scope.level != Level::cell) return {};
      const Timestamp lo = onset - kCmLookback * b.interval;
      const Timestamp hi = onset + kCmLookahead * b.interval;
      if (window_covers(topo, b.coverage.cm_windows, h.scope, lo, hi) &&
          candidate_changes(b, h.scope, onset, b.recent_config_changes).empty()) {
        return "no configuration change on " + h.scope.id + " in the " + std::to_string(kCmLookback) +
               " intervals before onset";
      }
      return {};
    }
    case CauseKind::hardware_fault: {
      const auto node = node_of(topo, h.scope);
      if (!node) return {};
      const ElementRef node_ref{Level::node, *node};
      const Timestamp lo = onset - kAlarmWindow * b.interval;
      const Timestamp hi = onset + kAlarmWindow * b.interval;
      if (window_covers(topo, b.coverage.alarm_windows, node_ref, lo, hi) &&
          colocated_alarms(b, node_ref, onset, b.alarms).empty()) {
        return "no alarm on " + *node + " within " + std::to_string(kAlarmWindow) + " intervals of onset";
      }
      return {};
    }
    case CauseKind::band_level_interference: {
      if (h.scope.level != Level::band || !topo.contains(h.scope)) return {};
      const auto cells = topo.member_cells(h.scope);
      for (const auto& c : cells) {
        if (!b.coverage.series.contains({Level::cell, c})) return {};
      }
      std::set<std::string> shifted;
      for (const auto* r : coincident_cell_shifts(b, anchor->kpi, onset)) {
        if (topo.cell(r->element_id).band == h.scope.id && r->direction == anchor->direction) {
          shifted.insert(r->element_id);
        }
      }
      if (static_cast<double>(shifted.size()) < kBandShare * static_cast<double>(cells.size()) - 1e-9) {
        return "only " + std::to_string(shifted.size()) + " of " + std::to_string(cells.size()) + " cells of " +
               h.scope.id + " shifted";
      }
      return {};
    }
    case CauseKind::cell_local_degradation: {
      if (h.scope.level != Level::cell || !topo.contains(h.scope)) return {};
      for (const auto* r : coincident_cell_shifts(b, anchor->kpi, onset)) {
        if (r->element_id != h.scope.id && topo.cell(r->element_id).node == topo.cell(h.scope.id).node) {
          return "sibling cell " + r->element_id + " shifted in the same window";
        }
      }
      return {};
    }
    default: return {};
  }
}

// Whether the delta adds evidence satisfying the hypothesis's own rule.
bool confirms(const Hypothesis& prior, const Hypothesis* fresh, const EvidenceBundle& merged,
              const EvidenceBundle& delta) {
  if (!fresh) return false;
  const auto& topo = *merged.topology;
  auto new_ref_with = [&](std::string_view prefix) {
    for (const auto& ref : fresh->evidence_refs) {
      if (ref.rfind(prefix, 0) != 0) continue;
      if (std::find(prior.evidence_refs.begin(), prior.evidence_refs.end(), ref) != prior.evidence_refs.end()) continue;
      if (delta.resolves(ref)) return true;
    }
    return false;
  };
  switch (prior.cause_kind) {
    case CauseKind::hardware_fault: return new_ref_with("alarm:");
    case CauseKind::config_regression: return new_ref_with("cm:");
    case CauseKind::band_level_interference: return new_ref_with("row:");
    case CauseKind::cell_local_degradation: {
      if (prior.scope.level != Level::cell || !topo.contains(prior.scope)) return false;
      const auto& node = topo.node(topo.cell(prior.scope.id).node);
      for (const auto& c : node.cells) {
        if (c != prior.scope.id && !delta.coverage.series.contains({Level::cell, c})) return false;
      }
      // fresh exists, so R4 still holds on the merged evidence.
      return true;
    }
    default: return false;
  }
}

}  // namespace

std::string_view to_string(Rule rule) {
  switch (rule) {
    case Rule::r1_hardware: return "R1";
    case Rule::r2_config: return "R2";
    case Rule::r3_band: return "R3";
    case Rule::r4_cell_local: return "R4";
    case Rule::r5_unknown: return "R5";
  }
  return "R5";
}

Rule rule_for(CauseKind cause) {
  switch (cause) {
    case CauseKind::hardware_fault: return Rule::r1_hardware;
    case CauseKind::config_regression: return Rule::r2_config;
    case CauseKind::band_level_interference: return Rule::r3_band;
    case CauseKind::cell_local_degradation: return Rule::r4_cell_local;
    default: return Rule::r5_unknown;
  }
}

double base_confidence(Rule rule) {
  switch (rule) {
    case Rule::r1_hardware: return kConfidenceR1;
    case Rule::r2_config: return kConfidenceR2;
    case Rule::r3_band: return kConfidenceR3;
    case Rule::r4_cell_local: return kConfidenceR4;
    case Rule::r5_unknown: return kConfidenceR5;
  }
  return kConfidenceR5;
}

CauseKind cause_for(Rule rule) {
  switch (rule) {
    case Rule::r1_hardware: return CauseKind::hardware_fault;
    case Rule::r2_config: return CauseKind::config_regression;
    case Rule::r3_band: return CauseKind::band_level_interference;
    case Rule::r4_cell_local: return CauseKind::cell_local_degradation;
    case Rule::r5_unknown: return CauseKind::unknown;
  }
  return CauseKind::unknown;
}

std::string hypothesis_id(CauseKind cause, const ElementRef& scope) {
  return "H-" + std::string(to_string(cause)) + "-" + std::string(to_string(scope.level)) + "-" + scope.id;
}

RuleMatch evaluate_finding(const tsa::DeviationRow& row, const EvidenceBundle& b) {
  if (!b.topology) throw Error(Errc::invalid_argument, "bundle has no topology", "topology");
  const auto& topo = *b.topology;
  const ElementRef element{row.level, row.element_id};
  const Timestamp onset = row.timestamp;
  const bool degraded = is_degradation(row);
  RuleMatch m;
  m.evidence_refs.push_back("row:" + row.id);

  // R1: co-located alarm.
  if (auto alarms = colocated_alarms(b, element, onset, b.alarms); !alarms.empty()) {
    m.rule = Rule::r1_hardware;
    const auto node = node_of(topo, element);
    m.scope = node ? ElementRef{Level::node, *node} : element;
    for (const auto* a : alarms) add_ref(m.evidence_refs, "alarm:" + a->id());
    m.action = make_action(ActionKind::open_ticket, m.scope, CauseKind::hardware_fault, m.scope, row.kpi);
    return m;
  }

  // R2: configuration change shortly before onset.
  if (auto changes = candidate_changes(b, element, onset, b.recent_config_changes); !changes.empty()) {
    const sim::CmChange& latest = *changes.back();
    m.rule = Rule::r2_config;
    m.scope = {Level::cell, latest.cell};
    for (const auto* c : changes) add_ref(m.evidence_refs, "cm:" + c->id());
    ProposedAction a = make_action(ActionKind::revert_config_change, m.scope, CauseKind::config_regression, m.scope,
                                   row.kpi);
    a.parameter = latest.parameter;
    a.value = latest.old_value;
    a.delta = latest.old_value - current_config(b, latest.cell).get(latest.parameter);
    a.cm_change_id = latest.id();
    m.action = a;
    return m;
  }

  if (row.kind == tsa::FindingKind::change_point && row.level == Level::cell && topo.contains(element)) {
    const auto& cell = topo.cell(row.element_id);
    const auto shifts = coincident_cell_shifts(b, row.kpi, onset);

    // R3: most of the band shifted the same way.
    const auto band_cells = topo.member_cells({Level::band, cell.band});
    std::vector<const tsa::DeviationRow*> band_shifts;
    std::set<std::string> band_shifted;
    for (const auto* r : shifts) {
      if (topo.cell(r->element_id).band == cell.band && r->direction == row.direction) {
        band_shifts.push_back(r);
        band_shifted.insert(r->element_id);
      }
    }
    if (static_cast<double>(band_shifted.size()) >= kBandShare * static_cast<double>(band_cells.size()) - 1e-9) {
      m.rule = Rule::r3_band;
      m.scope = {Level::band, cell.band};
      for (const auto* r : band_shifts) add_ref(m.evidence_refs, "row:" + r->id);
      m.action = make_action(ActionKind::open_ticket, m.scope, CauseKind::band_level_interference, m.scope, row.kpi);
      return m;
    }

    // R4: siblings on the same node are clean.
    std::vector<const tsa::DeviationRow*> sibling_shifts;
    for (const auto* r : shifts) {
      if (r->element_id != row.element_id && topo.cell(r->element_id).node == cell.node) sibling_shifts.push_back(r);
    }
    if (sibling_shifts.empty()) {
      m.rule = Rule::r4_cell_local;
      m.scope = element;
      if (degraded) m.action = cell_adjustment(b, row, element);
      return m;
    }

    // R5 at node scope: the node's cells moved together without a known cause.
    m.rule = Rule::r5_unknown;
    m.scope = {Level::node, cell.node};
    for (const auto* r : sibling_shifts) add_ref(m.evidence_refs, "row:" + r->id);
    return m;
  }

  m.rule = Rule::r5_unknown;
  m.scope = element;
  return m;
}

ReasoningOutput rule_reason_initial(const EvidenceBundle& b) {
  ReasoningOutput out;
  if (b.deviation_table.rows.empty()) {
    out.no_finding = true;
    return out;
  }
  if (!b.topology) throw Error(Errc::invalid_argument, "bundle has no topology", "topology");
  const auto& topo = *b.topology;

  std::map<std::string, Hypothesis> by_id;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::string>> claims;  // cell change point row id -> hypothesis ids

  auto adopt = [&](const tsa::DeviationRow& row, const RuleMatch& m) {
    const CauseKind cause = cause_for(m.rule);
    const std::string id = hypothesis_id(cause, m.scope);
    auto [it, inserted] = by_id.try_emplace(id);
    Hypothesis& h = it->second;
    if (inserted) {
      order.push_back(id);
      h.id = id;
      h.cause_kind = cause;
      h.scope = m.scope;
      h.confidence = base_confidence(m.rule);
      // An unknown cause carries no action.
      if (cause != CauseKind::unknown) h.proposed_action = m.action;
    } else if (!h.proposed_action && m.action && cause != CauseKind::unknown) {
      h.proposed_action = m.action;
    }
    for (const auto& ref : m.evidence_refs) add_ref(h.evidence_refs, ref);
    claims[row.id].push_back(id);
  };

  const auto& rows = b.deviation_table.rows;
  for (const auto& row : rows) {
    if (row.kind == tsa::FindingKind::change_point && row.level == Level::cell) adopt(row, evaluate_finding(row, b));
  }

  // Higher-level shifts explained by cell findings become supporting evidence.
  for (const auto& row : rows) {
    if (row.kind != tsa::FindingKind::change_point || row.level == Level::cell) continue;
    std::set<std::string> members;
    for (const auto& c : topo.member_cells({row.level, row.element_id})) members.insert(c);
    std::vector<std::string> explaining;
    for (const auto* r : coincident_cell_shifts(b, row.kpi, row.timestamp)) {
      if (!members.contains(r->element_id)) continue;
      for (const auto& id : claims[r->id]) {
        if (std::find(explaining.begin(), explaining.end(), id) == explaining.end()) explaining.push_back(id);
      }
    }
    if (explaining.empty()) {
      adopt(row, evaluate_finding(row, b));
    } else {
      for (const auto& id : explaining) add_ref(by_id[id].evidence_refs, "row:" + row.id);
    }
  }

  // Anomalies and peer outliers support related hypotheses. On their own they
  // only become findings through an alarm or CM change, or when nothing else
  // in the table does.
  std::vector<const tsa::DeviationRow*> unattributed;
  for (const auto& row : rows) {
    if (row.kind == tsa::FindingKind::change_point) continue;
    const ElementRef element{row.level, row.element_id};
    bool attached = false;
    for (const auto& id : order) {
      Hypothesis& h = by_id[id];
      if (related(topo, h.scope, element)) {
        add_ref(h.evidence_refs, "row:" + row.id);
        attached = true;
      }
    }
    if (attached) continue;
    if (row.kind == tsa::FindingKind::anomaly) {
      RuleMatch m = evaluate_finding(row, b);
      if (m.rule == Rule::r1_hardware || m.rule == Rule::r2_config) {
        adopt(row, m);
        continue;
      }
    }
    unattributed.push_back(&row);
  }
  if (order.empty()) {
    for (const auto* row : unattributed) adopt(*row, evaluate_finding(*row, b));
  }

  for (const auto& id : order) {
    Hypothesis h = by_id[id];
    attach_context(h, b);
    out.hypotheses.push_back(std::move(h));
  }
  sort_hypotheses(out.hypotheses);
  out.queries = refine_queries(ReasoningTrace{}, out.hypotheses, b);
  return out;
}

ReflectionOutput rule_reflect(const EvidenceBundle& bundle, const std::vector<Hypothesis>& prior,
                              const EvidenceBundle& delta) {
  ReflectionOutput out;
  if (delta.empty()) {
    out.hypotheses = prior;
    return out;
  }
  const EvidenceBundle merged = merge(bundle, delta);
  if (!merged.topology) throw Error(Errc::invalid_argument, "bundle has no topology", "topology");
  const auto& topo = *merged.topology;
  const auto fresh = rule_reason_initial(merged).hypotheses;
  std::map<std::string, const Hypothesis*> fresh_by_id;
  for (const auto& h : fresh) fresh_by_id[h.id] = &h;

  std::set<std::string> present;
  std::set<std::string> retired_ids;
  for (const auto& p : prior) {
    auto it = fresh_by_id.find(p.id);
    const Hypothesis* same = it == fresh_by_id.end() ? nullptr : it->second;

    // Fresh hypotheses that now account for this one's change points.
    std::vector<std::string> claimers;
    const auto own_rows = change_point_refs(p, merged);
    for (const auto& h : fresh) {
      if (h.id == p.id) continue;
      const bool claims_row = std::any_of(own_rows.begin(), own_rows.end(), [&](const std::string& ref) {
        return std::find(h.evidence_refs.begin(), h.evidence_refs.end(), ref) != h.evidence_refs.end();
      });
      if (!claims_row) continue;
      const bool stronger = static_cast<int>(rule_for(h.cause_kind)) < static_cast<int>(rule_for(p.cause_kind));
      const bool broader = topo.is_ancestor(h.scope, p.scope);
      if (stronger || broader || p.cause_kind == CauseKind::unknown) claimers.push_back(h.id);
    }

    if (same == nullptr || !claimers.empty()) {
      std::string reason = falsification(p, merged);
      if (reason.empty() && !claimers.empty()) {
        reason = "superseded by " + claimers.front();
      }
      if (!reason.empty()) {
        out.retired.push_back({p, reason, claimers});
        retired_ids.insert(p.id);
        continue;
      }
    }

    Hypothesis kept = p;
    if (same) {
      for (const auto& ref : same->evidence_refs) add_ref(kept.evidence_refs, ref);
      if (!kept.proposed_action && same->proposed_action && kept.cause_kind != CauseKind::unknown) {
        kept.proposed_action = same->proposed_action;
      }
      if (confirms(p, same, merged, delta)) {
        // Rounded to the wire precision so 0.7 + 0.1 lands on the 0.8 boundary.
        const double raised = std::round(std::min(kConfirmCap, kept.confidence + kConfirmStep) * 1e6) / 1e6;
        kept.confidence = std::max(kept.confidence, raised);
      }
    }
    present.insert(kept.id);
    out.hypotheses.push_back(std::move(kept));
  }
  for (const auto& h : fresh) {
    if (present.contains(h.id) || retired_ids.contains(h.id)) continue;
    present.insert(h.id);
    out.hypotheses.push_back(h);
  }
  sort_hypotheses(out.hypotheses);
  return out;
}

std::vector<FollowUpQuery> query_templates(const Hypothesis& h, const EvidenceBundle& b) {
  std::vector<FollowUpQuery> out;
  if (!b.topology || !b.topology->contains(h.scope)) return out;
  const auto& topo = *b.topology;
  const auto* anchor = anchor_row(h, b);
  const Timestamp onset = anchor ? anchor->timestamp : b.deviation_table.window_start;
  const Timestamp lo = std::max<Timestamp>(0, onset - kDaySeconds);
  const Timestamp hi = onset + kDaySeconds;
  std::vector<std::string> kpis;
  if (anchor) kpis.push_back(anchor->kpi);
  const auto node = node_of(topo, h.scope);

  auto base = [&](QueryKind kind, std::string reason) {
    FollowUpQuery q;
    q.kind = kind;
    q.hypothesis_id = h.id;
    q.reason = std::move(reason);
    q.start = lo;
    q.end = hi;
    return q;
  };
  auto siblings = [&] {
    FollowUpQuery q = base(QueryKind::kpi, "check whether neighbouring cells shifted with " + h.scope.id);
    store::KpiSelector s;
    s.level = Level::cell;
    s.kpis = kpis;
    s.start = lo;
    s.end = hi;
    s.peer_scope = h.scope.level == Level::cell ? ElementRef{Level::node, *node} : h.scope;
    q.selector = s;
    return q;
  };
  auto alarms = [&] {
    FollowUpQuery q = base(QueryKind::alarms, "look for alarms around the onset on " + h.scope.id);
    q.scope = node ? ElementRef{Level::node, *node} : h.scope;
    return q;
  };
  auto cm_history = [&] {
    FollowUpQuery q = base(QueryKind::cm_history, "configuration history of " + h.scope.id + " around the onset");
    q.scope = h.scope;
    return q;
  };
  auto all_kpis = [&] {
    FollowUpQuery q = base(QueryKind::kpi, "every KPI on " + h.scope.id + " around the onset");
    store::KpiSelector s;
    s.level = h.scope.level;
    s.element_ids = std::vector<std::string>{h.scope.id};
    s.start = lo;
    s.end = hi;
    q.selector = s;
    return q;
  };
  auto inventory = [&] {
    FollowUpQuery q = base(QueryKind::inventory, "hardware and software of " + *node);
    q.scope = ElementRef{Level::node, *node};
    q.start = 0;
    q.end = 0;
    return q;
  };
  auto precedents = [&] {
    FollowUpQuery q = base(QueryKind::precedents, "outcomes of earlier " +
                                                      std::string(to_string(h.proposed_action->kind)) + " actions");
    q.scope = h.proposed_action->target;
    q.action_kind = std::string(to_string(h.proposed_action->kind));
    q.start = 0;
    q.end = 0;
    return q;
  };
  const bool has_action = h.proposed_action.has_value();

  switch (h.cause_kind) {
    case CauseKind::cell_local_degradation:
      if (node) out.push_back(siblings());
      if (node) out.push_back(inventory());
      if (has_action) out.push_back(precedents());
      break;
    case CauseKind::config_regression:
      out.push_back(cm_history());
      if (has_action) out.push_back(precedents());
      break;
    case CauseKind::hardware_fault:
      out.push_back(alarms());
      if (node) out.push_back(inventory());
      break;
    case CauseKind::band_level_interference:
      out.push_back(siblings());
      out.push_back(alarms());
      break;
    case CauseKind::capacity_overload:
      out.push_back(all_kpis());
      if (node) out.push_back(siblings());
      break;
    case CauseKind::unknown:
      if (node || h.scope.level != Level::cell) out.push_back(siblings());
      out.push_back(alarms());
      out.push_back(cm_history());
      out.push_back(all_kpis());
      if (node) out.push_back(inventory());
      break;
  }
  return out;
}

std::vector<FollowUpQuery> refine_queries(const ReasoningTrace& trace, const std::vector<Hypothesis>& hypotheses,
                                          const EvidenceBundle& bundle) {
  std::set<std::string> issued;
  for (const auto& q : trace.issued_queries()) issued.insert(q.key());
  std::vector<FollowUpQuery> out;
  for (const auto& h : hypotheses) {
    if (!is_unresolved(h)) continue;
    for (auto& q : query_templates(h, bundle)) {
      if (issued.insert(q.key()).second) {
        out.push_back(std::move(q));
        break;
      }
    }
  }
  return out;
}

}  // namespace ranagent::reasoning
