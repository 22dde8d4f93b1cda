#include "ranagent/orchestrator/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ranagent/reasoning/corpus.hpp"
#include "ranagent/tsa/changepoint.hpp"

namespace ranagent::orchestrator {

namespace {

std::vector<std::string> kpis_of(const tsa::TableParams& params) {
  if (!params.kpis.empty()) return params.kpis;
  std::vector<std::string> out;
  for (const auto& k : default_kpis()) out.emplace_back(k.name);
  return out;
}

std::vector<std::string> scope_cells(const sim::NetworkTopology& topo, const std::optional<ElementRef>& scope) {
  if (scope) return topo.member_cells(*scope);
  std::vector<std::string> out;
  for (const auto& c : topo.cells()) out.push_back(c.id);
  return out;
}

// Elements at any level whose cells all lie inside `cells`.
std::set<ElementRef> covered_elements(const sim::NetworkTopology& topo, const std::vector<std::string>& cells) {
  const std::set<std::string> inside(cells.begin(), cells.end());
  std::set<ElementRef> out;
  for (Level level : kAllLevels) {
    for (const auto& id : topo.elements(level)) {
      const auto members = topo.member_cells({level, id});
      if (!members.empty() && std::all_of(members.begin(), members.end(), [&](const auto& c) { return inside.count(c); })) {
        out.insert({level, id});
      }
    }
  }
  return out;
}

std::vector<std::string> nodes_under(const sim::NetworkTopology& topo, const ElementRef& ref) {
  if (ref.level == Level::node) return {ref.id};
  return topo.children(ref, Level::node);
}

}  // namespace

RunContext::RunContext(const sim::ScenarioSpec& scenario, const std::vector<store::OptimizationRecord>& precedents,
                       tsa::TableParams table_params)
    : table_params_(std::move(table_params)) {
  auto topology = std::make_shared<const sim::NetworkTopology>(sim::build_topology(scenario.topology));
  sim::validate_scenario(scenario, *topology);
  sim_ = std::make_unique<sim::Simulation>(topology, scenario);
  store_ = std::make_unique<store::Store>();
  store_->set_topology(topology, scenario.interval_s);
  scheduled_alarms_ = sim::emit_fm_alarms(scenario);
  std::stable_sort(scheduled_alarms_.begin(), scheduled_alarms_.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  for (const auto& r : precedents) store_->record_optimization(r);
  advance(scenario.horizon);
}

void RunContext::advance(std::int64_t intervals) {
  const auto samples = sim_->advance(intervals);
  store_->ingest_pm(samples);
  const Timestamp until = sim_->now();
  const std::size_t first = alarms_ingested_;
  while (alarms_ingested_ < scheduled_alarms_.size() && scheduled_alarms_[alarms_ingested_].timestamp < until) {
    ++alarms_ingested_;
  }
  if (alarms_ingested_ > first) {
    store_->ingest_fm(std::span(scheduled_alarms_).subspan(first, alarms_ingested_ - first));
  }
  const auto& log = sim_->cm_log();
  if (log.size() > cm_recorded_) {
    store_->record_cm_changes(std::span(log).subspan(cm_recorded_));
    cm_recorded_ = log.size();
  }
}

std::pair<Timestamp, Timestamp> RunContext::window_of(const Intent& intent) const {
  return {intent.start, intent.end == 0 ? sim_->now() : intent.end};
}

QueryData query_step(RunContext& ctx, const Intent& intent) {
  const auto& topo = *ctx.topology();
  validate_intent(intent, topo);
  QueryData data;
  std::tie(data.start, data.end) = ctx.window_of(intent);
  if (data.end <= data.start) throw Error(Errc::invalid_argument, "empty intent window", "intent.end");
  data.cells = scope_cells(topo, intent.scope);
  store::KpiSelector sel;
  sel.level = Level::cell;
  sel.element_ids = data.cells;
  sel.kpis = kpis_of(ctx.table_params());
  sel.start = data.start;
  sel.end = data.end;
  data.pm = ctx.store().query_kpi(sel);
  data.alarms = ctx.store().query_alarms(data.start, data.end, intent.scope);
  data.changes = ctx.store().query_cm(data.start, data.end, intent.scope);
  return data;
}

reasoning::EvidenceBundle analyze_step(RunContext& ctx, const Intent& intent, const QueryData& data,
                                       bool with_inventory) {
  const auto& topo = *ctx.topology();
  auto table = tsa::build_deviation_table(topo, data.pm, data.start, data.end, ctx.table_params());
  const auto covered = covered_elements(topo, data.cells);
  if (intent.scope) {
    // Aggregates above the scope only hold part of their cells; drop them.
    std::erase_if(table.rows, [&](const tsa::DeviationRow& r) { return !covered.count({r.level, r.element_id}); });
    tsa::rank_rows(table);
  }
  ctx.set_analysis_cache(table);

  reasoning::EvidenceBundle b;
  b.topology = ctx.topology();
  b.interval = ctx.interval();
  b.deviation_table = std::move(table);
  b.alarms = data.alarms;
  b.recent_config_changes = data.changes;
  b.configs = ctx.simulation().configs();
  b.coverage.series = covered;
  b.coverage.alarm_windows.push_back({intent.scope, data.start, data.end});
  b.coverage.cm_windows.push_back({intent.scope, data.start, data.end});
  if (with_inventory) {
    const auto nodes = intent.scope ? nodes_under(topo, *intent.scope) : topo.elements(Level::node);
    for (const auto& n : nodes) {
      if (auto rec = ctx.store().inventory(n)) b.inventory.push_back(*rec);
    }
  }
  return b;
}

reasoning::EvidenceBundle execute_queries(RunContext& ctx, const std::vector<reasoning::FollowUpQuery>& queries) {
  const auto& topo = *ctx.topology();
  reasoning::EvidenceBundle delta;
  delta.topology = ctx.topology();
  delta.interval = ctx.interval();
  const auto& cache = ctx.analysis_cache();
  if (cache) {
    delta.deviation_table.window_start = cache->window_start;
    delta.deviation_table.window_end = cache->window_end;
  }
  std::set<std::string> seen_rows;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    reasoning::validate_query(q, index_path("queries", i));
    switch (q.kind) {
      case reasoning::QueryKind::kpi: {
        const auto& sel = *q.selector;
        ctx.store().query_kpi(sel);  // validates the selector against the store
        std::vector<std::string> elements;
        if (sel.element_ids) elements = *sel.element_ids;
        else if (sel.peer_scope) elements = topo.children(*sel.peer_scope, sel.level);
        else elements = topo.elements(sel.level);
        const std::set<std::string> wanted(elements.begin(), elements.end());
        const std::set<std::string> kpis(sel.kpis.begin(), sel.kpis.end());
        if (!cache) break;
        std::set<ElementRef> analysed;
        for (const auto& row : cache->rows) {
          if (row.level != sel.level || !wanted.count(row.element_id)) continue;
          if (!kpis.empty() && !kpis.count(row.kpi)) continue;
          if (sel.end > sel.start && (row.timestamp < sel.start || row.timestamp >= sel.end)) continue;
          if (seen_rows.insert(row.id).second) delta.deviation_table.rows.push_back(row);
        }
        // Coverage only for series the analysis actually looked at.
        for (const auto& e : elements) {
          if (cache->summary.count(sel.level)) delta.coverage.series.insert({sel.level, e});
        }
        break;
      }
      case reasoning::QueryKind::alarms: {
        auto found = ctx.store().query_alarms(q.start, q.end, q.scope);
        delta.alarms.insert(delta.alarms.end(), found.begin(), found.end());
        delta.coverage.alarm_windows.push_back({q.scope, q.start, q.end});
        break;
      }
      case reasoning::QueryKind::cm_history: {
        auto found = ctx.store().query_cm(q.start, q.end, q.scope);
        delta.recent_config_changes.insert(delta.recent_config_changes.end(), found.begin(), found.end());
        delta.coverage.cm_windows.push_back({q.scope, q.start, q.end});
        break;
      }
      case reasoning::QueryKind::inventory: {
        const auto nodes = q.scope ? nodes_under(topo, *q.scope) : topo.elements(Level::node);
        for (const auto& n : nodes) {
          if (auto rec = ctx.store().inventory(n)) delta.inventory.push_back(*rec);
        }
        break;
      }
      case reasoning::QueryKind::precedents: {
        auto found = ctx.store().query_precedents(*q.scope, q.action_kind, 5);
        delta.precedents.insert(delta.precedents.end(), found.begin(), found.end());
        break;
      }
    }
  }
  tsa::rank_rows(delta.deviation_table);
  return delta;
}

reasoning::EvidenceBundle inventory_delta(RunContext& ctx, const std::vector<reasoning::Hypothesis>& hypotheses) {
  const auto& topo = *ctx.topology();
  reasoning::EvidenceBundle delta;
  delta.topology = ctx.topology();
  delta.interval = ctx.interval();
  if (const auto& cache = ctx.analysis_cache()) {
    delta.deviation_table.window_start = cache->window_start;
    delta.deviation_table.window_end = cache->window_end;
  }
  std::set<std::string> nodes;
  for (const auto& h : hypotheses) {
    for (const auto& n : nodes_under(topo, h.scope)) nodes.insert(n);
  }
  for (const auto& n : nodes) {
    if (auto rec = ctx.store().inventory(n)) delta.inventory.push_back(*rec);
  }
  return delta;
}

PrecedentResult retrieve_precedents(RunContext& ctx, const PrecedentRequest& request) {
  PrecedentResult out;
  std::set<std::string> ids;
  const auto& topo = *ctx.topology();
  for (const auto& t : request.targets) {
    for (auto& r : ctx.store().query_precedents(t.element, t.action_kind, 5)) {
      if (ids.insert(r.record_id).second) out.precedents.push_back(std::move(r));
    }
    for (const auto& cell : topo.member_cells(t.element)) out.configs[cell] = ctx.simulation().config(cell);
  }
  return out;
}

DocResult consult_docs(const DocRequest& request) {
  auto found = reasoning::retrieve_doc_passages(request.terms, reasoning::bundled_corpus(), request.k);
  return DocResult{std::move(found.excerpts), found.stopword_only};
}

double adjusted_mean(const store::Store& store, const std::string& cell, const std::string& kpi, Timestamp from,
                     Timestamp to, Timestamp fit_until) {
  store::KpiSelector sel;
  sel.level = Level::cell;
  sel.element_ids = std::vector<std::string>{cell};
  sel.kpis = {kpi};
  sel.start = 0;
  sel.end = std::max(to, fit_until);
  const auto data = store.query_kpi(sel);
  const auto it = data.find(SeriesKey{cell, kpi});
  if (it == data.end()) throw Error(Errc::not_found, "no samples for " + cell + "/" + kpi, "kpi");
  Series history;
  for (const auto& p : it->second) {
    if (p.t < fit_until) history.push_back(p);
  }
  tsa::DiurnalFit fit;
  try {
    fit = tsa::analyze_shifts(history, {}, {cell, Level::cell, kpi}).fit;
  } catch (const Error& e) {
    if (e.code() != Errc::series_too_short) throw;
  }
  double sum = 0.0;
  int n = 0;
  for (const auto& p : it->second) {
    if (p.t < from || p.t >= to) continue;
    sum += p.value - (fit.fitted ? fit.seasonal(p.t) : 0.0);
    ++n;
  }
  if (n == 0) throw Error(Errc::not_found, "empty evaluation window for " + cell + "/" + kpi, "kpi");
  return sum / n;
}

ValidationOutcome validate_and_guard(RunContext& ctx, const reasoning::ProposedAction& action,
                                     const std::string& run_id) {
  if (!action.changes_config()) {
    throw Error(Errc::invalid_argument, "action does not change configuration", "action.kind");
  }
  if (action.target.level != Level::cell) {
    throw Error(Errc::invalid_argument, "config actions target a cell", "action.target");
  }
  if (action.evaluation_window < 1) throw Error(Errc::invalid_argument, "evaluation window < 1", "action.evaluation_window");
  if (!(action.guard_percent > 0.0)) throw Error(Errc::invalid_argument, "guard must be positive", "action.guard_percent");

  auto& sim = ctx.simulation();
  auto& store = ctx.store();
  const std::string& cell = action.target.id;
  const std::string kpi = action.guarded_kpi.empty() ? std::string(kpi::dl_throughput) : action.guarded_kpi;
  const KpiInfo* info = find_kpi(kpi);
  if (!info) throw Error(Errc::unknown_kpi, "unknown guarded KPI " + kpi, "action.guarded_kpi");

  const Timestamp t0 = sim.now();
  const Timestamp w = action.evaluation_window * ctx.interval();
  const Timestamp pre_from = std::max<Timestamp>(0, t0 - w);

  ValidationOutcome out;
  const auto snapshot = store.snapshot_config(sim.configs(), t0);
  out.snapshot_id = snapshot.snapshot_id;
  const double before = sim.config(cell).get(action.parameter);

  // Error(out_of_bounds) here leaves the configuration untouched.
  const auto change = sim.apply_config(cell, action.parameter, action.value, "action");
  try {
    if (change) store.record_cm_changes(std::span(&*change, 1));
    ctx.advance(action.evaluation_window);

    const Timestamp post_to = t0 + w;
    for (const auto& k : default_kpis()) {
      const std::string name(k.name);
      const double pre = adjusted_mean(store, cell, name, pre_from, t0, t0);
      const double post = adjusted_mean(store, cell, name, t0, post_to, t0);
      out.kpi_delta[name] = post - pre;
      if (name == kpi) {
        out.baseline_mean = pre;
        out.post_mean = post;
      }
    }
    const double sign = info->polarity == Polarity::higher_is_better ? 1.0 : -1.0;
    const double base = std::abs(out.baseline_mean);
    out.change_percent = base > 0.0 ? sign * (out.post_mean - out.baseline_mean) / base * 100.0 : 0.0;
    const bool degraded = out.change_percent < -action.guard_percent;
    if (degraded) {
      store.restore_config(snapshot.snapshot_id, sim);
      out.restored = true;
      out.outcome = store::Outcome::rolled_back;
    } else {
      out.outcome = store::Outcome::confirmed;
    }
  } catch (...) {
    store.restore_config(snapshot.snapshot_id, sim);
    throw;
  }

  store::OptimizationRecord rec;
  rec.record_id = run_id + "/" + action.action_id;
  rec.created_at = t0;
  rec.target = action.target;
  rec.action_kind = std::string(reasoning::to_string(action.kind));
  rec.parameters_before[action.parameter] = before;
  rec.parameters_after[action.parameter] = action.value;
  rec.hypothesis_id = action.hypothesis_id;
  rec.outcome = out.outcome;
  rec.kpi_delta = out.kpi_delta;
  rec.run_id = run_id;
  store.record_optimization(rec);
  out.record_id = rec.record_id;
  return out;
}

}  // namespace ranagent::orchestrator
