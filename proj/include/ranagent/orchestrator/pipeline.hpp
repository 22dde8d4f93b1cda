#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "ranagent/orchestrator/messaging.hpp"
#include "ranagent/orchestrator/plan.hpp"
#include "ranagent/reasoning/types.hpp"
#include "ranagent/sim/simulation.hpp"
#include "ranagent/store/store.hpp"
#include "ranagent/tsa/deviation_table.hpp"

namespace ranagent::orchestrator {

// Network and data of one run: a live simulation advanced over the scenario
// horizon and a private store holding its PM/FM/CM/IM data plus the
// precedent records visible when the run started.
class RunContext {
public:
  RunContext(const sim::ScenarioSpec& scenario, const std::vector<store::OptimizationRecord>& precedents,
             tsa::TableParams table_params = {});

  sim::Simulation& simulation() { return *sim_; }
  const sim::Simulation& simulation() const { return *sim_; }
  store::Store& store() { return *store_; }
  const store::Store& store() const { return *store_; }
  std::shared_ptr<const sim::NetworkTopology> topology() const { return sim_->topology_ptr(); }
  Timestamp interval() const { return sim_->spec().interval_s; }

  // Advances the simulation and records PM, due alarms and CM changes.
  void advance(std::int64_t intervals);

  // [start, end) of an intent with end = 0 resolved to the current data end.
  std::pair<Timestamp, Timestamp> window_of(const Intent& intent) const;

  const tsa::TableParams& table_params() const { return table_params_; }

  // Deviation table from the last analyze step; follow-up KPI queries are
  // answered from it so onsets and row ids stay comparable.
  const std::optional<tsa::DeviationTable>& analysis_cache() const { return cache_; }
  void set_analysis_cache(tsa::DeviationTable table) { cache_ = std::move(table); }

private:
  std::unique_ptr<sim::Simulation> sim_;
  std::unique_ptr<store::Store> store_;
  std::vector<sim::FmAlarm> scheduled_alarms_;
  std::size_t alarms_ingested_ = 0;
  std::size_t cm_recorded_ = 0;
  tsa::TableParams table_params_;
  std::optional<tsa::DeviationTable> cache_;
};

// Output of the query step: raw data for the intent scope and window.
struct QueryData {
  Timestamp start = 0;
  Timestamp end = 0;
  std::vector<std::string> cells;
  SeriesMap pm;
  std::vector<sim::FmAlarm> alarms;
  std::vector<sim::CmChange> changes;
};

QueryData query_step(RunContext& ctx, const Intent& intent);

// Builds the deviation table for the queried data and assembles the evidence
// bundle (table, alarms, CM changes, current configs, coverage). With
// `with_inventory`, IM records of every node in scope are included.
reasoning::EvidenceBundle analyze_step(RunContext& ctx, const Intent& intent, const QueryData& data,
                                       bool with_inventory);

// Executes follow-up queries against the run's data and returns the new
// evidence (with coverage of what was looked at).
reasoning::EvidenceBundle execute_queries(RunContext& ctx, const std::vector<reasoning::FollowUpQuery>& queries);

// IM records for the nodes under the hypotheses' scopes.
reasoning::EvidenceBundle inventory_delta(RunContext& ctx, const std::vector<reasoning::Hypothesis>& hypotheses);

PrecedentResult retrieve_precedents(RunContext& ctx, const PrecedentRequest& request);
DocResult consult_docs(const DocRequest& request);

// Diurnal-adjusted means of `kpi` on `cell` over [from, to), using the
// seasonal fit of the history before `fit_until`.
double adjusted_mean(const store::Store& store, const std::string& cell, const std::string& kpi, Timestamp from,
                     Timestamp to, Timestamp fit_until);

// Snapshot, apply, monitor evaluation_window intervals, then confirm or
// restore. The guarded KPI is degraded when its adjusted mean after the
// action is worse than the pre-action mean by more than guard_percent.
// Records the OptimizationRecord in the run store. If anything fails after
// the change is applied, the snapshot is restored before the error
// propagates.
ValidationOutcome validate_and_guard(RunContext& ctx, const reasoning::ProposedAction& action,
                                     const std::string& run_id);

}  // namespace ranagent::orchestrator
