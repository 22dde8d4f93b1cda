#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ranagent/core/errors.hpp"
#include "ranagent/core/json_io.hpp"
#include "ranagent/core/series.hpp"
#include "ranagent/sim/topology.hpp"
#include "ranagent/tsa/anomaly.hpp"
#include "ranagent/tsa/changepoint.hpp"
#include "ranagent/tsa/peers.hpp"

namespace ranagent::tsa {

enum class FindingKind { change_point, anomaly, peer_outlier };
std::string_view to_string(FindingKind kind);
FindingKind finding_kind_from_string(std::string_view text);

struct DeviationRow {
  std::string id;  // "<kind>:<level>:<element>:<kpi>:<timestamp>"
  Level level = Level::cell;
  std::string element_id;
  std::string kpi;
  FindingKind kind = FindingKind::change_point;
  Timestamp timestamp = 0;  // onset, flagged sample, or window start
  double magnitude = 0.0;   // change point: post - pre; anomaly: value - median; peer: median difference
  double score = 0.0;       // |t|, robust z, or outlier score
  double severity = 0.0;
  int rank = 0;  // 1-based position

  // Kind-specific details.
  std::optional<Direction> direction;
  std::optional<double> pre_mean;
  std::optional<double> post_mean;
  std::optional<double> sigma;
  std::optional<double> value;
  std::optional<std::string> peer_group;
};

struct LevelSummary {
  int change_points = 0;
  int anomalies = 0;
  int peer_outliers = 0;

  bool operator==(const LevelSummary&) const = default;
};

// Analysis failure of one series; the table is still produced.
struct RowError {
  ElementRef element;
  std::string kpi;
  Errc code = Errc::internal;
  std::string message;
};

struct DeviationTable {
  Timestamp window_start = 0;
  Timestamp window_end = 0;
  std::vector<DeviationRow> rows;
  std::map<Level, LevelSummary> summary;  // every level present, zero counts included
  std::vector<RowError> errors;
  std::vector<std::string> warnings;

  bool empty() const { return rows.empty(); }
  const DeviationRow* find(const std::string& row_id) const;
};

struct TableParams {
  ChangePointParams change_point;
  AnomalyParams anomaly;
  PeerParams peer;
  // Peer rows also need |median difference| >= this many noise sigmas.
  double peer_min_effect_sigmas = 1.0;
  std::vector<std::string> kpis;  // empty: default KPI set
  std::vector<Level> levels;      // empty: all six levels
};

// Aggregates the cell-level data to every level, removes the diurnal
// component per series, and runs change point, anomaly and peer analyses.
// Rows are ranked by severity (change point: score * |magnitude| / sigma;
// anomaly: |robust z|; peer: outlier score); ties go to change points, then
// level closeness to the cell, element id, KPI and timestamp. Anomalies inside
// [onset, onset + anomaly window) of a change point on the same series are
// dropped. Per-series failures are collected in `errors`.
DeviationTable build_deviation_table(const sim::NetworkTopology& topology, const SeriesMap& cell_data,
                                     Timestamp window_start, Timestamp window_end, const TableParams& params = {});

// Sorts rows into rank order, renumbers them and recounts the summary.
void rank_rows(DeviationTable& table);

// Aggregated series for every element at `level` and every KPI in `kpis`,
// restricted to the window.
SeriesMap aggregate_level(const sim::NetworkTopology& topology, const SeriesMap& cell_data, Level level,
                          const std::vector<std::string>& kpis, Timestamp window_start, Timestamp window_end);

Json to_json(const DeviationRow& row);
Json to_json(const DeviationTable& table);
DeviationTable deviation_table_from_json(const Json& doc);

// Fixed-column plain-text rendering:
// rank  kind  level  element  kpi  timestamp  magnitude  score  severity
std::string render_text(const DeviationTable& table);

}  // namespace ranagent::tsa
