#include "ranagent/tsa/deviation_table.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include <fmt/format.h>

#include "ranagent/tsa/aggregate.hpp"
#include "ranagent/tsa/stats.hpp"

namespace ranagent::tsa {

namespace {

struct LevelResult {
  std::vector<DeviationRow> rows;
  std::vector<RowError> errors;
  std::vector<std::string> warnings;
};

std::string row_id(FindingKind kind, Level level, const std::string& element, const std::string& kpi,
                   Timestamp t) {
  return fmt::format("{}:{}:{}:{}:{}", to_string(kind), to_string(level), element, kpi, t);
}

Series clip(const Series& s, Timestamp start, Timestamp end) {
  Series out;
  for (const auto& p : s) {
    if (p.t >= start && p.t < end) out.push_back(p);
  }
  return out;
}

template <typename Fn>
bool guarded(std::vector<RowError>& errors, ElementRef element, const std::string& kpi, Fn&& fn) {
  try {
    fn();
    return true;
  } catch (const Error& e) {
    errors.push_back(RowError{std::move(element), kpi, e.code(), e.what()});
  } catch (const std::exception& e) {
    errors.push_back(RowError{std::move(element), kpi, Errc::internal, e.what()});
  }
  return false;
}

LevelResult analyze_level(const sim::NetworkTopology& topology, const SeriesMap& level_series, Level level,
                          const TableParams& params, Timestamp start, Timestamp end) {
  LevelResult out;
  struct Adjusted {
    Series series;
    double sigma = 0.0;
  };
  std::map<SeriesKey, Adjusted> adjusted;

  for (const auto& [key, series] : level_series) {
    if (series.empty()) continue;
    const ElementRef element{level, key.element_id};
    const SeriesId id{key.element_id, level, key.kpi};
    ShiftAnalysis shifts;
    if (!guarded(out.errors, element, key.kpi, [&] { shifts = analyze_shifts(series, params.change_point, id); })) {
      continue;
    }
    for (const auto& cp : shifts.change_points) {
      DeviationRow row;
      row.id = row_id(FindingKind::change_point, level, key.element_id, key.kpi, cp.onset);
      row.level = level;
      row.element_id = key.element_id;
      row.kpi = key.kpi;
      row.kind = FindingKind::change_point;
      row.timestamp = cp.onset;
      row.magnitude = cp.magnitude;
      row.score = cp.score;
      row.severity = cp.score * std::abs(cp.magnitude) / cp.sigma;
      row.direction = cp.direction;
      row.pre_mean = cp.pre_mean;
      row.post_mean = cp.post_mean;
      row.sigma = cp.sigma;
      out.rows.push_back(std::move(row));
    }

    Series deseasoned = remove_diurnal(series, shifts.fit);
    std::vector<AnomalyFlag> flags;
    if (guarded(out.errors, element, key.kpi,
                [&] { flags = detect_anomalies(deseasoned, params.anomaly, id); })) {
      const Timestamp step = series.size() > 1 ? series[1].t - series[0].t : kDefaultIntervalSeconds;
      const Timestamp quiet = static_cast<Timestamp>(params.anomaly.window) * step;
      for (const auto& flag : flags) {
        const bool owned_by_shift = std::any_of(shifts.change_points.begin(), shifts.change_points.end(),
                                                [&](const ChangePoint& cp) {
                                                  return flag.timestamp >= cp.onset &&
                                                         flag.timestamp < cp.onset + quiet;
                                                });
        if (owned_by_shift) continue;
        DeviationRow row;
        row.id = row_id(FindingKind::anomaly, level, key.element_id, key.kpi, flag.timestamp);
        row.level = level;
        row.element_id = key.element_id;
        row.kpi = key.kpi;
        row.kind = FindingKind::anomaly;
        row.timestamp = flag.timestamp;
        row.magnitude = flag.value - flag.median;
        row.score = flag.robust_z;
        row.severity = std::abs(flag.robust_z);
        row.value = flag.value + shifts.fit.seasonal(flag.timestamp);
        out.rows.push_back(std::move(row));
      }
    }
    adjusted[key] = Adjusted{std::move(deseasoned), std::max(shifts.sigma, 0.0)};
  }

  // Peer comparison on diurnal-adjusted series, grouped by peer parent.
  std::map<std::pair<std::string, std::string>, std::map<std::string, const Adjusted*>> groups;
  for (const auto& [key, adj] : adjusted) {
    auto parent = topology.peer_parent({level, key.element_id});
    const std::string group = parent ? parent->id : std::string("network");
    groups[{key.kpi, group}][key.element_id] = &adj;
  }
  for (const auto& [group_key, members] : groups) {
    const auto& [kpi_name, group] = group_key;
    std::map<std::string, Series> peer_series;
    std::vector<double> sigmas;
    for (const auto& [element, adj] : members) {
      peer_series[element] = adj->series;
      sigmas.push_back(adj->sigma);
    }
    PeerParams pp = params.peer;
    pp.min_effect = std::max(pp.min_effect, params.peer_min_effect_sigmas * median(sigmas));
    PeerResult result = score_peers(peer_series, start, end, pp, level, kpi_name, group);
    if (result.warning) {
      out.warnings.push_back(fmt::format("{} peers of {} under {}: {}", to_string(level), kpi_name, group,
                                         *result.warning));
    }
    for (const auto& o : result.outliers) {
      DeviationRow row;
      row.id = row_id(FindingKind::peer_outlier, level, o.element_id, kpi_name, start);
      row.level = level;
      row.element_id = o.element_id;
      row.kpi = kpi_name;
      row.kind = FindingKind::peer_outlier;
      row.timestamp = start;
      row.magnitude = o.median_difference;
      row.score = o.outlier_score;
      row.severity = o.outlier_score;
      row.peer_group = group;
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

bool row_before(const DeviationRow& a, const DeviationRow& b) {
  if (a.severity != b.severity) return a.severity > b.severity;
  if (a.kind != b.kind) return a.kind < b.kind;
  if (a.level != b.level) return a.level < b.level;
  if (a.element_id != b.element_id) return a.element_id < b.element_id;
  if (a.kpi != b.kpi) return a.kpi < b.kpi;
  return a.timestamp < b.timestamp;
}

}  // namespace

std::string_view to_string(FindingKind kind) {
  switch (kind) {
    case FindingKind::change_point: return "change_point";
    case FindingKind::anomaly: return "anomaly";
    case FindingKind::peer_outlier: return "peer_outlier";
  }
  return "change_point";
}

FindingKind finding_kind_from_string(std::string_view text) {
  for (auto k : {FindingKind::change_point, FindingKind::anomaly, FindingKind::peer_outlier}) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::invalid_argument, "unknown finding kind '" + std::string(text) + "'");
}

const DeviationRow* DeviationTable::find(const std::string& row_id) const {
  for (const auto& r : rows) {
    if (r.id == row_id) return &r;
  }
  return nullptr;
}

SeriesMap aggregate_level(const sim::NetworkTopology& topology, const SeriesMap& cell_data, Level level,
                          const std::vector<std::string>& kpis, Timestamp window_start, Timestamp window_end) {
  SeriesMap out;
  std::map<std::string, std::map<std::string, Series>> by_kpi;
  for (const auto& [key, series] : cell_data) {
    if (!topology.contains(Level::cell, key.element_id)) continue;
    Series clipped = clip(series, window_start, window_end);
    if (!clipped.empty()) by_kpi[key.kpi][key.element_id] = std::move(clipped);
  }
  for (const auto& kpi_name : kpis) {
    auto it = by_kpi.find(kpi_name);
    if (it == by_kpi.end()) continue;
    if (level == Level::cell) {
      for (auto& [cell, series] : it->second) out[{cell, kpi_name}] = series;
      continue;
    }
    const AggregationRule& rule = rule_for(kpi_name);
    const std::map<std::string, Series>* weights = nullptr;
    if (rule.method == AggregationMethod::traffic_weighted_mean) {
      auto w = by_kpi.find(std::string(kTrafficWeightKpi));
      static const std::map<std::string, Series> kNoWeights;
      weights = w == by_kpi.end() ? &kNoWeights : &w->second;
    }
    for (auto& [group, series] : aggregate_series(it->second, rule, level, topology, weights)) {
      out[{group, kpi_name}] = std::move(series);
    }
  }
  return out;
}

DeviationTable build_deviation_table(const sim::NetworkTopology& topology, const SeriesMap& cell_data,
                                     Timestamp window_start, Timestamp window_end, const TableParams& params) {
  DeviationTable table;
  table.window_start = window_start;
  table.window_end = window_end;
  std::vector<Level> levels = params.levels;
  if (levels.empty()) levels.assign(kAllLevels.begin(), kAllLevels.end());
  for (Level level : levels) table.summary[level] = {};
  if (window_start >= window_end) return table;

  std::vector<std::string> kpis = params.kpis;
  if (kpis.empty()) {
    for (const auto& info : default_kpis()) kpis.emplace_back(info.name);
  }
  for (const auto& [key, _] : cell_data) {
    if (!topology.contains(Level::cell, key.element_id)) {
      table.errors.push_back(
          RowError{{Level::cell, key.element_id}, key.kpi, Errc::unknown_element, "cell not in topology"});
    }
  }

  std::vector<std::future<LevelResult>> jobs;
  for (Level level : levels) {
    jobs.push_back(std::async(std::launch::async, [&, level] {
      LevelResult r;
      SeriesMap series;
      if (!guarded(r.errors, ElementRef{level, ""}, "",
                   [&] { series = aggregate_level(topology, cell_data, level, kpis, window_start, window_end); })) {
        return r;
      }
      LevelResult analysed = analyze_level(topology, series, level, params, window_start, window_end);
      analysed.errors.insert(analysed.errors.begin(), r.errors.begin(), r.errors.end());
      return analysed;
    }));
  }
  for (auto& job : jobs) {
    LevelResult r = job.get();
    table.rows.insert(table.rows.end(), r.rows.begin(), r.rows.end());
    table.errors.insert(table.errors.end(), r.errors.begin(), r.errors.end());
    table.warnings.insert(table.warnings.end(), r.warnings.begin(), r.warnings.end());
  }

  rank_rows(table);
  return table;
}

void rank_rows(DeviationTable& table) {
  std::sort(table.rows.begin(), table.rows.end(), row_before);
  for (auto& [level, s] : table.summary) s = {};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    DeviationRow& row = table.rows[i];
    row.rank = static_cast<int>(i + 1);
    LevelSummary& s = table.summary[row.level];
    switch (row.kind) {
      case FindingKind::change_point: ++s.change_points; break;
      case FindingKind::anomaly: ++s.anomalies; break;
      case FindingKind::peer_outlier: ++s.peer_outliers; break;
    }
  }
}

Json to_json(const DeviationRow& row) {
  Json j = {
      {"id", row.id},
      {"rank", row.rank},
      {"kind", to_string(row.kind)},
      {"level", to_string(row.level)},
      {"element_id", row.element_id},
      {"kpi", row.kpi},
      {"timestamp", row.timestamp},
      {"magnitude", row.magnitude},
      {"score", row.score},
      {"severity", row.severity},
  };
  if (row.direction) j["direction"] = to_string(*row.direction);
  if (row.pre_mean) j["pre_mean"] = *row.pre_mean;
  if (row.post_mean) j["post_mean"] = *row.post_mean;
  if (row.sigma) j["sigma"] = *row.sigma;
  if (row.value) j["value"] = *row.value;
  if (row.peer_group) j["peer_group"] = *row.peer_group;
  return j;
}

Json to_json(const DeviationTable& table) {
  Json rows = Json::array();
  for (const auto& r : table.rows) rows.push_back(to_json(r));
  Json summary = Json::object();
  for (const auto& [level, s] : table.summary) {
    summary[std::string(to_string(level))] = {
        {"change_points", s.change_points}, {"anomalies", s.anomalies}, {"peer_outliers", s.peer_outliers}};
  }
  Json errors = Json::array();
  for (const auto& e : table.errors) {
    errors.push_back({{"level", to_string(e.element.level)},
                      {"element_id", e.element.id},
                      {"kpi", e.kpi},
                      {"code", to_string(e.code)},
                      {"message", e.message}});
  }
  return {{"window", {{"start", table.window_start}, {"end", table.window_end}}},
          {"rows", rows},
          {"summary", summary},
          {"errors", errors},
          {"warnings", table.warnings}};
}

DeviationTable deviation_table_from_json(const Json& doc) {
  DeviationTable t;
  const Json& window = require(doc, "window", "");
  t.window_start = require_int(window, "start", "window");
  t.window_end = require_int(window, "end", "window");
  const Json& rows = require(doc, "rows", "");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Json& r = rows[i];
    const std::string path = index_path("rows", i);
    DeviationRow row;
    row.id = require_string(r, "id", path);
    row.rank = static_cast<int>(require_int(r, "rank", path));
    row.kind = finding_kind_from_string(require_string(r, "kind", path));
    row.level = level_from_string(require_string(r, "level", path));
    row.element_id = require_string(r, "element_id", path);
    row.kpi = require_string(r, "kpi", path);
    row.timestamp = require_int(r, "timestamp", path);
    row.magnitude = require_number(r, "magnitude", path);
    row.score = require_number(r, "score", path);
    row.severity = require_number(r, "severity", path);
    if (r.contains("direction")) row.direction = r["direction"] == "up" ? Direction::up : Direction::down;
    if (r.contains("pre_mean")) row.pre_mean = r["pre_mean"].get<double>();
    if (r.contains("post_mean")) row.post_mean = r["post_mean"].get<double>();
    if (r.contains("sigma")) row.sigma = r["sigma"].get<double>();
    if (r.contains("value")) row.value = r["value"].get<double>();
    if (r.contains("peer_group")) row.peer_group = r["peer_group"].get<std::string>();
    t.rows.push_back(std::move(row));
  }
  if (doc.contains("summary")) {
    for (const auto& [level, s] : doc["summary"].items()) {
      t.summary[level_from_string(level)] = LevelSummary{s.value("change_points", 0), s.value("anomalies", 0),
                                                         s.value("peer_outliers", 0)};
    }
  }
  if (doc.contains("warnings")) t.warnings = doc["warnings"].get<std::vector<std::string>>();
  return t;
}

std::string render_text(const DeviationTable& table) {
  std::string out = fmt::format("{:>4}  {:<12}  {:<7}  {:<8}  {:<26}  {:>9}  {:>12}  {:>10}  {:>12}\n", "rank",
                                "kind", "level", "element", "kpi", "timestamp", "magnitude", "score", "severity");
  for (const auto& r : table.rows) {
    out += fmt::format("{:>4}  {:<12}  {:<7}  {:<8}  {:<26}  {:>9}  {:>12.3f}  {:>10.3f}  {:>12.3f}\n", r.rank,
                       to_string(r.kind), to_string(r.level), r.element_id, r.kpi, r.timestamp, r.magnitude,
                       r.score, r.severity);
  }
  out += "summary:";
  for (const auto& [level, s] : table.summary) {
    out += fmt::format(" {}={}/{}/{}", to_string(level), s.change_points, s.anomalies, s.peer_outliers);
  }
  out += "  (change_points/anomalies/peer_outliers)\n";
  return out;
}

}  // namespace ranagent::tsa
