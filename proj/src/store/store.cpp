#include "ranagent/store/store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "ranagent/core/errors.hpp"
#include "ranagent/tsa/aggregate.hpp"

namespace ranagent::store {

namespace {

constexpr const char* kMetaFile = "meta.json";
constexpr const char* kPmFile = "pm.csv";
constexpr const char* kFmFile = "fm.jsonl";
constexpr const char* kCmFile = "cm.jsonl";
constexpr const char* kImFile = "im.jsonl";
constexpr const char* kSnapshotFile = "snapshots.jsonl";
constexpr const char* kOptimizationFile = "optimizations.jsonl";

struct PmKey {
  Level level;
  std::string element_id;
  std::string kpi;

  auto operator<=>(const PmKey&) const = default;
};

Json element_json(const ElementRef& ref) {
  return Json{{"level", std::string(to_string(ref.level))}, {"id", ref.id}};
}

ElementRef element_from_json(const Json& doc, const std::string& path) {
  return {level_from_string(require_string(doc, "level", path)), require_string(doc, "id", path)};
}

Json number_map_json(const std::map<std::string, double>& values) {
  Json out = Json::object();
  for (const auto& [k, v] : values) out[k] = v;
  return out;
}

std::map<std::string, double> number_map_from(const Json& doc, const std::string& path) {
  std::map<std::string, double> out;
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "expected an object", path);
  for (const auto& [k, v] : doc.items()) {
    if (!v.is_number()) throw Error(Errc::invalid_argument, "expected a number", join_path(path, k));
    out[k] = v.get<double>();
  }
  return out;
}

// Exact round-trip representation for the internal PM log.
std::string exact_number(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, end);
}

std::string persisted_pm_line(const sim::KpiSample& s) {
  return fmt::format("{},{},{},{},{}", s.timestamp, s.element_id, to_string(s.level), s.kpi, exact_number(s.value));
}

Series clip(const std::map<Timestamp, double>& points, Timestamp start, Timestamp end) {
  Series out;
  for (auto it = points.lower_bound(start); it != points.end() && it->first < end; ++it) {
    out.push_back({it->first, it->second});
  }
  return out;
}

}  // namespace

// ---- value types ------------------------------------------------------------

Json to_json(const KpiSelector& s) {
  Json doc{{"level", std::string(to_string(s.level))}, {"kpis", s.kpis}, {"start", s.start}, {"end", s.end}};
  if (s.element_ids) doc["element_ids"] = *s.element_ids;
  if (s.peer_scope) doc["peer_scope"] = element_json(*s.peer_scope);
  return doc;
}

KpiSelector kpi_selector_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "selector must be an object", path);
  KpiSelector s;
  s.level = level_from_string(doc.value("level", std::string("cell")));
  if (auto it = doc.find("element_ids"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(Errc::invalid_argument, "element_ids must be an array", join_path(path, "element_ids"));
    s.element_ids = it->get<std::vector<std::string>>();
  }
  if (auto it = doc.find("kpis"); it != doc.end()) {
    if (!it->is_array()) throw Error(Errc::invalid_argument, "kpis must be an array", join_path(path, "kpis"));
    s.kpis = it->get<std::vector<std::string>>();
  }
  s.start = require_int(doc, "start", path);
  s.end = require_int(doc, "end", path);
  if (auto it = doc.find("peer_scope"); it != doc.end() && !it->is_null()) {
    s.peer_scope = element_from_json(*it, join_path(path, "peer_scope"));
  }
  return s;
}

Json to_json(const ImRecord& r) {
  return Json{{"element_id", r.element_id},
              {"vendor", r.vendor},
              {"hardware_model", r.hardware_model},
              {"software_version", r.software_version},
              {"commissioned_at", r.commissioned_at}};
}

ImRecord im_record_from_json(const Json& doc, const std::string& path) {
  ImRecord r;
  r.element_id = require_string(doc, "element_id", path);
  r.vendor = require_string(doc, "vendor", path);
  r.hardware_model = require_string(doc, "hardware_model", path);
  r.software_version = require_string(doc, "software_version", path);
  r.commissioned_at = require_int(doc, "commissioned_at", path);
  return r;
}

Json to_json(const ConfigSnapshot& s) {
  Json entries = Json::object();
  for (const auto& [cell, config] : s.entries) entries[cell] = sim::to_json(config);
  return Json{{"snapshot_id", s.snapshot_id}, {"taken_at", s.taken_at}, {"entries", entries}};
}

ConfigSnapshot config_snapshot_from_json(const Json& doc, const std::string& path) {
  ConfigSnapshot s;
  s.snapshot_id = require_string(doc, "snapshot_id", path);
  s.taken_at = require_int(doc, "taken_at", path);
  const Json& entries = require(doc, "entries", path);
  for (const auto& [cell, config] : entries.items()) {
    s.entries[cell] = sim::cell_config_from_json(config, join_path(join_path(path, "entries"), cell));
  }
  return s;
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::pending: return "pending";
    case Outcome::confirmed: return "confirmed";
    case Outcome::rolled_back: return "rolled_back";
  }
  return "pending";
}

Outcome outcome_from_string(std::string_view text) {
  if (text == "pending") return Outcome::pending;
  if (text == "confirmed") return Outcome::confirmed;
  if (text == "rolled_back") return Outcome::rolled_back;
  throw Error(Errc::invalid_argument, "unknown outcome '" + std::string(text) + "'");
}

void validate_record(const OptimizationRecord& r) {
  if (r.record_id.empty()) throw Error(Errc::invalid_argument, "record_id is empty", "record_id");
  if (r.action_kind.empty()) throw Error(Errc::invalid_argument, "action_kind is empty", "action_kind");
  if (r.target.id.empty()) throw Error(Errc::invalid_argument, "target id is empty", "target");
  if (r.outcome == Outcome::pending) {
    if (!r.kpi_delta.empty()) throw Error(Errc::invalid_argument, "pending record carries a kpi_delta", "kpi_delta");
    return;
  }
  for (const auto& info : default_kpis()) {
    auto it = r.kpi_delta.find(std::string(info.name));
    if (it == r.kpi_delta.end()) {
      throw Error(Errc::invalid_argument, "kpi_delta lacks " + std::string(info.name), "kpi_delta");
    }
    if (!std::isfinite(it->second)) {
      throw Error(Errc::invalid_argument, "non-finite delta", join_path("kpi_delta", info.name));
    }
  }
}

Json to_json(const OptimizationRecord& r) {
  return Json{{"record_id", r.record_id},
              {"created_at", r.created_at},
              {"target", element_json(r.target)},
              {"action_kind", r.action_kind},
              {"parameters_before", number_map_json(r.parameters_before)},
              {"parameters_after", number_map_json(r.parameters_after)},
              {"hypothesis_id", r.hypothesis_id},
              {"outcome", std::string(to_string(r.outcome))},
              {"kpi_delta", number_map_json(r.kpi_delta)},
              {"run_id", r.run_id}};
}

OptimizationRecord optimization_record_from_json(const Json& doc, const std::string& path) {
  OptimizationRecord r;
  r.record_id = require_string(doc, "record_id", path);
  r.created_at = require_int(doc, "created_at", path);
  r.target = element_from_json(require(doc, "target", path), join_path(path, "target"));
  r.action_kind = require_string(doc, "action_kind", path);
  r.parameters_before = number_map_from(doc.value("parameters_before", Json::object()), join_path(path, "parameters_before"));
  r.parameters_after = number_map_from(doc.value("parameters_after", Json::object()), join_path(path, "parameters_after"));
  r.hypothesis_id = doc.value("hypothesis_id", std::string());
  r.outcome = outcome_from_string(require_string(doc, "outcome", path));
  r.kpi_delta = number_map_from(doc.value("kpi_delta", Json::object()), join_path(path, "kpi_delta"));
  r.run_id = doc.value("run_id", std::string());
  return r;
}

// ---- store ------------------------------------------------------------------

struct Store::State {
  std::optional<std::filesystem::path> directory;
  std::shared_ptr<const sim::NetworkTopology> topology;
  Timestamp interval = kDefaultIntervalSeconds;

  std::map<PmKey, std::map<Timestamp, double>> pm;
  std::size_t pm_count = 0;
  std::map<std::string, sim::FmAlarm> fm;  // by alarm id
  std::vector<sim::CmChange> cm;
  std::map<std::string, ImRecord> im;
  std::map<std::string, ConfigSnapshot> snapshots;
  std::size_t next_snapshot = 1;
  std::vector<OptimizationRecord> optimizations;  // insertion order, unique ids

  void put_pm(const sim::KpiSample& s) {
    auto [it, inserted] = pm[{s.level, s.element_id, s.kpi}].insert_or_assign(s.timestamp, s.value);
    if (inserted) ++pm_count;
  }

  void put_optimization(const OptimizationRecord& r) {
    for (auto& existing : optimizations) {
      if (existing.record_id == r.record_id) {
        existing = r;
        return;
      }
    }
    optimizations.push_back(r);
  }

  void put_snapshot(const ConfigSnapshot& s) {
    snapshots[s.snapshot_id] = s;
    // Ids are "snap-NNNN"; keep the counter past any loaded one.
    if (s.snapshot_id.rfind("snap-", 0) == 0) {
      std::size_t n = 0;
      const auto digits = std::string_view(s.snapshot_id).substr(5);
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
      if (ec == std::errc{} && n >= next_snapshot) next_snapshot = n + 1;
    }
  }

  void seed_inventory() {
    if (!topology) return;
    for (const auto& node : topology->nodes()) {
      if (im.contains(node.id)) continue;
      im[node.id] = ImRecord{node.id, node.inventory.vendor, node.inventory.hardware_model,
                             node.inventory.software_version, node.inventory.commissioned_at};
    }
  }

  bool has_element(Level level, const std::string& id) const {
    if (topology && topology->contains(level, id)) return true;
    for (const auto& [key, points] : pm) {
      if (key.level == level && key.element_id == id) return true;
    }
    return false;
  }

  std::optional<ImRecord> inventory_for(const ElementRef& element) const {
    std::string node_id = element.id;
    if (element.level == Level::cell) {
      if (!topology || !topology->contains(element)) return std::nullopt;
      node_id = topology->cell(element.id).node;
    } else if (element.level != Level::node) {
      return std::nullopt;
    }
    auto it = im.find(node_id);
    if (it == im.end()) return std::nullopt;
    return it->second;
  }
};

Store::Store() : state_(std::make_unique<State>()) {}
Store::~Store() = default;

std::unique_ptr<Store> Store::open(const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(Errc::io_error, "cannot create store directory: " + ec.message(), directory.string());
  auto store = std::make_unique<Store>();
  store->state_->directory = directory;
  store->load();
  return store;
}

std::unique_ptr<Store> Store::clone() const {
  std::shared_lock lock(mutex_);
  auto copy = std::make_unique<Store>();
  *copy->state_ = *state_;
  copy->state_->directory.reset();
  return copy;
}

void Store::append_line(const std::string& file, const std::string& line) {
  if (!state_->directory) return;
  const auto path = *state_->directory / file;
  std::ofstream out(path, std::ios::app | std::ios::binary);
  out << line;
  out.flush();
  if (!out) throw Error(Errc::io_error, "write failed", path.string());
}

namespace {

// Reads `path` line by line. A line that fails to parse is tolerated only
// when it is the last one and lacks its newline (an interrupted append).
template <typename Fn>
void replay_lines(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return;
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    const bool complete = nl != std::string::npos;
    std::string_view line(text.data() + pos, (complete ? nl : text.size()) - pos);
    pos = complete ? nl + 1 : text.size();
    ++line_no;
    if (line.empty()) continue;
    try {
      fn(line);
    } catch (const std::exception& e) {
      if (!complete) return;
      throw Error(Errc::io_error, fmt::format("corrupt line {}: {}", line_no, e.what()), path.string());
    }
  }
}

}  // namespace

void Store::load() {
  auto& st = *state_;
  const auto& dir = *st.directory;
  if (std::filesystem::exists(dir / kMetaFile)) {
    std::ifstream in(dir / kMetaFile);
    Json meta;
    try {
      meta = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw Error(Errc::io_error, std::string("corrupt store metadata: ") + e.what(), (dir / kMetaFile).string());
    }
    st.interval = meta.value("interval_s", kDefaultIntervalSeconds);
    if (meta.contains("topology")) {
      st.topology = std::make_shared<const sim::NetworkTopology>(
          sim::build_topology(sim::topology_spec_from_json(meta["topology"], "topology")));
    }
  }
  replay_lines(dir / kPmFile, [&](std::string_view line) {
    if (line.rfind("timestamp,", 0) == 0) return;
    st.put_pm(sim::sample_from_csv_line(line));
  });
  replay_lines(dir / kFmFile, [&](std::string_view line) {
    auto alarm = sim::fm_alarm_from_json(Json::parse(line));
    st.fm[alarm.id()] = alarm;
  });
  replay_lines(dir / kCmFile, [&](std::string_view line) { st.cm.push_back(sim::cm_change_from_json(Json::parse(line))); });
  replay_lines(dir / kImFile, [&](std::string_view line) {
    auto r = im_record_from_json(Json::parse(line));
    st.im[r.element_id] = r;
  });
  replay_lines(dir / kSnapshotFile, [&](std::string_view line) { st.put_snapshot(config_snapshot_from_json(Json::parse(line))); });
  replay_lines(dir / kOptimizationFile,
               [&](std::string_view line) { st.put_optimization(optimization_record_from_json(Json::parse(line))); });
  st.seed_inventory();
}

void Store::set_topology(std::shared_ptr<const sim::NetworkTopology> topology, Timestamp interval_s) {
  if (interval_s <= 0) throw Error(Errc::invalid_argument, "interval must be positive", "interval_s");
  std::unique_lock lock(mutex_);
  state_->topology = std::move(topology);
  state_->interval = interval_s;
  state_->seed_inventory();
  if (state_->directory) {
    Json meta{{"interval_s", interval_s}};
    if (state_->topology) meta["topology"] = sim::to_json(state_->topology->spec());
    const auto path = *state_->directory / kMetaFile;
    const auto tmp = *state_->directory / "meta.json.tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << canonical_dump(meta) << '\n';
      if (!out) throw Error(Errc::io_error, "write failed", tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }
}

std::shared_ptr<const sim::NetworkTopology> Store::topology() const {
  std::shared_lock lock(mutex_);
  return state_->topology;
}

Timestamp Store::interval() const {
  std::shared_lock lock(mutex_);
  return state_->interval;
}

std::size_t Store::ingest_pm(std::span<const sim::KpiSample> samples) {
  std::unique_lock lock(mutex_);
  auto& st = *state_;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::string path = index_path("samples", i);
    const KpiInfo* info = find_kpi(s.kpi);
    if (!info) throw Error(Errc::malformed_sample, "unknown KPI '" + s.kpi + "'", path);
    if (s.timestamp < 0 || s.timestamp % st.interval != 0) {
      throw Error(Errc::malformed_sample,
                  fmt::format("timestamp {} is not a multiple of the {} s interval", s.timestamp, st.interval), path);
    }
    if (!std::isfinite(s.value) || !within_domain(*info, s.value)) {
      throw Error(Errc::malformed_sample, fmt::format("value {} outside the domain of {}", s.value, s.kpi), path);
    }
    if (s.element_id.empty()) throw Error(Errc::malformed_sample, "empty element id", path);
    if (st.topology && !st.topology->contains(s.level, s.element_id)) {
      throw Error(Errc::malformed_sample,
                  fmt::format("unknown element {}:{}", to_string(s.level), s.element_id), path);
    }
  }
  if (samples.empty()) return 0;
  if (st.directory) {
    std::string batch;
    if (!std::filesystem::exists(*st.directory / kPmFile)) batch = std::string(sim::kCsvHeader) + '\n';
    for (const auto& s : samples) {
      batch += persisted_pm_line(s);
      batch += '\n';
    }
    append_line(kPmFile, batch);
  }
  for (const auto& s : samples) st.put_pm(s);
  return samples.size();
}

SeriesMap Store::query_kpi(const KpiSelector& selector) const {
  std::shared_lock lock(mutex_);
  const auto& st = *state_;
  if (selector.start > selector.end) {
    throw Error(Errc::invalid_argument, "time range start exceeds end", "selector.start");
  }

  std::vector<std::string> kpis = selector.kpis;
  if (kpis.empty()) {
    for (const auto& info : default_kpis()) kpis.emplace_back(info.name);
  }
  for (std::size_t i = 0; i < kpis.size(); ++i) {
    if (!is_known_kpi(kpis[i])) {
      throw Error(Errc::unknown_kpi, "unknown KPI '" + kpis[i] + "'", index_path("selector.kpis", i));
    }
  }

  std::vector<std::string> ids;
  if (selector.peer_scope) {
    if (!st.topology) throw Error(Errc::invalid_argument, "peer_scope needs a topology", "selector.peer_scope");
    if (!st.topology->contains(*selector.peer_scope)) {
      throw Error(Errc::unknown_element, "unknown element " + to_string(*selector.peer_scope), "selector.peer_scope");
    }
    ids = st.topology->children(*selector.peer_scope, selector.level);
  } else if (selector.element_ids) {
    ids = *selector.element_ids;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!st.has_element(selector.level, ids[i])) {
        throw Error(Errc::unknown_element, fmt::format("unknown element {}:{}", to_string(selector.level), ids[i]),
                    index_path("selector.element_ids", i));
      }
    }
  } else if (st.topology) {
    ids = st.topology->elements(selector.level);
  } else {
    std::set<std::string> stored;
    for (const auto& [key, points] : st.pm) {
      if (key.level == selector.level) stored.insert(key.element_id);
    }
    ids.assign(stored.begin(), stored.end());
  }

  SeriesMap out;
  for (const auto& id : ids) {
    for (const auto& kpi_name : kpis) {
      Series& series = out[{id, kpi_name}];
      if (selector.start >= selector.end) continue;
      auto it = st.pm.find({selector.level, id, kpi_name});
      if (it != st.pm.end()) {
        series = clip(it->second, selector.start, selector.end);
        continue;
      }
      if (selector.level == Level::cell || !st.topology) continue;

      // Higher level without stored samples: aggregate the member cells.
      const auto& rule = tsa::rule_for(kpi_name);
      const bool weighted = rule.method == tsa::AggregationMethod::traffic_weighted_mean;
      std::map<std::string, Series> cells;
      std::map<std::string, Series> weights;
      for (const auto& cell : st.topology->member_cells({selector.level, id})) {
        if (auto c = st.pm.find({Level::cell, cell, kpi_name}); c != st.pm.end()) {
          Series s = clip(c->second, selector.start, selector.end);
          if (!s.empty()) cells[cell] = std::move(s);
        }
        if (weighted) {
          if (auto w = st.pm.find({Level::cell, cell, std::string(tsa::kTrafficWeightKpi)}); w != st.pm.end()) {
            weights[cell] = clip(w->second, selector.start, selector.end);
          }
        }
      }
      if (cells.empty()) continue;
      const std::string groups[] = {id};
      auto aggregated = tsa::aggregate_series(cells, rule, selector.level, *st.topology,
                                              weighted ? &weights : nullptr, groups);
      series = std::move(aggregated[id]);
    }
  }
  return out;
}

std::size_t Store::pm_sample_count() const {
  std::shared_lock lock(mutex_);
  return state_->pm_count;
}

std::vector<Timestamp> Store::pm_timestamps() const {
  std::shared_lock lock(mutex_);
  std::set<Timestamp> ts;
  for (const auto& [key, points] : state_->pm) {
    for (const auto& [t, v] : points) ts.insert(t);
  }
  return {ts.begin(), ts.end()};
}

void Store::ingest_fm(std::span<const sim::FmAlarm> alarms) {
  std::unique_lock lock(mutex_);
  for (std::size_t i = 0; i < alarms.size(); ++i) {
    const auto& a = alarms[i];
    if (state_->topology && !state_->topology->contains(a.element)) {
      throw Error(Errc::unknown_element, "unknown element " + to_string(a.element), index_path("alarms", i));
    }
  }
  std::string batch;
  for (const auto& a : alarms) {
    state_->fm[a.id()] = a;
    batch += canonical_dump(sim::to_json(a)) + '\n';
  }
  if (!batch.empty()) append_line(kFmFile, batch);
}

std::vector<sim::FmAlarm> Store::query_alarms(Timestamp start, Timestamp end,
                                              const std::optional<ElementRef>& scope) const {
  std::shared_lock lock(mutex_);
  const auto& st = *state_;
  std::vector<sim::FmAlarm> out;
  for (const auto& [id, a] : st.fm) {
    if (a.timestamp < start || a.timestamp >= end) continue;
    if (scope && a.element != *scope) {
      if (!st.topology || (!st.topology->is_ancestor(*scope, a.element) && !st.topology->is_ancestor(a.element, *scope))) {
        continue;
      }
    }
    out.push_back(a);
  }
  std::stable_sort(out.begin(), out.end(), [](const sim::FmAlarm& a, const sim::FmAlarm& b) {
    return std::tie(a.timestamp, a.element, a.code) < std::tie(b.timestamp, b.element, b.code);
  });
  return out;
}

void Store::record_cm_changes(std::span<const sim::CmChange> changes) {
  std::unique_lock lock(mutex_);
  std::string batch;
  for (const auto& c : changes) {
    state_->cm.push_back(c);
    batch += canonical_dump(sim::to_json(c)) + '\n';
  }
  if (!batch.empty()) append_line(kCmFile, batch);
}

std::vector<sim::CmChange> Store::query_cm(Timestamp start, Timestamp end, const std::optional<ElementRef>& scope) const {
  std::shared_lock lock(mutex_);
  const auto& st = *state_;
  std::set<std::string> cells;
  if (scope) {
    if (!st.topology) throw Error(Errc::invalid_argument, "scoped CM query needs a topology", "scope");
    for (const auto& c : st.topology->member_cells(*scope)) cells.insert(c);
  }
  std::vector<sim::CmChange> out;
  for (const auto& c : st.cm) {
    if (c.timestamp < start || c.timestamp >= end) continue;
    if (scope && !cells.contains(c.cell)) continue;
    out.push_back(c);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const sim::CmChange& a, const sim::CmChange& b) { return a.timestamp < b.timestamp; });
  return out;
}

void Store::put_inventory(const ImRecord& record) {
  if (record.element_id.empty()) throw Error(Errc::invalid_argument, "element_id is empty", "record.element_id");
  std::unique_lock lock(mutex_);
  if (state_->topology && !state_->topology->contains(Level::node, record.element_id)) {
    throw Error(Errc::unknown_element, "inventory records are per node; unknown node " + record.element_id,
                "record.element_id");
  }
  state_->im[record.element_id] = record;
  append_line(kImFile, canonical_dump(to_json(record)) + '\n');
}

std::optional<ImRecord> Store::inventory(const std::string& node_id) const {
  std::shared_lock lock(mutex_);
  auto it = state_->im.find(node_id);
  if (it == state_->im.end()) return std::nullopt;
  return it->second;
}

std::vector<ImRecord> Store::inventory_all() const {
  std::shared_lock lock(mutex_);
  std::vector<ImRecord> out;
  for (const auto& [id, r] : state_->im) out.push_back(r);
  return out;
}

std::optional<ImRecord> Store::inventory_for(const ElementRef& element) const {
  std::shared_lock lock(mutex_);
  return state_->inventory_for(element);
}

ConfigSnapshot Store::snapshot_config(const std::map<std::string, sim::CellConfig>& configs, Timestamp taken_at) {
  std::unique_lock lock(mutex_);
  auto& st = *state_;
  if (st.topology) {
    for (const auto& cell : st.topology->cells()) {
      if (!configs.contains(cell.id)) {
        throw Error(Errc::invalid_argument, "snapshot lacks cell " + cell.id, "configs");
      }
    }
  }
  ConfigSnapshot snap;
  snap.snapshot_id = fmt::format("snap-{:04d}", st.next_snapshot);
  snap.taken_at = taken_at;
  snap.entries = configs;
  st.put_snapshot(snap);
  append_line(kSnapshotFile, canonical_dump(to_json(snap)) + '\n');
  return snap;
}

std::optional<ConfigSnapshot> Store::snapshot(const std::string& snapshot_id) const {
  std::shared_lock lock(mutex_);
  auto it = state_->snapshots.find(snapshot_id);
  if (it == state_->snapshots.end()) return std::nullopt;
  return it->second;
}

std::size_t Store::restore_config(const std::string& snapshot_id, sim::Simulation& simulation) {
  auto snap = snapshot(snapshot_id);
  if (!snap) throw Error(Errc::not_found, "unknown snapshot '" + snapshot_id + "'", "snapshot_id");
  static constexpr std::string_view kParams[] = {param::tx_power, param::tilt, param::ho_offset};
  std::vector<sim::CmChange> changes;
  std::size_t cells_changed = 0;
  for (const auto& [cell, target] : snap->entries) {
    bool changed = false;
    for (auto p : kParams) {
      if (simulation.config(cell).get(p) == target.get(p)) continue;
      if (auto change = simulation.apply_config(cell, p, target.get(p), "restore")) {
        changes.push_back(*change);
        changed = true;
      }
    }
    cells_changed += changed;
  }
  record_cm_changes(changes);
  return cells_changed;
}

void Store::record_optimization(const OptimizationRecord& record) {
  validate_record(record);
  std::unique_lock lock(mutex_);
  state_->put_optimization(record);
  append_line(kOptimizationFile, canonical_dump(to_json(record)) + '\n');
}

std::vector<OptimizationRecord> Store::optimizations() const {
  std::shared_lock lock(mutex_);
  return state_->optimizations;
}

std::vector<OptimizationRecord> Store::query_precedents(const ElementRef& target, const std::string& action_kind,
                                                        std::size_t limit) const {
  std::shared_lock lock(mutex_);
  const auto& st = *state_;
  if (limit == 0) return {};
  const auto target_im = st.inventory_for(target);
  std::vector<const OptimizationRecord*> same_element;
  std::vector<const OptimizationRecord*> same_model;
  for (const auto& r : st.optimizations) {
    if (!action_kind.empty() && r.action_kind != action_kind) continue;
    if (r.target == target) {
      same_element.push_back(&r);
      continue;
    }
    if (!target_im) continue;
    const auto im = st.inventory_for(r.target);
    if (im && im->hardware_model == target_im->hardware_model) same_model.push_back(&r);
  }
  auto newest_first = [](const OptimizationRecord* a, const OptimizationRecord* b) {
    return std::tie(b->created_at, b->record_id) < std::tie(a->created_at, a->record_id);
  };
  std::sort(same_element.begin(), same_element.end(), newest_first);
  std::sort(same_model.begin(), same_model.end(), newest_first);
  std::vector<OptimizationRecord> out;
  for (const auto* group : {&same_element, &same_model}) {
    for (const auto* r : *group) {
      if (out.size() == limit) return out;
      out.push_back(*r);
    }
  }
  return out;
}

std::string Store::export_pm_csv() const {
  std::shared_lock lock(mutex_);
  std::vector<sim::KpiSample> samples;
  samples.reserve(state_->pm_count);
  for (const auto& [key, points] : state_->pm) {
    for (const auto& [t, v] : points) samples.push_back({key.element_id, key.level, key.kpi, t, v});
  }
  std::sort(samples.begin(), samples.end(), [](const sim::KpiSample& a, const sim::KpiSample& b) {
    return std::tie(a.timestamp, a.level, a.element_id, a.kpi) < std::tie(b.timestamp, b.level, b.element_id, b.kpi);
  });
  std::string out = std::string(sim::kCsvHeader) + '\n';
  for (const auto& s : samples) {
    out += sim::to_csv_line(s);
    out += '\n';
  }
  return out;
}

std::size_t Store::import_pm_csv(const std::string& text) {
  std::vector<sim::KpiSample> samples;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == sim::kCsvHeader) continue;
    try {
      samples.push_back(sim::sample_from_csv_line(line));
    } catch (const Error& e) {
      throw Error(Errc::malformed_sample, e.what(), fmt::format("line {}", line_no));
    }
  }
  return ingest_pm(samples);
}

}  // namespace ranagent::store
