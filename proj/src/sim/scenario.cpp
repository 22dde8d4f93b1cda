#include "ranagent/sim/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ranagent/core/errors.hpp"

namespace ranagent::sim {

std::string_view to_string(Severity severity) {
  switch (severity) {
    case Severity::minor: return "minor";
    case Severity::major: return "major";
    case Severity::critical: return "critical";
  }
  return "major";
}

Severity severity_from_string(std::string_view text) {
  if (text == "minor") return Severity::minor;
  if (text == "major") return Severity::major;
  if (text == "critical") return Severity::critical;
  throw Error(Errc::invalid_argument, "unknown severity '" + std::string(text) + "'");
}

std::string FmAlarm::id() const {
  return to_string(element) + "@" + std::to_string(timestamp) + ":" + code;
}

std::string CmChange::id() const {
  return cell + ":" + parameter + "@" + std::to_string(timestamp) + "#" + source;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::step_shift: return "step_shift";
    case EventKind::transient_spike: return "transient_spike";
    case EventKind::linear_drift: return "linear_drift";
    case EventKind::config_change: return "config_change";
    case EventKind::fm_alarm: return "fm_alarm";
  }
  return "step_shift";
}

EventKind event_kind_from_string(std::string_view text) {
  for (auto k : {EventKind::step_shift, EventKind::transient_spike, EventKind::linear_drift,
                 EventKind::config_change, EventKind::fm_alarm}) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::invalid_argument, "unknown event kind '" + std::string(text) + "'");
}

std::string_view to_string(MagnitudeUnit unit) {
  switch (unit) {
    case MagnitudeUnit::absolute: return "absolute";
    case MagnitudeUnit::sigma: return "sigma";
    case MagnitudeUnit::percent_of_mean: return "percent_of_mean";
  }
  return "absolute";
}

MagnitudeUnit magnitude_unit_from_string(std::string_view text) {
  if (text == "absolute") return MagnitudeUnit::absolute;
  if (text == "sigma") return MagnitudeUnit::sigma;
  if (text == "percent_of_mean") return MagnitudeUnit::percent_of_mean;
  throw Error(Errc::invalid_argument, "unknown magnitude unit '" + std::string(text) + "'");
}

std::map<std::string, KpiBaseline> default_baseline() {
  return {
      {std::string(kpi::dl_throughput), {120.0, 30.0, 6.0}},
      {std::string(kpi::prb_utilization), {45.0, 15.0, 3.0}},
      {std::string(kpi::rrc_setup_success), {98.5, 0.3, 0.25}},
      {std::string(kpi::ho_success), {97.0, 0.5, 0.4}},
      {std::string(kpi::call_drop), {0.8, 0.2, 0.08}},
  };
}

double resolve_magnitude(double magnitude, MagnitudeUnit unit, const KpiBaseline& baseline) {
  switch (unit) {
    case MagnitudeUnit::absolute: return magnitude;
    case MagnitudeUnit::sigma: return magnitude * baseline.noise_sigma;
    case MagnitudeUnit::percent_of_mean: return magnitude / 100.0 * baseline.mean;
  }
  return magnitude;
}

void validate_scenario(const ScenarioSpec& spec, const NetworkTopology& topology) {
  if (spec.horizon < 1) throw Error(Errc::invalid_argument, "horizon must be >= 1", "horizon");
  if (spec.interval_s <= 0) throw Error(Errc::invalid_argument, "interval_s must be > 0", "interval_s");
  for (const auto& info : default_kpis()) {
    if (!spec.baseline.contains(std::string(info.name))) {
      throw Error(Errc::unknown_kpi, "no baseline for KPI '" + std::string(info.name) + "'", "baseline");
    }
  }
  for (const auto& [name, b] : spec.baseline) {
    if (!is_known_kpi(name)) throw Error(Errc::unknown_kpi, "unknown KPI '" + name + "'", "baseline." + name);
    if (b.noise_sigma < 0.0) {
      throw Error(Errc::invalid_argument, "noise_sigma must be >= 0", "baseline." + name + ".noise_sigma");
    }
  }
  auto check_effects = [&](const std::vector<KpiEffect>& effects, const std::string& path) {
    for (std::size_t j = 0; j < effects.size(); ++j) {
      if (!is_known_kpi(effects[j].kpi)) {
        throw Error(Errc::unknown_kpi, "unknown KPI '" + effects[j].kpi + "'", index_path(path, j) + ".kpi");
      }
    }
  };
  for (std::size_t i = 0; i < spec.events.size(); ++i) {
    const auto& e = spec.events[i];
    const std::string path = index_path("events", i);
    if (!topology.contains(e.target)) {
      throw Error(Errc::unknown_element, "event targets unknown element " + to_string(e.target),
                  path + ".target");
    }
    if (e.onset < 0 || e.onset >= spec.horizon_end()) {
      throw Error(Errc::invalid_argument, "onset outside scenario horizon", path + ".onset");
    }
    if (e.onset % spec.interval_s != 0) {
      throw Error(Errc::invalid_argument, "onset must be a multiple of interval_s", path + ".onset");
    }
    switch (e.kind) {
      case EventKind::step_shift:
      case EventKind::transient_spike:
      case EventKind::linear_drift:
        if (!e.kpi || !is_known_kpi(*e.kpi)) {
          throw Error(Errc::unknown_kpi, "event needs a known KPI", path + ".kpi");
        }
        if (e.kind != EventKind::step_shift && e.duration < 1) {
          throw Error(Errc::invalid_argument, "duration must be >= 1 interval", path + ".duration");
        }
        break;
      case EventKind::config_change: {
        if (e.target.level != Level::cell) {
          throw Error(Errc::invalid_argument, "config_change must target a cell", path + ".target");
        }
        const auto& b = topology.bounds().for_parameter(e.parameter);
        if (e.value < b.min || e.value > b.max) {
          throw Error(Errc::out_of_bounds, "config_change value outside bounds", path + ".value");
        }
        check_effects(e.effects, path + ".effects");
        break;
      }
      case EventKind::fm_alarm:
        if (e.alarm_code.empty()) throw Error(Errc::invalid_argument, "alarm code required", path + ".code");
        break;
    }
  }
  for (std::size_t i = 0; i < spec.action_effects.size(); ++i) {
    const auto& a = spec.action_effects[i];
    const std::string path = index_path("action_effects", i);
    if (!topology.contains(Level::cell, a.cell)) {
      throw Error(Errc::unknown_element, "action effect targets unknown cell '" + a.cell + "'", path + ".cell");
    }
    if (!is_known_parameter(a.parameter)) {
      throw Error(Errc::invalid_argument, "unknown parameter '" + a.parameter + "'", path + ".parameter");
    }
    check_effects(a.effects, path + ".effects");
  }
}

std::vector<FmAlarm> emit_fm_alarms(const ScenarioSpec& spec) {
  std::vector<FmAlarm> out;
  for (const auto& e : spec.events) {
    if (e.kind == EventKind::fm_alarm) out.push_back(FmAlarm{e.target, e.onset, e.alarm_code, e.severity});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FmAlarm& a, const FmAlarm& b) { return a.timestamp < b.timestamp; });
  return out;
}

namespace {

Json ref_json(const ElementRef& ref) { return Json{{"level", std::string(to_string(ref.level))}, {"id", ref.id}}; }

ElementRef ref_from(const Json& doc, const std::string& path) {
  return ElementRef{level_from_string(require_string(doc, "level", path)), require_string(doc, "id", path)};
}

Json effects_json(const std::vector<KpiEffect>& effects) {
  Json arr = Json::array();
  for (const auto& e : effects) {
    arr.push_back(Json{{"kpi", e.kpi}, {"delta", e.delta}, {"unit", std::string(to_string(e.unit))}});
  }
  return arr;
}

std::vector<KpiEffect> effects_from(const Json& doc, const std::string& path) {
  std::vector<KpiEffect> out;
  if (!doc.is_array()) throw Error(Errc::invalid_argument, "effects must be an array", path);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string p = index_path(path, i);
    KpiEffect e;
    e.kpi = require_string(doc[i], "kpi", p);
    e.delta = require_number(doc[i], "delta", p);
    e.unit = magnitude_unit_from_string(doc[i].value("unit", std::string("absolute")));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

Json to_json(const ScenarioSpec& spec) {
  Json doc;
  doc["name"] = spec.name;
  doc["topology"] = to_json(spec.topology);
  doc["horizon"] = spec.horizon;
  doc["interval_s"] = spec.interval_s;
  doc["seed"] = spec.seed;
  doc["baseline"] = Json::object();
  for (const auto& [k, b] : spec.baseline) {
    doc["baseline"][k] = Json{{"mean", b.mean}, {"diurnal_amplitude", b.diurnal_amplitude},
                              {"noise_sigma", b.noise_sigma}};
  }
  doc["events"] = Json::array();
  for (const auto& e : spec.events) {
    Json ev{{"kind", std::string(to_string(e.kind))}, {"target", ref_json(e.target)}, {"onset", e.onset}};
    switch (e.kind) {
      case EventKind::step_shift:
      case EventKind::transient_spike:
      case EventKind::linear_drift:
        ev["kpi"] = *e.kpi;
        ev["magnitude"] = e.magnitude;
        ev["unit"] = std::string(to_string(e.unit));
        if (e.kind != EventKind::step_shift) ev["duration"] = e.duration;
        break;
      case EventKind::config_change:
        ev["parameter"] = e.parameter;
        ev["value"] = e.value;
        ev["effects"] = effects_json(e.effects);
        break;
      case EventKind::fm_alarm:
        ev["code"] = e.alarm_code;
        ev["severity"] = std::string(to_string(e.severity));
        break;
    }
    doc["events"].push_back(std::move(ev));
  }
  doc["action_effects"] = Json::array();
  for (const auto& a : spec.action_effects) {
    doc["action_effects"].push_back(Json{{"cell", a.cell}, {"parameter", a.parameter}, {"value", a.value},
                                         {"effects", effects_json(a.effects)}});
  }
  return doc;
}

ScenarioSpec scenario_from_json(const Json& doc) {
  ScenarioSpec spec;
  spec.name = doc.value("name", spec.name);
  spec.topology = topology_spec_from_json(require(doc, "topology", ""), "topology");
  spec.interval_s = doc.value("interval_s", spec.interval_s);
  spec.horizon = doc.value("horizon", spec.horizon);
  if (doc.contains("horizon_days")) {
    if (spec.interval_s <= 0) throw Error(Errc::invalid_argument, "interval_s must be > 0", "interval_s");
    spec.horizon = doc["horizon_days"].get<std::int64_t>() * kDaySeconds / spec.interval_s;
  }
  spec.seed = doc.value("seed", spec.seed);
  if (doc.contains("baseline")) {
    spec.baseline.clear();
    for (const auto& [k, b] : doc["baseline"].items()) {
      const std::string p = "baseline." + k;
      spec.baseline[k] = KpiBaseline{require_number(b, "mean", p), b.value("diurnal_amplitude", 0.0),
                                     b.value("noise_sigma", 0.0)};
    }
  }
  if (doc.contains("events")) {
    const Json& events = doc["events"];
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Json& ev = events[i];
      const std::string p = index_path("events", i);
      ScenarioEvent e;
      e.kind = event_kind_from_string(require_string(ev, "kind", p));
      e.target = ref_from(require(ev, "target", p), p + ".target");
      if (ev.contains("onset_interval")) {
        e.onset = ev["onset_interval"].get<std::int64_t>() * spec.interval_s;
      } else {
        e.onset = require_int(ev, "onset", p);
      }
      if (ev.contains("kpi")) e.kpi = ev["kpi"].get<std::string>();
      e.magnitude = ev.value("magnitude", 0.0);
      e.unit = magnitude_unit_from_string(ev.value("unit", std::string("absolute")));
      e.duration = ev.value("duration", std::int64_t{0});
      e.parameter = ev.value("parameter", std::string());
      e.value = ev.value("value", 0.0);
      if (ev.contains("effects")) e.effects = effects_from(ev["effects"], p + ".effects");
      e.alarm_code = ev.value("code", std::string());
      e.severity = severity_from_string(ev.value("severity", std::string("major")));
      spec.events.push_back(std::move(e));
    }
  }
  if (doc.contains("action_effects")) {
    const Json& arr = doc["action_effects"];
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = index_path("action_effects", i);
      ActionEffect a;
      a.cell = require_string(arr[i], "cell", p);
      a.parameter = require_string(arr[i], "parameter", p);
      a.value = require_number(arr[i], "value", p);
      a.effects = effects_from(require(arr[i], "effects", p), p + ".effects");
      spec.action_effects.push_back(std::move(a));
    }
  }
  return spec;
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::not_found, "cannot open scenario file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::invalid_argument, std::string("scenario file is not valid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

Json to_json(const FmAlarm& alarm) {
  return Json{{"element_id", alarm.element.id},
              {"level", std::string(to_string(alarm.element.level))},
              {"timestamp", alarm.timestamp},
              {"code", alarm.code},
              {"severity", std::string(to_string(alarm.severity))}};
}

FmAlarm fm_alarm_from_json(const Json& doc, const std::string& path) {
  FmAlarm a;
  a.element.id = require_string(doc, "element_id", path);
  a.element.level = level_from_string(require_string(doc, "level", path));
  a.timestamp = require_int(doc, "timestamp", path);
  a.code = require_string(doc, "code", path);
  a.severity = severity_from_string(require_string(doc, "severity", path));
  return a;
}

Json to_json(const CmChange& change) {
  return Json{{"cell", change.cell},         {"parameter", change.parameter}, {"timestamp", change.timestamp},
              {"old_value", change.old_value}, {"new_value", change.new_value}, {"source", change.source}};
}

CmChange cm_change_from_json(const Json& doc, const std::string& path) {
  CmChange c;
  c.cell = require_string(doc, "cell", path);
  c.parameter = require_string(doc, "parameter", path);
  c.timestamp = require_int(doc, "timestamp", path);
  c.old_value = require_number(doc, "old_value", path);
  c.new_value = require_number(doc, "new_value", path);
  c.source = doc.value("source", std::string("scenario"));
  return c;
}

std::string to_csv_line(const KpiSample& s) {
  std::string line = std::to_string(s.timestamp);
  line += ',';
  line += s.element_id;
  line += ',';
  line += to_string(s.level);
  line += ',';
  line += s.kpi;
  line += ',';
  line += format_fixed6(s.value);
  return line;
}

KpiSample sample_from_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (fields.size() != 5) {
    throw Error(Errc::malformed_sample, "expected 5 fields in '" + std::string(line) + "'");
  }
  KpiSample s;
  auto [p1, ec1] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), s.timestamp);
  if (ec1 != std::errc{} || p1 != fields[0].data() + fields[0].size()) {
    throw Error(Errc::malformed_sample, "bad timestamp in '" + std::string(line) + "'");
  }
  s.element_id = std::string(fields[1]);
  auto level = parse_level(fields[2]);
  if (!level) throw Error(Errc::malformed_sample, "bad level in '" + std::string(line) + "'");
  s.level = *level;
  s.kpi = std::string(fields[3]);
  try {
    std::size_t used = 0;
    std::string value_text(fields[4]);
    while (!value_text.empty() && (value_text.back() == '\r' || value_text.back() == ' ')) value_text.pop_back();
    s.value = std::stod(value_text, &used);
    if (used != value_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(Errc::malformed_sample, "bad value in '" + std::string(line) + "'");
  }
  return s;
}

}  // namespace ranagent::sim
