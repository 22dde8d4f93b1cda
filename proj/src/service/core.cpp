#include "ranagent/service/core.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ranagent/reasoning/types.hpp"
#include "ranagent/tsa/deviation_table.hpp"

namespace ranagent::service {

namespace fs = std::filesystem;
using orchestrator::RunRequest;

namespace {

Response json_response(const Json& doc, int status = 200) { return {status, canonical_dump(doc) + "\n"}; }

Json parse_body(const std::string& body) {
  try {
    return body.empty() ? Json::object() : Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::invalid_argument, std::string("malformed JSON body: ") + e.what(), "body");
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::int64_t int_param(const Params& p, const std::string& key, std::int64_t fallback) {
  auto it = p.find(key);
  if (it == p.end() || it->second.empty()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, key + " must be an integer", key);
  }
}

Level level_param(const Params& p, const std::string& key, Level fallback) {
  auto it = p.find(key);
  if (it == p.end() || it->second.empty()) return fallback;
  auto level = parse_level(it->second);
  if (!level) throw Error(Errc::invalid_argument, "unknown level '" + it->second + "'", key);
  return *level;
}

std::optional<ElementRef> element_param(const Params& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end() || it->second.empty()) return std::nullopt;
  const auto colon = it->second.find(':');
  if (colon == std::string::npos) throw Error(Errc::invalid_argument, "expected <level>:<id>", key);
  auto level = parse_level(it->second.substr(0, colon));
  if (!level) throw Error(Errc::invalid_argument, "unknown level in '" + it->second + "'", key);
  return ElementRef{*level, it->second.substr(colon + 1)};
}

std::pair<Timestamp, Timestamp> time_range(const Params& p, Timestamp default_end) {
  const Timestamp start = int_param(p, "start", 0);
  const Timestamp end = int_param(p, "end", default_end);
  if (start >= end) throw Error(Errc::invalid_argument, "start must be before end", "time_range");
  return {start, end};
}

bool valid_name(const std::string& name) {
  return !name.empty() && name.size() <= 128 && name[0] != '.' &&
         std::all_of(name.begin(), name.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'; });
}

}  // namespace

Response error_response(const Error& e) {
  Json err{{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"path", e.path()}};
  return json_response(Json{{"error", err}}, http_status_for(e.code()));
}

std::string format_sse(const orchestrator::EventRecord& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + std::string(orchestrator::to_string(e.kind)) +
         "\ndata: " + canonical_dump(orchestrator::to_json(e)) + "\n\n";
}

ServiceCore::ServiceCore(ServiceConfig config)
    : config_(std::move(config)), orchestrator_(std::make_unique<orchestrator::Orchestrator>()) {
  if (!config_.datastore_path.empty()) load_datastore();
  if (!config_.scenario_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(config_.scenario_dir)) {
      if (f.path().extension() == ".json") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto spec = sim::load_scenario_file(f.string());
      if (!scenario(spec.name)) ingest_scenario(spec);
    }
  }
}

ServiceCore::~ServiceCore() = default;

void ServiceCore::load_datastore() {
  if (!fs::exists(config_.datastore_path)) return;
  std::vector<fs::path> dirs;
  for (const auto& d : fs::directory_iterator(config_.datastore_path)) {
    if (d.is_directory() && fs::exists(d.path() / "scenario.json")) dirs.push_back(d.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    Entry e;
    e.spec = sim::load_scenario_file((dir / "scenario.json").string());
    e.topology = std::make_shared<const sim::NetworkTopology>(sim::build_topology(e.spec.topology));
    e.store = store::Store::open(dir / "store");
    e.store->set_topology(e.topology, e.spec.interval_s);
    std::lock_guard lock(mu_);
    scenarios_[e.spec.name] = std::move(e);
  }
}

void ServiceCore::ingest_scenario(const sim::ScenarioSpec& spec) {
  if (!valid_name(spec.name)) throw Error(Errc::invalid_argument, "scenario name must be [A-Za-z0-9._-]", "name");
  Entry e;
  e.spec = spec;
  e.topology = std::make_shared<const sim::NetworkTopology>(sim::build_topology(spec.topology));
  sim::validate_scenario(spec, *e.topology);
  if (!config_.datastore_path.empty()) {
    const fs::path dir = fs::path(config_.datastore_path) / spec.name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "scenario.json") << canonical_dump(sim::to_json(spec)) << "\n";
    e.store = store::Store::open(dir / "store");
  } else {
    e.store = std::make_unique<store::Store>();
  }
  e.store->set_topology(e.topology, spec.interval_s);
  sim::Simulation simulation(e.topology, spec);
  const auto samples = simulation.advance(spec.horizon);
  e.store->ingest_pm(samples);
  const auto alarms = sim::emit_fm_alarms(spec);
  e.store->ingest_fm(alarms);
  e.store->record_cm_changes(simulation.cm_log());
  std::lock_guard lock(mu_);
  scenarios_[spec.name] = std::move(e);
}

std::vector<std::string> ServiceCore::scenario_names() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, e] : scenarios_) out.push_back(name);
  return out;
}

std::optional<sim::ScenarioSpec> ServiceCore::scenario(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = scenarios_.find(name);
  if (it == scenarios_.end()) return std::nullopt;
  return it->second.spec;
}

const ServiceCore::Entry& ServiceCore::entry_for(const Params& params) const {
  std::lock_guard lock(mu_);
  auto it = params.find("scenario");
  if (it == params.end() || it->second.empty()) {
    if (scenarios_.size() == 1) return scenarios_.begin()->second;
    throw Error(scenarios_.empty() ? Errc::not_found : Errc::invalid_argument,
                scenarios_.empty() ? "no scenario has been ingested" : "several scenarios are loaded; name one",
                "scenario");
  }
  auto found = scenarios_.find(it->second);
  if (found == scenarios_.end()) throw Error(Errc::not_found, "unknown scenario '" + it->second + "'", "scenario");
  return found->second;
}

RunRequest ServiceCore::parse_run_request(const std::string& body) const {
  Json doc = parse_body(body);
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "request must be an object", "body");
  if (!doc.contains("scenario")) throw Error(Errc::invalid_argument, "missing scenario", "scenario");
  if (doc["scenario"].is_string()) {
    const auto name = doc["scenario"].get<std::string>();
    auto spec = scenario(name);
    if (!spec) throw Error(Errc::invalid_argument, "unknown scenario '" + name + "'", "scenario");
    doc["scenario"] = sim::to_json(*spec);
  }
  if (auto it = doc.find("backend"); it != doc.end() && !it->is_null()) {
    const std::string kind = it->is_string() ? it->get<std::string>() : it->value("kind", std::string());
    if (kind == "external") {
      if (!config_.backend) throw Error(Errc::invalid_argument, "no external backend endpoint is configured", "backend");
      doc["backend"] = Json{{"kind", "external"}, {"external", reasoning::to_json(*config_.backend)}};
    } else if (kind != "rule") {
      throw Error(Errc::invalid_argument, "backend must be rule or external", "backend");
    }
  }
  return orchestrator::request_from_json(doc, "");
}

Response ServiceCore::create_run(const std::string& body) {
  try {
    auto run = orchestrator_->start(parse_run_request(body));
    return json_response(Json{{"run_id", run->id()}, {"status", std::string(to_string(run->status()))}}, 202);
  } catch (const Error& e) {
    return error_response(e);
  }
}

std::shared_ptr<orchestrator::Run> ServiceCore::run(const std::string& run_id) const {
  return orchestrator_->find(run_id);
}

Response ServiceCore::get_run(const std::string& run_id) const {
  auto r = run(run_id);
  if (!r) return error_response(Error(Errc::not_found, "unknown run " + run_id, "run_id"));
  return json_response(r->state_json());
}

Response ServiceCore::get_trace(const std::string& run_id) const {
  auto r = run(run_id);
  if (!r) return error_response(Error(Errc::not_found, "unknown run " + run_id, "run_id"));
  std::string body;
  for (const auto& line : r->export_trace()) body += line + "\n";
  return {200, body, "application/x-ndjson"};
}

Response ServiceCore::list_approvals() const {
  Json list = Json::array();
  for (const auto& a : orchestrator_->pending_approvals()) list.push_back(orchestrator::to_json(a));
  return json_response(Json{{"approvals", list}});
}

Response ServiceCore::decide_approval(const std::string& approval_id, const std::string& body) {
  try {
    const Json doc = parse_body(body);
    if (!doc.is_object()) throw Error(Errc::invalid_argument, "request must be an object", "body");
    const auto decision = orchestrator::decision_from_string(require_string(doc, "decision", ""));
    const std::string note = doc.value("note", std::string());
    std::shared_ptr<orchestrator::Run> target;
    for (const auto& r : orchestrator_->runs()) {
      const auto p = r->pending_approval();
      if (p && p->approval_id == approval_id) target = r;
    }
    orchestrator_->decide(approval_id, decision, note);
    return json_response(Json{{"approval_id", approval_id},
                              {"decision", std::string(to_string(decision))},
                              {"run_id", target ? target->id() : ""},
                              {"status", target ? std::string(to_string(target->status())) : ""}});
  } catch (const Error& e) {
    return error_response(e);
  }
}

Response ServiceCore::query_kpi(const Params& params) const {
  try {
    const auto& e = entry_for(params);
    store::KpiSelector sel;
    sel.level = level_param(params, "level", Level::cell);
    if (auto it = params.find("elements"); it != params.end() && !it->second.empty()) sel.element_ids = split_list(it->second);
    if (auto it = params.find("kpis"); it != params.end()) sel.kpis = split_list(it->second);
    for (const auto& k : sel.kpis) {
      if (!is_known_kpi(k)) throw Error(Errc::unknown_kpi, "unknown KPI " + k, "kpis");
    }
    std::tie(sel.start, sel.end) = time_range(params, e.spec.horizon_end());
    sel.peer_scope = element_param(params, "peer_scope");
    const auto data = e.store->query_kpi(sel);
    Json series = Json::array();
    for (const auto& [key, points] : data) {
      Json pts = Json::array();
      for (const auto& p : points) pts.push_back(Json::array({p.t, p.value}));
      series.push_back(Json{{"element_id", key.element_id}, {"kpi", key.kpi}, {"points", pts}});
    }
    return json_response(Json{{"scenario", e.spec.name},
                              {"level", std::string(to_string(sel.level))},
                              {"start", sel.start},
                              {"end", sel.end},
                              {"series", series}});
  } catch (const Error& e) {
    return error_response(e);
  }
}

tsa::DeviationTable ServiceCore::deviation_table(const Params& params) const {
  const auto& e = entry_for(params);
  const auto [start, end] = time_range(params, e.spec.horizon_end());
  const auto scope = element_param(params, "scope");
  if (scope && !e.topology->contains(*scope)) throw Error(Errc::unknown_element, "unknown element", "scope");
  tsa::TableParams tp;
  if (auto it = params.find("kpis"); it != params.end()) tp.kpis = split_list(it->second);
  for (const auto& k : tp.kpis) {
    if (!is_known_kpi(k)) throw Error(Errc::unknown_kpi, "unknown KPI " + k, "kpis");
  }
  if (auto it = params.find("levels"); it != params.end()) {
    for (const auto& l : split_list(it->second)) {
      auto level = parse_level(l);
      if (!level) throw Error(Errc::invalid_argument, "unknown level '" + l + "'", "levels");
      tp.levels.push_back(*level);
    }
  }
  std::vector<std::string> cells;
  if (scope) {
    cells = e.topology->member_cells(*scope);
  } else {
    for (const auto& c : e.topology->cells()) cells.push_back(c.id);
  }
  store::KpiSelector sel;
  sel.level = Level::cell;
  sel.element_ids = cells;
  sel.kpis = tp.kpis;
  sel.start = start;
  sel.end = end;
  const auto data = e.store->query_kpi(sel);
  auto table = tsa::build_deviation_table(*e.topology, data, start, end, tp);
  if (scope) {
    const std::set<std::string> inside(cells.begin(), cells.end());
    std::erase_if(table.rows, [&](const tsa::DeviationRow& r) {
      const auto members = e.topology->member_cells({r.level, r.element_id});
      return !std::all_of(members.begin(), members.end(), [&](const auto& c) { return inside.count(c) > 0; });
    });
    tsa::rank_rows(table);
  }
  return table;
}

Response ServiceCore::query_deviations(const Params& params) const {
  try {
    Json doc = tsa::to_json(deviation_table(params));
    doc["scenario"] = entry_for(params).spec.name;
    return json_response(doc);
  } catch (const Error& e) {
    return error_response(e);
  }
}

Response ServiceCore::topology(const Params& params) const {
  try {
    const auto& e = entry_for(params);
    Json levels = Json::object();
    for (Level l : kAllLevels) levels[std::string(to_string(l))] = e.topology->elements(l);
    Json cells = Json::array();
    for (const auto& c : e.topology->cells()) {
      cells.push_back(Json{{"id", c.id}, {"node", c.node}, {"band", c.band}, {"sector", c.sector},
                           {"region", c.region}, {"cluster", c.cluster}});
    }
    return json_response(Json{{"scenario", e.spec.name},
                              {"interval_s", e.spec.interval_s},
                              {"horizon", e.spec.horizon},
                              {"levels", levels},
                              {"cells", cells}});
  } catch (const Error& e) {
    return error_response(e);
  }
}

Response ServiceCore::list_scenarios() const {
  std::lock_guard lock(mu_);
  Json list = Json::array();
  for (const auto& [name, e] : scenarios_) {
    list.push_back(Json{{"name", name},
                        {"horizon", e.spec.horizon},
                        {"interval_s", e.spec.interval_s},
                        {"seed", e.spec.seed},
                        {"events", e.spec.events.size()},
                        {"samples", e.store->pm_sample_count()}});
  }
  return json_response(Json{{"scenarios", list}});
}

}  // namespace ranagent::service
