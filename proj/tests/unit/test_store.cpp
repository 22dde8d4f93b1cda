#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "ranagent/core/errors.hpp"
#include "ranagent/sim/suites.hpp"
#include "ranagent/store/store.hpp"
#include "ranagent/tsa/aggregate.hpp"

using namespace ranagent;
using namespace ranagent::store;

namespace {

// n1 owns three cells, n2 one; n1 and n3 share a hardware model.
std::shared_ptr<const sim::NetworkTopology> small_topology() {
  sim::TopologySpec spec;
  spec.bands = {"b1"};
  spec.sectors = {"s1"};
  spec.clusters = {"k1"};
  spec.regions = {{"r1", "k1"}};
  spec.nodes = {{"n1", "r1", {"v", "model-a", "1", 0}},
                {"n2", "r1", {"v", "model-b", "1", 0}},
                {"n3", "r1", {"v", "model-a", "1", 0}}};
  spec.cells = {{"c1", "n1", "b1", "s1", {}}, {"c2", "n1", "b1", "s1", {}}, {"c3", "n1", "b1", "s1", {}},
                {"c4", "n2", "b1", "s1", {}}, {"c5", "n3", "b1", "s1", {}}};
  return std::make_shared<const sim::NetworkTopology>(sim::build_topology(spec));
}

std::unique_ptr<Store> make_store() {
  auto store = std::make_unique<Store>();
  store->set_topology(small_topology(), 900);
  return store;
}

std::vector<sim::KpiSample> ramp(const std::string& cell, std::string_view kpi, std::int64_t n, double base = 10.0) {
  std::vector<sim::KpiSample> out;
  for (std::int64_t i = 0; i < n; ++i) {
    out.push_back({cell, Level::cell, std::string(kpi), i * 900, base + static_cast<double>(i % 7)});
  }
  return out;
}

OptimizationRecord record(std::string id, Timestamp created, std::string cell, Outcome outcome = Outcome::pending) {
  OptimizationRecord r;
  r.record_id = std::move(id);
  r.created_at = created;
  r.target = {Level::cell, std::move(cell)};
  r.action_kind = "adjust_tx_power";
  r.parameters_before = {{"tx_power_dbm", 43.0}};
  r.parameters_after = {{"tx_power_dbm", 44.0}};
  r.outcome = outcome;
  if (outcome != Outcome::pending) {
    for (const auto& k : default_kpis()) r.kpi_delta[std::string(k.name)] = 0.5;
  }
  return r;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ranagent-store-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("ingesting the same samples twice is idempotent") {
  auto store = make_store();
  auto samples = ramp("c1", kpi::dl_throughput, 100);
  CHECK(store->ingest_pm(samples) == 100);
  CHECK(store->ingest_pm(samples) == 100);
  CHECK(store->pm_sample_count() == 100);
  CHECK(store->ingest_pm({}) == 0);
  CHECK(store->pm_sample_count() == 100);

  // Last write wins.
  std::vector<sim::KpiSample> update{{"c1", Level::cell, std::string(kpi::dl_throughput), 0, 99.0}};
  store->ingest_pm(update);
  KpiSelector sel{Level::cell, std::vector<std::string>{"c1"}, {std::string(kpi::dl_throughput)}, 0, 900, {}};
  CHECK(store->query_kpi(sel).at({"c1", std::string(kpi::dl_throughput)})[0].value == 99.0);
  CHECK(store->pm_sample_count() == 100);
}

TEST_CASE("malformed samples are rejected with their index and nothing is written") {
  auto store = make_store();
  auto samples = ramp("c1", kpi::prb_utilization, 5);
  samples[3].timestamp = 1000;
  try {
    store->ingest_pm(samples);
    FAIL("expected malformed_sample");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::malformed_sample);
    CHECK(e.path() == "samples[3]");
  }
  CHECK(store->pm_sample_count() == 0);

  samples = ramp("c1", kpi::prb_utilization, 5);
  samples[1].value = 101.0;
  CHECK_THROWS_AS(store->ingest_pm(samples), Error);
  samples = ramp("c9", kpi::prb_utilization, 1);
  CHECK_THROWS_AS(store->ingest_pm(samples), Error);
  samples = ramp("c1", "latency_ms", 1);
  CHECK_THROWS_AS(store->ingest_pm(samples), Error);
}

TEST_CASE("one day at the default cadence is 96 points") {
  auto store = make_store();
  store->ingest_pm(ramp("c1", kpi::ho_success, 300, 90.0));
  KpiSelector sel{Level::cell, std::vector<std::string>{"c1"}, {std::string(kpi::ho_success)}, 0, kDaySeconds, {}};
  auto result = store->query_kpi(sel);
  REQUIRE(result.size() == 1);
  const auto& series = result.begin()->second;
  CHECK(series.size() == kDaySeconds / kDefaultIntervalSeconds);
  CHECK(series.size() == 96);
  CHECK(series.front().t == 0);
  CHECK(series.back().t == kDaySeconds - 900);
}

TEST_CASE("peer scope expands to every child of the parent") {
  auto store = make_store();
  for (const char* c : {"c1", "c2", "c3", "c4"}) {
    for (const auto& k : default_kpis()) store->ingest_pm(ramp(c, k.name, 8, 20.0));
  }
  KpiSelector sel;
  sel.level = Level::cell;
  sel.kpis = {std::string(kpi::dl_throughput), std::string(kpi::call_drop)};
  sel.start = 0;
  sel.end = 8 * 900;
  sel.peer_scope = ElementRef{Level::node, "n1"};
  auto result = store->query_kpi(sel);
  CHECK(result.size() == 6);
  for (const char* c : {"c1", "c2", "c3"}) {
    CHECK(result.at({c, std::string(kpi::dl_throughput)}).size() == 8);
  }
  CHECK_FALSE(result.contains({"c4", std::string(kpi::dl_throughput)}));
}

TEST_CASE("ranges without data give empty series, bad names give errors") {
  auto store = make_store();
  store->ingest_pm(ramp("c1", kpi::dl_throughput, 10));
  KpiSelector sel{Level::cell, std::vector<std::string>{"c1"}, {std::string(kpi::dl_throughput)}, 50 * 900, 60 * 900, {}};
  auto result = store->query_kpi(sel);
  REQUIRE(result.size() == 1);
  CHECK(result.begin()->second.empty());

  sel.element_ids = std::vector<std::string>{"c42"};
  try {
    store->query_kpi(sel);
    FAIL("expected unknown_element");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_element);
  }
  sel.element_ids = std::vector<std::string>{"c1"};
  sel.kpis = {"latency_ms"};
  try {
    store->query_kpi(sel);
    FAIL("expected unknown_kpi");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_kpi);
  }
}

TEST_CASE("query returns exactly what was ingested after dedup") {
  auto store = make_store();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> cell(1, 5), slot(0, 199), kpi_index(0, 4);
  std::uniform_real_distribution<double> value(0.0, 100.0);
  std::map<std::tuple<std::string, std::string, Timestamp>, double> expected;
  std::vector<sim::KpiSample> samples;
  for (int i = 0; i < 3000; ++i) {
    sim::KpiSample s{"c" + std::to_string(cell(rng)), Level::cell,
                     std::string(default_kpis()[static_cast<std::size_t>(kpi_index(rng))].name),
                     static_cast<Timestamp>(slot(rng)) * 900, value(rng)};
    samples.push_back(s);
    expected[{s.element_id, s.kpi, s.timestamp}] = s.value;
  }
  store->ingest_pm(samples);
  CHECK(store->pm_sample_count() == expected.size());
  KpiSelector sel{Level::cell, {}, {}, 0, 200 * 900, {}};
  std::size_t seen = 0;
  for (const auto& [key, series] : store->query_kpi(sel)) {
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (i > 0) CHECK(series[i - 1].t < series[i].t);
      CHECK(expected.at({key.element_id, key.kpi, series[i].t}) == series[i].value);
      ++seen;
    }
  }
  CHECK(seen == expected.size());
}

TEST_CASE("node level is derived from cells when not stored") {
  auto store = make_store();
  for (const char* c : {"c1", "c2", "c3"}) {
    store->ingest_pm(ramp(c, kpi::dl_throughput, 4, c[1] - '0'));
  }
  KpiSelector sel{Level::node, std::vector<std::string>{"n1"}, {std::string(kpi::dl_throughput)}, 0, 4 * 900, {}};
  auto series = store->query_kpi(sel).at({"n1", std::string(kpi::dl_throughput)});
  REQUIRE(series.size() == 4);
  // Throughput sums over the node's cells: (1 + 2 + 3) + 3 * (i % 7).
  for (std::size_t i = 0; i < 4; ++i) CHECK(series[i].value == doctest::Approx(6.0 + 3.0 * static_cast<double>(i)));
}

TEST_CASE("snapshot then restore returns every cell to its snapshot values") {
  auto topology = small_topology();
  auto spec = sim::base_scenario("restore", 3, 96);
  spec.topology = topology->spec();
  sim::Simulation simulation(topology, spec);
  Store store;
  store.set_topology(topology, 900);

  auto snap = store.snapshot_config(simulation.configs(), simulation.now());
  CHECK(snap.snapshot_id == "snap-0001");
  CHECK(store.restore_config(snap.snapshot_id, simulation) == 0);

  const auto version_before = simulation.config("c1").config_version;
  simulation.advance(4);
  simulation.apply_config("c1", param::tx_power, 45.0);
  simulation.apply_config("c1", param::tilt, 6.0);
  simulation.apply_config("c4", param::ho_offset, -2.0);
  simulation.apply_config("c4", param::ho_offset, 0.0);  // back to the snapshot value
  CHECK(store.restore_config(snap.snapshot_id, simulation) == 1);
  for (const auto& [cell, config] : snap.entries) CHECK(simulation.config(cell).same_values(config));
  CHECK(simulation.config("c1").config_version > version_before);
  CHECK(store.query_cm(0, 1 << 30).size() == 2);
  CHECK(store.query_cm(0, 1 << 30).front().source == "restore");

  try {
    store.restore_config("snap-9999", simulation);
    FAIL("expected not_found");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_found);
  }
}

TEST_CASE("restore is identity on values for random interleaved changes") {
  auto topology = small_topology();
  auto spec = sim::base_scenario("restore-prop", 4, 96);
  spec.topology = topology->spec();
  std::mt19937_64 rng(11);
  const std::string_view params[] = {param::tx_power, param::tilt, param::ho_offset};
  for (int trial = 0; trial < 50; ++trial) {
    sim::Simulation simulation(topology, spec);
    Store store;
    store.set_topology(topology, 900);
    auto snap = store.snapshot_config(simulation.configs(), 0);
    const int changes = static_cast<int>(rng() % 10);
    for (int i = 0; i < changes; ++i) {
      const auto& cell = topology->cells()[rng() % topology->cells().size()].id;
      const auto p = params[rng() % 3];
      const auto& b = topology->bounds().for_parameter(p);
      const double v = b.min + static_cast<double>(rng() % 100) / 99.0 * (b.max - b.min);
      simulation.apply_config(cell, p, v);
    }
    store.restore_config(snap.snapshot_id, simulation);
    for (const auto& [cell, config] : snap.entries) CHECK(simulation.config(cell).same_values(config));
    CHECK(store.restore_config(snap.snapshot_id, simulation) == 0);
  }
}

TEST_CASE("optimization records enforce the delta invariant") {
  Store store;
  auto r = record("r1", 0, "c1");
  r.kpi_delta["dl_throughput_mbps"] = 1.0;
  CHECK_THROWS_AS(store.record_optimization(r), Error);
  r = record("r1", 0, "c1", Outcome::confirmed);
  r.kpi_delta.erase("call_drop_rate_pct");
  CHECK_THROWS_AS(store.record_optimization(r), Error);
  CHECK_NOTHROW(store.record_optimization(record("r1", 0, "c1", Outcome::rolled_back)));
  // Same id updates in place.
  CHECK_NOTHROW(store.record_optimization(record("r1", 0, "c1", Outcome::confirmed)));
  REQUIRE(store.optimizations().size() == 1);
  CHECK(store.optimizations()[0].outcome == Outcome::confirmed);
  auto back = optimization_record_from_json(to_json(store.optimizations()[0]));
  CHECK(back == store.optimizations()[0]);
}

TEST_CASE("precedents: newest same-element first, then same hardware model") {
  auto store = make_store();
  store->record_optimization(record("old", 100, "c1"));
  store->record_optimization(record("new", 200, "c1"));
  auto one = store->query_precedents({Level::cell, "c1"}, "adjust_tx_power", 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].record_id == "new");
  CHECK(store->query_precedents({Level::cell, "c1"}, "adjust_tx_power", 0).empty());

  // c5 has no records of its own; its node n3 shares model-a with n1.
  auto via_model = store->query_precedents({Level::cell, "c5"}, "adjust_tx_power", 5);
  REQUIRE(via_model.size() == 2);
  CHECK(via_model[0].record_id == "new");
  CHECK(store->query_precedents({Level::cell, "c4"}, "adjust_tx_power", 5).empty());
  CHECK(store->query_precedents({Level::cell, "c5"}, "adjust_tilt", 5).empty());
}

TEST_CASE("precedent results match a join oracle over the inventory table") {
  auto store = make_store();
  std::mt19937_64 rng(5);
  const char* cells[] = {"c1", "c2", "c3", "c4", "c5"};
  const char* kinds[] = {"adjust_tx_power", "adjust_tilt"};
  for (int i = 0; i < 60; ++i) {
    auto r = record("r" + std::to_string(i), static_cast<Timestamp>(rng() % 1000), cells[rng() % 5]);
    r.action_kind = kinds[rng() % 2];
    store->record_optimization(r);
  }
  const auto all = store->optimizations();
  const auto inventory = store->inventory_all();
  auto model_of = [&](const std::string& cell) {
    const auto& node = store->topology()->cell(cell).node;
    for (const auto& im : inventory) {
      if (im.element_id == node) return im.hardware_model;
    }
    return std::string();
  };
  for (const char* target : cells) {
    for (const char* kind : kinds) {
      for (std::size_t limit : {0u, 1u, 3u, 100u}) {
        std::vector<OptimizationRecord> exact, joined;
        for (const auto& r : all) {
          if (r.action_kind != kind) continue;
          if (r.target.id == target) exact.push_back(r);
          else if (model_of(r.target.id) == model_of(target)) joined.push_back(r);
        }
        auto newest = [](const OptimizationRecord& a, const OptimizationRecord& b) {
          return a.created_at != b.created_at ? a.created_at > b.created_at : a.record_id > b.record_id;
        };
        std::sort(exact.begin(), exact.end(), newest);
        std::sort(joined.begin(), joined.end(), newest);
        exact.insert(exact.end(), joined.begin(), joined.end());
        if (exact.size() > limit) exact.resize(limit);
        CHECK(store->query_precedents({Level::cell, target}, kind, limit) == exact);
      }
    }
  }
}

TEST_CASE("alarms are scoped through the hierarchy") {
  auto store = make_store();
  std::vector<sim::FmAlarm> alarms{{{Level::cell, "c2"}, 900, "RF_DEGRADED", sim::Severity::major},
                                   {{Level::node, "n2"}, 1800, "HW_FAULT", sim::Severity::critical},
                                   {{Level::cell, "c2"}, 900, "RF_DEGRADED", sim::Severity::major}};
  store->ingest_fm(alarms);
  CHECK(store->query_alarms(0, 10000).size() == 2);
  CHECK(store->query_alarms(0, 10000, ElementRef{Level::node, "n1"}).size() == 1);
  CHECK(store->query_alarms(0, 10000, ElementRef{Level::cell, "c4"}).size() == 1);
  CHECK(store->query_alarms(1000, 10000, ElementRef{Level::cell, "c2"}).empty());
}

TEST_CASE("inventory defaults to the topology and is one record per node") {
  auto store = make_store();
  CHECK(store->inventory_all().size() == 3);
  CHECK(store->inventory_for({Level::cell, "c5"})->hardware_model == "model-a");
  CHECK_THROWS_AS(store->put_inventory({"c1", "v", "m", "1", 0}), Error);
  store->put_inventory({"n2", "v2", "model-a", "2", 5});
  CHECK(store->inventory("n2")->vendor == "v2");
}

TEST_CASE("directory store replays every table and ignores a torn tail") {
  TempDir dir;
  {
    auto store = Store::open(dir.path);
    store->set_topology(small_topology(), 900);
    store->ingest_pm(ramp("c1", kpi::dl_throughput, 10, 1.0 / 3.0));
    store->ingest_fm(std::vector<sim::FmAlarm>{{{Level::cell, "c1"}, 0, "X", sim::Severity::minor}});
    store->record_optimization(record("r1", 10, "c1"));
    store->snapshot_config(sim::Simulation(small_topology(), [] {
                             auto s = sim::base_scenario("p", 1, 4);
                             s.topology = small_topology()->spec();
                             return s;
                           }()).configs(),
                           0);
    store->put_inventory({"n2", "v2", "model-z", "2", 0});
  }
  {
    std::ofstream torn(dir.path / "optimizations.jsonl", std::ios::app);
    torn << "{\"record_id\":\"half";
  }
  auto store = Store::open(dir.path);
  CHECK(store->topology() != nullptr);
  CHECK(store->pm_sample_count() == 10);
  KpiSelector sel{Level::cell, std::vector<std::string>{"c1"}, {std::string(kpi::dl_throughput)}, 0, 900, {}};
  CHECK(store->query_kpi(sel).begin()->second[0].value == 1.0 / 3.0);
  CHECK(store->query_alarms(0, 900).size() == 1);
  CHECK(store->optimizations().size() == 1);
  CHECK(store->snapshot("snap-0001").has_value());
  CHECK(store->inventory("n2")->hardware_model == "model-z");
  CHECK(store->snapshot_config(store->snapshot("snap-0001")->entries, 5).snapshot_id == "snap-0002");
}

TEST_CASE("CSV export and import round-trip through the sample format") {
  auto store = make_store();
  store->ingest_pm(ramp("c2", kpi::rrc_setup_success, 20, 80.0));
  const auto csv = store->export_pm_csv();
  CHECK(csv.rfind(std::string(sim::kCsvHeader), 0) == 0);
  auto other = make_store();
  CHECK(other->import_pm_csv(csv) == 20);
  CHECK(other->export_pm_csv() == csv);
  auto clone = store->clone();
  CHECK(clone->export_pm_csv() == csv);
  CHECK_THROWS_AS(other->import_pm_csv("1,c1,cell,dl_throughput_mbps\n"), Error);
}
