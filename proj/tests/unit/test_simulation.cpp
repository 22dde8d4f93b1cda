#include <doctest.h>

#include <cmath>
#include <map>

#include "ranagent/core/errors.hpp"
#include "ranagent/sim/simulation.hpp"
#include "ranagent/sim/suites.hpp"

using namespace ranagent;
using namespace ranagent::sim;

namespace {

ScenarioSpec flat_scenario(std::int64_t horizon, double sigma) {
  ScenarioSpec spec = base_scenario("flat", 7, horizon);
  for (auto& [name, b] : spec.baseline) {
    b.diurnal_amplitude = 0.0;
    b.noise_sigma = sigma;
  }
  spec.baseline[std::string(kpi::dl_throughput)].mean = 100.0;
  return spec;
}

using SeriesMap = std::map<std::pair<std::string, std::string>, std::vector<double>>;

SeriesMap by_series(const std::vector<KpiSample>& samples) {
  SeriesMap out;
  for (const auto& s : samples) out[{s.element_id, s.kpi}].push_back(s.value);
  return out;
}

ScenarioEvent throughput_step(const std::string& cell, std::int64_t interval, double delta) {
  ScenarioEvent e;
  e.kind = EventKind::step_shift;
  e.target = {Level::cell, cell};
  e.kpi = std::string(kpi::dl_throughput);
  e.onset = interval * kDefaultIntervalSeconds;
  e.magnitude = delta;
  return e;
}

}  // namespace

TEST_CASE("zero noise, no events, flat baseline gives the mean everywhere") {
  auto spec = flat_scenario(96, 0.0);
  auto topo = build_topology(spec.topology);
  auto samples = generate_stream(topo, spec);
  CHECK(samples.size() == 96 * 20 * 5);
  for (const auto& s : samples) {
    if (s.kpi == kpi::dl_throughput) CHECK(s.value == 100.0);
  }
}

TEST_CASE("one simulated day at 900 s cadence has timestamps 0..85500") {
  auto spec = flat_scenario(96, 1.0);
  auto topo = build_topology(spec.topology);
  auto samples = generate_stream(topo, spec);
  std::vector<Timestamp> c1;
  for (const auto& s : samples) {
    if (s.element_id == "c1" && s.kpi == kpi::dl_throughput) c1.push_back(s.timestamp);
  }
  REQUIRE(c1.size() == 96);
  CHECK(c1.front() == 0);
  CHECK(c1.back() == 85500);
  for (std::size_t i = 1; i < c1.size(); ++i) CHECK(c1[i] - c1[i - 1] == 900);
}

TEST_CASE("step shift moves only the target cell, by exactly its magnitude") {
  auto quiet = flat_scenario(96, 0.0);
  quiet.events.push_back(throughput_step("c1", 50, -30.0));
  auto topo = build_topology(quiet.topology);
  auto zero_noise = by_series(generate_stream(topo, quiet));
  for (std::size_t i = 0; i < 96; ++i) {
    const double v = zero_noise[{"c1", std::string(kpi::dl_throughput)}][i];
    CHECK(v == doctest::Approx(i >= 50 ? 70.0 : 100.0));
  }

  auto noisy = flat_scenario(96, 2.0);
  auto baseline = by_series(generate_stream(topo, noisy));
  noisy.events.push_back(throughput_step("c1", 50, -30.0));
  auto shifted = by_series(generate_stream(topo, noisy));
  const auto key = std::pair{std::string("c1"), std::string(kpi::dl_throughput)};
  for (std::size_t i = 0; i < 96; ++i) {
    CHECK(shifted[key][i] - baseline[key][i] == doctest::Approx(i >= 50 ? -30.0 : 0.0).epsilon(1e-9));
    if (i >= 50) CHECK(shifted[key][i] < 70.0 + 8.0 * 2.0);
  }
  CHECK(shifted[{"c2", std::string(kpi::dl_throughput)}] == baseline[{"c2", std::string(kpi::dl_throughput)}]);
}

TEST_CASE("determinism: equal inputs give bit-identical streams and alarms") {
  auto spec = hardware_fault_case(11, "c6", 192).scenario;
  auto topo = build_topology(spec.topology);
  CHECK(generate_stream(topo, spec) == generate_stream(topo, spec));
  CHECK(emit_fm_alarms(spec) == emit_fm_alarms(spec));
}

TEST_CASE("locality: a cell event leaves every other cell bit-identical") {
  auto spec = base_scenario("loc", 3, 192);
  auto topo = build_topology(spec.topology);
  auto clean = by_series(generate_stream(topo, spec));
  spec.events.push_back(throughput_step("c5", 60, -20.0));
  auto with_event = by_series(generate_stream(topo, spec));
  for (const auto& [key, values] : clean) {
    if (key.first == "c5" && key.second == kpi::dl_throughput) continue;
    CHECK(with_event[key] == values);
  }
}

TEST_CASE("superposition: deltas of {A,B} equal the sum of deltas of {A} and {B}") {
  auto base = base_scenario("sup", 5, 192);
  auto topo = build_topology(base.topology);
  ScenarioEvent a = throughput_step("c1", 40, -15.0);
  ScenarioEvent b;
  b.kind = EventKind::linear_drift;
  b.target = {Level::node, "n1"};
  b.kpi = std::string(kpi::dl_throughput);
  b.onset = 100 * kDefaultIntervalSeconds;
  b.magnitude = 12.0;
  b.duration = 20;
  ScenarioEvent c;
  c.kind = EventKind::transient_spike;
  c.target = {Level::band, "n78"};
  c.kpi = std::string(kpi::dl_throughput);
  c.onset = 70 * kDefaultIntervalSeconds;
  c.magnitude = 9.0;
  c.duration = 4;

  auto run = [&](std::vector<ScenarioEvent> events) {
    auto spec = base;
    spec.events = std::move(events);
    return by_series(generate_stream(topo, spec));
  };
  auto none = run({});
  for (const auto& [first, second] : {std::pair{a, b}, std::pair{a, c}, std::pair{b, c}}) {
    auto only_a = run({first});
    auto only_b = run({second});
    auto both = run({first, second});
    for (const auto& [key, values] : none) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double expected = (only_a[key][i] - values[i]) + (only_b[key][i] - values[i]);
        CHECK(both[key][i] - values[i] == doctest::Approx(expected).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("spike and drift shapes") {
  auto spec = flat_scenario(40, 0.0);
  ScenarioEvent spike = throughput_step("c1", 10, 20.0);
  spike.kind = EventKind::transient_spike;
  spike.duration = 3;
  ScenarioEvent drift = throughput_step("c2", 10, -8.0);
  drift.kind = EventKind::linear_drift;
  drift.duration = 4;
  spec.events = {spike, drift};
  auto topo = build_topology(spec.topology);
  auto series = by_series(generate_stream(topo, spec));
  const auto& s1 = series[{"c1", std::string(kpi::dl_throughput)}];
  const auto& s2 = series[{"c2", std::string(kpi::dl_throughput)}];
  CHECK(s1[9] == 100.0);
  CHECK(s1[10] == 120.0);
  CHECK(s1[12] == 120.0);
  CHECK(s1[13] == 100.0);
  CHECK(s2[10] == doctest::Approx(100.0));
  CHECK(s2[12] == doctest::Approx(96.0));
  CHECK(s2[14] == doctest::Approx(92.0));
  CHECK(s2[30] == doctest::Approx(92.0));
}

TEST_CASE("reverting a config change cancels its KPI effect exactly") {
  auto spec = base_scenario("revert", 21, 200);
  ScenarioEvent change;
  change.kind = EventKind::config_change;
  change.target = {Level::cell, "c3"};
  change.onset = 100 * kDefaultIntervalSeconds;
  change.parameter = std::string(param::tilt);
  change.value = 8.0;
  change.effects = {KpiEffect{std::string(kpi::dl_throughput), -30.0, MagnitudeUnit::absolute}};
  spec.events.push_back(change);
  auto topo = std::make_shared<const NetworkTopology>(build_topology(spec.topology));

  Simulation sim(topo, spec);
  sim.advance(150);
  REQUIRE(sim.cm_log().size() == 1);
  CHECK(sim.cm_log()[0].old_value == 4.0);
  CHECK(sim.config("c3").config_version == 2);
  auto cm = sim.apply_config("c3", param::tilt, 4.0);
  REQUIRE(cm.has_value());
  CHECK(cm->timestamp == 150 * kDefaultIntervalSeconds);
  auto after = sim.advance(50);

  auto clean = base_scenario("revert", 21, 200);
  auto reference = generate_stream(*topo, clean);
  const double sigma = spec.baseline.at(std::string(kpi::dl_throughput)).noise_sigma;
  double post = 0.0;
  double ref = 0.0;
  int n = 0;
  for (const auto& s : after) {
    if (s.element_id != "c3" || s.kpi != kpi::dl_throughput) continue;
    post += s.value;
    ++n;
  }
  for (const auto& s : reference) {
    if (s.element_id == "c3" && s.kpi == kpi::dl_throughput && s.timestamp >= 150 * 900) ref += s.value;
  }
  REQUIRE(n == 50);
  CHECK(std::abs(post / n - ref / n) <= sigma);
  CHECK(post / n == doctest::Approx(ref / n).epsilon(1e-12));
}

TEST_CASE("identity config change leaves the stream unchanged") {
  auto spec = base_scenario("identity", 4, 60);
  auto topo = std::make_shared<const NetworkTopology>(build_topology(spec.topology));
  Simulation a(topo, spec);
  Simulation b(topo, spec);
  a.advance(20);
  b.advance(20);
  CHECK_FALSE(b.apply_config("c1", param::tx_power, b.config("c1").tx_power_dbm).has_value());
  CHECK(b.config("c1").config_version == 1);
  CHECK(a.advance(40) == b.advance(40));
}

TEST_CASE("out-of-bounds change is rejected and leaves state unchanged") {
  auto spec = base_scenario("bounds", 4, 10);
  auto topo = std::make_shared<const NetworkTopology>(build_topology(spec.topology));
  Simulation sim(topo, spec);
  sim.advance(5);
  const auto before = sim.configs();
  try {
    sim.apply_config("c1", param::tx_power, topo->bounds().tx_power_dbm.max + 1.0);
    FAIL("expected out_of_bounds");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::out_of_bounds);
  }
  CHECK(sim.cm_log().empty());
  for (const auto& [cell, cfg] : before) {
    CHECK(sim.config(cell).same_values(cfg));
    CHECK(sim.config(cell).config_version == cfg.config_version);
  }
}

TEST_CASE("scripted action effect binds to the configured value") {
  auto spec = scripted_action_scenario(9, -30.0, 120);
  auto topo = std::make_shared<const NetworkTopology>(build_topology(spec.topology));
  Simulation sim(topo, spec);
  sim.advance(100);
  const double before = sim.sample_value("c7", kpi::dl_throughput, 100);
  sim.apply_config("c7", param::tx_power, 44.0);
  CHECK(sim.sample_value("c7", kpi::dl_throughput, 100) == doctest::Approx(before - 36.0));
  sim.apply_config("c7", param::tx_power, 43.0);
  CHECK(sim.sample_value("c7", kpi::dl_throughput, 100) == doctest::Approx(before));
}

TEST_CASE("fm alarms") {
  auto spec = base_scenario("alarms", 1, 96);
  CHECK(emit_fm_alarms(spec).empty());

  ScenarioEvent late;
  late.kind = EventKind::fm_alarm;
  late.target = {Level::node, "n1"};
  late.onset = 60 * 900;
  late.alarm_code = "LINK_DOWN";
  ScenarioEvent early = late;
  early.onset = 50 * 900;
  early.alarm_code = "RU_TX_FAULT";
  spec.events = {late, early};
  auto alarms = emit_fm_alarms(spec);
  REQUIRE(alarms.size() == 2);
  CHECK(alarms[0].element == ElementRef{Level::node, "n1"});
  CHECK(alarms[0].timestamp == 45000);
  CHECK(alarms[0].code == "RU_TX_FAULT");
  CHECK(alarms[1].timestamp == 54000);
}

TEST_CASE("scenario validation errors") {
  auto spec = base_scenario("bad", 1, 96);
  auto topo = build_topology(spec.topology);
  auto bad_target = spec;
  bad_target.events.push_back(throughput_step("c99", 10, 1.0));
  CHECK_THROWS_AS(generate_stream(topo, bad_target), Error);

  auto no_baseline = spec;
  no_baseline.baseline.erase(std::string(kpi::call_drop));
  try {
    generate_stream(topo, no_baseline);
    FAIL("expected unknown_kpi");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_kpi);
  }

  auto late = spec;
  late.events.push_back(throughput_step("c1", 96, 1.0));
  CHECK_THROWS_AS(generate_stream(topo, late), Error);
}

TEST_CASE("scenario JSON and CSV round trips") {
  auto spec = hardware_fault_case(3, "c2", 96).scenario;
  spec.action_effects.push_back({"c1", std::string(param::tx_power), 44.0, {{"dl_throughput_mbps", 5.0, MagnitudeUnit::absolute}}});
  auto back = scenario_from_json(to_json(spec));
  CHECK(canonical_dump(to_json(back)) == canonical_dump(to_json(spec)));

  auto topo = build_topology(spec.topology);
  for (const auto& s : generate_stream(topo, spec)) {
    auto parsed = sample_from_csv_line(to_csv_line(s));
    CHECK(parsed.element_id == s.element_id);
    CHECK(parsed.timestamp == s.timestamp);
    CHECK(std::abs(parsed.value - s.value) <= 5e-7);
    CHECK(to_csv_line(parsed) == to_csv_line(s));
  }
  CHECK(to_csv_line(KpiSample{"c1", Level::cell, "dl_throughput_mbps", 900, 1.5}) ==
        "900,c1,cell,dl_throughput_mbps,1.500000");
}
