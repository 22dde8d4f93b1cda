#include <doctest.h>

#include "fixtures.hpp"
#include "ranagent/core/errors.hpp"
#include "ranagent/sim/suites.hpp"
#include "ranagent/tsa/aggregate.hpp"

using namespace ranagent;
using namespace ranagent::tsa;

namespace {

sim::NetworkTopology two_cell_node() {
  sim::TopologySpec spec;
  spec.bands = {"b1"};
  spec.sectors = {"s1"};
  spec.clusters = {"k1"};
  spec.regions = {{"r1", "k1"}};
  spec.nodes = {{"n1", "r1", {}}, {"n2", "r1", {}}};
  spec.cells = {{"c1", "n1", "b1", "s1", {}}, {"c2", "n1", "b1", "s1", {}}, {"c3", "n2", "b1", "s1", {}}};
  return sim::build_topology(spec);
}

Series flat(double v, int n = 3) {
  Series s;
  for (int i = 0; i < n; ++i) s.push_back({i * 900, v});
  return s;
}

}  // namespace

TEST_CASE("every default KPI has exactly one rule") {
  for (const auto& info : default_kpis()) {
    int count = 0;
    for (const auto& r : default_rules()) count += r.kpi == info.name;
    CHECK(count == 1);
  }
  CHECK(rule_for(kpi::dl_throughput).method == AggregationMethod::sum);
  CHECK_THROWS_AS(rule_for("latency_ms"), Error);
}

TEST_CASE("aggregation examples") {
  auto topo = two_cell_node();
  std::map<std::string, Series> cells{{"c1", flat(10)}, {"c2", flat(20)}};
  std::map<std::string, Series> equal{{"c1", flat(1)}, {"c2", flat(1)}};
  std::map<std::string, Series> skewed{{"c1", flat(1)}, {"c2", flat(3)}};
  const AggregationRule weighted{"rrc_setup_success_rate_pct", AggregationMethod::traffic_weighted_mean};
  const AggregationRule sum{"dl_throughput_mbps", AggregationMethod::sum};

  CHECK(aggregate_series(cells, weighted, Level::node, topo, &equal).at("n1")[0].value == doctest::Approx(15.0));
  CHECK(aggregate_series(cells, sum, Level::node, topo).at("n1")[0].value == doctest::Approx(30.0));
  CHECK(aggregate_series(cells, weighted, Level::node, topo, &skewed).at("n1")[0].value == doctest::Approx(17.5));

  std::map<std::string, Series> zero{{"c1", flat(0)}, {"c2", flat(0)}};
  CHECK(aggregate_series(cells, weighted, Level::node, topo, &zero).at("n1")[0].value == doctest::Approx(15.0));
}

TEST_CASE("weighted mean matches a brute-force oracle on random data") {
  auto topo = sim::build_topology(sim::standard_topology());
  std::map<std::string, Series> values;
  std::map<std::string, Series> weights;
  for (int c = 1; c <= 20; ++c) {
    const std::string cell = "c" + std::to_string(c);
    for (int i = 0; i < 10; ++i) {
      values[cell].push_back({i * 900, 90.0 + 10.0 * std::abs(fixtures::gaussian(c, i))});
      weights[cell].push_back({i * 900, 5.0 + 40.0 * std::abs(fixtures::gaussian(100 + c, i))});
    }
  }
  const AggregationRule rule{"ho_success_rate_pct", AggregationMethod::traffic_weighted_mean};
  for (Level level : {Level::band, Level::node, Level::region, Level::cluster}) {
    auto out = aggregate_series(values, rule, level, topo, &weights);
    for (const auto& [group, series] : out) {
      for (int i = 0; i < 10; ++i) {
        double num = 0.0;
        double den = 0.0;
        for (const auto& cell : topo.member_cells({level, group})) {
          num += values[cell][i].value * weights[cell][i].value;
          den += weights[cell][i].value;
        }
        CHECK(series[static_cast<std::size_t>(i)].value == doctest::Approx(num / den).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("missing cell sample excludes that cell from the timestamp") {
  auto topo = two_cell_node();
  std::map<std::string, Series> cells{{"c1", flat(10)}, {"c2", {{0, 20}, {1800, 20}}}};
  auto out = aggregate_series(cells, {"prb_utilization_pct", AggregationMethod::arithmetic_mean}, Level::node, topo);
  REQUIRE(out.at("n1").size() == 3);
  CHECK(out.at("n1")[0].value == doctest::Approx(15.0));
  CHECK(out.at("n1")[1].value == doctest::Approx(10.0));
}

TEST_CASE("aggregation errors") {
  auto topo = two_cell_node();
  std::map<std::string, Series> cells{{"c1", flat(10)}};
  const std::vector<std::string> wanted{"n2"};
  try {
    aggregate_series(cells, {"dl_throughput_mbps", AggregationMethod::sum}, Level::node, topo, nullptr, wanted);
    FAIL("expected empty group");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_group);
  }
  std::map<std::string, Series> short_weights{{"c1", {{0, 1.0}}}};
  try {
    aggregate_series(cells, {"call_drop_rate_pct", AggregationMethod::traffic_weighted_mean}, Level::node, topo,
                     &short_weights);
    FAIL("expected mismatched timestamps");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::mismatched_timestamps);
  }
  std::map<std::string, Series> unsorted{{"c1", {{900, 1.0}, {0, 2.0}}}};
  CHECK_THROWS_AS(aggregate_series(unsorted, {"dl_throughput_mbps", AggregationMethod::sum}, Level::node, topo),
                  Error);
}

TEST_CASE("sum rule: disjoint groups add up to their union") {
  auto topo = sim::build_topology(sim::standard_topology());
  std::map<std::string, Series> values;
  for (int c = 1; c <= 20; ++c) {
    for (int i = 0; i < 6; ++i) values["c" + std::to_string(c)].push_back({i * 900, 100 + 5 * fixtures::gaussian(c, i)});
  }
  const AggregationRule sum{"dl_throughput_mbps", AggregationMethod::sum};
  auto nodes = aggregate_series(values, sum, Level::node, topo);
  auto regions = aggregate_series(values, sum, Level::region, topo);
  auto bands = aggregate_series(values, sum, Level::band, topo);
  auto cluster = aggregate_series(values, sum, Level::cluster, topo);
  for (std::size_t i = 0; i < 6; ++i) {
    double node_total = 0.0;
    for (const auto& [_, s] : nodes) node_total += s[i].value;
    double band_total = 0.0;
    for (const auto& [_, s] : bands) band_total += s[i].value;
    const double r1 = nodes["n1"][i].value + nodes["n2"][i].value + nodes["n3"][i].value;
    CHECK(regions["r1"][i].value == doctest::Approx(r1).epsilon(1e-12));
    CHECK(cluster["k1"][i].value == doctest::Approx(node_total).epsilon(1e-12));
    CHECK(cluster["k1"][i].value == doctest::Approx(band_total).epsilon(1e-12));
  }
}
