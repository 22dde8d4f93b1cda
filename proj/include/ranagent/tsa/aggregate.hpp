#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ranagent/core/series.hpp"
#include "ranagent/sim/topology.hpp"

namespace ranagent::tsa {

enum class AggregationMethod { traffic_weighted_mean, arithmetic_mean, sum };

std::string_view to_string(AggregationMethod method);

struct AggregationRule {
  std::string kpi;
  AggregationMethod method = AggregationMethod::arithmetic_mean;
};

// dl_throughput sums, prb_utilization averages, the success/drop rates are
// weighted by traffic (prb_utilization of the same cell and timestamp).
std::span<const AggregationRule> default_rules();
const AggregationRule& rule_for(std::string_view kpi);  // throws Error(unknown_kpi)

inline constexpr std::string_view kTrafficWeightKpi = kpi::prb_utilization;

// Aggregates cell series into one series per element of `grouping`.
//
// `groups` lists the target elements; when empty, every element at `grouping`
// with at least one input cell is produced. A cell with no sample at a
// timestamp is left out of that timestamp's aggregate. `weights` (cell ->
// prb series) is required for traffic_weighted_mean; zero total weight falls
// back to the arithmetic mean.
//
// Errors: Error(empty_group) when a requested group has no input cells;
// Error(mismatched_timestamps) for unsorted or duplicate timestamps, or a
// weight series not covering a value timestamp.
std::map<std::string, Series> aggregate_series(const std::map<std::string, Series>& cell_series,
                                               const AggregationRule& rule, Level grouping,
                                               const sim::NetworkTopology& topology,
                                               const std::map<std::string, Series>* weights = nullptr,
                                               std::span<const std::string> groups = {});

}  // namespace ranagent::tsa
