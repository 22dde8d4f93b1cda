#include "ranagent/tsa/aggregate.hpp"

#include <array>

#include "ranagent/core/errors.hpp"

namespace ranagent::tsa {

namespace {

const std::array<AggregationRule, 5> kRules{{
    {std::string(kpi::dl_throughput), AggregationMethod::sum},
    {std::string(kpi::prb_utilization), AggregationMethod::arithmetic_mean},
    {std::string(kpi::rrc_setup_success), AggregationMethod::traffic_weighted_mean},
    {std::string(kpi::ho_success), AggregationMethod::traffic_weighted_mean},
    {std::string(kpi::call_drop), AggregationMethod::traffic_weighted_mean},
}};

void require_sorted(const Series& s, const std::string& cell) {
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].t <= s[i - 1].t) {
      throw Error(Errc::mismatched_timestamps, "series of '" + cell + "' is not strictly ascending", cell);
    }
  }
}

struct Accumulator {
  double sum = 0.0;
  double weighted = 0.0;
  double weight = 0.0;
  int count = 0;
};

}  // namespace

std::string_view to_string(AggregationMethod method) {
  switch (method) {
    case AggregationMethod::traffic_weighted_mean: return "traffic_weighted_mean";
    case AggregationMethod::arithmetic_mean: return "arithmetic_mean";
    case AggregationMethod::sum: return "sum";
  }
  return "sum";
}

std::span<const AggregationRule> default_rules() { return kRules; }

const AggregationRule& rule_for(std::string_view kpi_name) {
  for (const auto& r : kRules) {
    if (r.kpi == kpi_name) return r;
  }
  throw Error(Errc::unknown_kpi, "no aggregation rule for KPI '" + std::string(kpi_name) + "'",
              std::string(kpi_name));
}

std::map<std::string, Series> aggregate_series(const std::map<std::string, Series>& cell_series,
                                               const AggregationRule& rule, Level grouping,
                                               const sim::NetworkTopology& topology,
                                               const std::map<std::string, Series>* weights,
                                               std::span<const std::string> groups) {
  const bool weighted = rule.method == AggregationMethod::traffic_weighted_mean;
  if (weighted && weights == nullptr) {
    throw Error(Errc::invalid_argument, "traffic_weighted_mean needs traffic weights", rule.kpi);
  }

  std::map<std::string, std::map<Timestamp, Accumulator>> acc;
  for (const auto& g : groups) {
    topology.require({grouping, g});
    acc[g];
  }
  for (const auto& [cell, series] : cell_series) {
    require_sorted(series, cell);
    const std::string& group = topology.group_of(cell, grouping);
    auto slot = acc.find(group);
    if (slot == acc.end()) {
      if (!groups.empty()) continue;
      slot = acc.emplace(group, std::map<Timestamp, Accumulator>{}).first;
    }

    const Series* w = nullptr;
    if (weighted) {
      auto it = weights->find(cell);
      if (it == weights->end()) {
        throw Error(Errc::mismatched_timestamps, "no traffic weights for cell '" + cell + "'", cell);
      }
      w = &it->second;
      require_sorted(*w, cell);
    }
    std::size_t wi = 0;
    for (const auto& p : series) {
      Accumulator& a = slot->second[p.t];
      a.sum += p.value;
      ++a.count;
      if (w) {
        while (wi < w->size() && (*w)[wi].t < p.t) ++wi;
        if (wi == w->size() || (*w)[wi].t != p.t) {
          throw Error(Errc::mismatched_timestamps,
                      "weight series of '" + cell + "' has no sample at " + std::to_string(p.t), cell);
        }
        a.weighted += p.value * (*w)[wi].value;
        a.weight += (*w)[wi].value;
      }
    }
  }

  std::map<std::string, Series> out;
  for (const auto& [group, by_time] : acc) {
    if (by_time.empty()) {
      throw Error(Errc::empty_group, "no cell series for " + std::string(to_string(grouping)) + " '" + group + "'",
                  group);
    }
    Series& s = out[group];
    s.reserve(by_time.size());
    for (const auto& [t, a] : by_time) {
      double v = 0.0;
      switch (rule.method) {
        case AggregationMethod::sum:
          v = a.sum;
          break;
        case AggregationMethod::arithmetic_mean:
          v = a.sum / a.count;
          break;
        case AggregationMethod::traffic_weighted_mean:
          v = a.weight > 0.0 ? a.weighted / a.weight : a.sum / a.count;
          break;
      }
      s.push_back({t, v});
    }
  }
  return out;
}

}  // namespace ranagent::tsa
