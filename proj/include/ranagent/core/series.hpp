#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "ranagent/core/domain.hpp"

namespace ranagent {

struct Point {
  Timestamp t = 0;
  double value = 0.0;

  bool operator==(const Point&) const = default;
};

// Time-ordered samples of one (element, KPI) pair.
using Series = std::vector<Point>;

struct SeriesKey {
  std::string element_id;
  std::string kpi;

  auto operator<=>(const SeriesKey&) const = default;
};

using SeriesMap = std::map<SeriesKey, Series>;

std::vector<double> values_of(const Series& series);

}  // namespace ranagent
