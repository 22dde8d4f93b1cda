#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ranagent/core/series.hpp"
#include "ranagent/tsa/changepoint.hpp"

namespace ranagent::tsa {

struct AnomalyParams {
  double threshold = 6.0;  // robust-z units
  int window = 96;         // trailing intervals, current sample excluded
};

struct AnomalyFlag {
  std::string element_id;
  Level level = Level::cell;
  std::string kpi;
  Timestamp timestamp = 0;
  double robust_z = 0.0;
  double value = 0.0;
  double median = 0.0;  // trailing-window median
};

// Robust z of each sample against the median/MAD of the `window` samples
// before it; samples with fewer than `window` predecessors are not scored.
// A zero MAD is replaced by mad_floor(median).
//
// A sustained shift flags at most the samples before the rolling median
// catches up (under half a window); change points own sustained shifts.
//
// Errors: Error(invalid_argument) for window < 12 or threshold <= 0;
// Error(series_too_short) when size < window.
std::vector<AnomalyFlag> detect_anomalies(const Series& series, const AnomalyParams& params = {},
                                          const SeriesId& id = {});

struct RobustScore {
  double z = 0.0;
  double median = 0.0;
};

// Robust z of every scored sample (index >= window), in order.
std::vector<RobustScore> robust_z_scores(const std::vector<double>& values, int window);

}  // namespace ranagent::tsa
