#include "ranagent/tsa/anomaly.hpp"

#include <cmath>
#include <span>

#include "ranagent/core/errors.hpp"
#include "ranagent/tsa/stats.hpp"

namespace ranagent::tsa {

std::vector<RobustScore> robust_z_scores(const std::vector<double>& values, int window) {
  const auto w = static_cast<std::size_t>(window);
  std::vector<RobustScore> out;
  if (values.size() <= w) return out;
  out.reserve(values.size() - w);
  for (std::size_t i = w; i < values.size(); ++i) {
    const std::span<const double> trailing(values.data() + (i - w), w);
    const double med = median(trailing);
    const double spread = std::max(mad(trailing, med), mad_floor(med));
    out.push_back({(values[i] - med) / (kMadScale * spread), med});
  }
  return out;
}

std::vector<AnomalyFlag> detect_anomalies(const Series& series, const AnomalyParams& params, const SeriesId& id) {
  if (params.window < 12) {
    throw Error(Errc::invalid_argument, "anomaly window must be at least 12 intervals", "window");
  }
  if (params.threshold <= 0.0) throw Error(Errc::invalid_argument, "anomaly threshold must be positive", "threshold");
  if (series.size() < static_cast<std::size_t>(params.window)) {
    throw Error(Errc::series_too_short,
                "series of " + std::to_string(series.size()) + " samples is shorter than the anomaly window",
                id.element_id);
  }
  const std::vector<double> values = values_of(series);
  const std::vector<RobustScore> z = robust_z_scores(values, params.window);
  std::vector<AnomalyFlag> flags;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (std::abs(z[j].z) < params.threshold) continue;
    const std::size_t i = j + static_cast<std::size_t>(params.window);
    flags.push_back(AnomalyFlag{id.element_id, id.level, id.kpi, series[i].t, z[j].z, values[i], z[j].median});
  }
  return flags;
}

}  // namespace ranagent::tsa
