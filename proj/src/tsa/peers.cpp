#include "ranagent/tsa/peers.hpp"

#include <algorithm>
#include <cmath>

#include "ranagent/tsa/stats.hpp"

namespace ranagent::tsa {

PeerResult score_peers(const std::map<std::string, Series>& peer_series, Timestamp window_start,
                       Timestamp window_end, const PeerParams& params, Level level, const std::string& kpi,
                       const std::string& peer_group) {
  PeerResult result;
  std::vector<std::pair<std::string, double>> medians;
  for (const auto& [element, series] : peer_series) {
    std::vector<double> in_window;
    for (const auto& p : series) {
      if (p.t >= window_start && p.t < window_end) in_window.push_back(p.value);
    }
    if (!in_window.empty()) medians.emplace_back(element, median(in_window));
  }
  if (medians.size() < 3) {
    result.warning = "peer comparison needs at least 3 peers, got " + std::to_string(medians.size());
    return result;
  }

  std::vector<double> values;
  for (const auto& [_, m] : medians) values.push_back(m);
  const double center = median(values);
  const double spread = std::max(mad(values, center), mad_floor(center));
  for (const auto& [element, m] : medians) {
    const double diff = m - center;
    const double score = std::abs(diff) / (kMadScale * spread);
    if (score < params.threshold || std::abs(diff) < params.min_effect) continue;
    result.outliers.push_back(PeerOutlier{element, level, kpi, window_start, window_end, score, diff, peer_group});
  }
  std::sort(result.outliers.begin(), result.outliers.end(), [](const PeerOutlier& a, const PeerOutlier& b) {
    if (a.outlier_score != b.outlier_score) return a.outlier_score > b.outlier_score;
    return a.element_id < b.element_id;
  });
  return result;
}

}  // namespace ranagent::tsa
