#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ranagent/core/series.hpp"

namespace ranagent::tsa {

struct PeerParams {
  double threshold = 5.0;
  // Smallest |median difference| (KPI units) worth reporting; guards against
  // near-zero MAD among tightly clustered peers.
  double min_effect = 0.0;
};

struct PeerOutlier {
  std::string element_id;
  Level level = Level::cell;
  std::string kpi;
  Timestamp window_start = 0;
  Timestamp window_end = 0;
  double outlier_score = 0.0;
  double median_difference = 0.0;  // element median minus median of peer medians
  std::string peer_group;
};

struct PeerResult {
  std::vector<PeerOutlier> outliers;  // score descending, then element id
  std::optional<std::string> warning;
};

// score = |median(element) - median(peer medians)| / (1.4826 * MAD(peer medians))
// over samples in [window_start, window_end). Fewer than 3 peers with data
// yield no outliers and a warning.
PeerResult score_peers(const std::map<std::string, Series>& peer_series, Timestamp window_start,
                       Timestamp window_end, const PeerParams& params = {}, Level level = Level::cell,
                       const std::string& kpi = {}, const std::string& peer_group = {});

}  // namespace ranagent::tsa
