#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ranagent/core/series.hpp"
#include "ranagent/sim/simulation.hpp"

namespace fixtures {

// Portable seeded standard normal draws.
inline double gaussian(std::uint64_t seed, std::int64_t index) {
  return ranagent::sim::noise_draw(seed, "fixture", "noise", index);
}

inline ranagent::Series make_series(const std::vector<double>& values, ranagent::Timestamp step = 900) {
  ranagent::Series s;
  for (std::size_t i = 0; i < values.size(); ++i) s.push_back({static_cast<ranagent::Timestamp>(i) * step, values[i]});
  return s;
}

inline std::vector<double> noise(std::uint64_t seed, std::size_t n, double sigma = 1.0, double mean = 0.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = mean + sigma * gaussian(seed, static_cast<std::int64_t>(i));
  return v;
}

inline void add_step(std::vector<double>& v, std::size_t at, double delta) {
  for (std::size_t i = at; i < v.size(); ++i) v[i] += delta;
}

// Brute-force single-split least-squares estimator: the split index k in
// [m, n - m] minimising the summed squared error of the two segment means.
inline std::size_t brute_force_split(const std::vector<double>& v, std::size_t m) {
  std::size_t best = m;
  double best_sse = INFINITY;
  for (std::size_t k = m; k + m <= v.size(); ++k) {
    double sse = 0.0;
    for (auto [a, b] : {std::pair{std::size_t{0}, k}, std::pair{k, v.size()}}) {
      double mean = 0.0;
      for (std::size_t i = a; i < b; ++i) mean += v[i];
      mean /= static_cast<double>(b - a);
      for (std::size_t i = a; i < b; ++i) sse += (v[i] - mean) * (v[i] - mean);
    }
    if (sse < best_sse) {
      best_sse = sse;
      best = k;
    }
  }
  return best;
}

// Median by full sort.
inline double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Rolling robust z recomputed from scratch for sample i.
inline double brute_force_robust_z(const std::vector<double>& v, std::size_t i, std::size_t window) {
  std::vector<double> w(v.begin() + static_cast<std::ptrdiff_t>(i - window), v.begin() + static_cast<std::ptrdiff_t>(i));
  const double med = sorted_median(w);
  std::vector<double> dev;
  for (double x : w) dev.push_back(std::abs(x - med));
  double mad = sorted_median(dev);
  mad = std::max(mad, 1e-9 * std::abs(med) + 1e-12);
  return (v[i] - med) / (1.4826 * mad);
}

inline ranagent::SeriesMap to_series_map(const std::vector<ranagent::sim::KpiSample>& samples) {
  ranagent::SeriesMap out;
  for (const auto& s : samples) out[{s.element_id, s.kpi}].push_back({s.timestamp, s.value});
  return out;
}

}  // namespace fixtures
