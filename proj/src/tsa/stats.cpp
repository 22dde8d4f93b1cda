#include "ranagent/tsa/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ranagent::tsa {

namespace {

double median_in_place(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

double median(std::span<const double> values) {
  std::vector<double> copy(values.begin(), values.end());
  return median_in_place(copy);
}

double mad(std::span<const double> values, double center) {
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - center));
  return median_in_place(dev);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double mad_floor(double median_value) { return 1e-9 * std::abs(median_value) + 1e-12; }

double robust_sigma(std::span<const double> values) {
  if (values.size() < 3) return 0.0;
  std::vector<double> diffs;
  diffs.reserve(values.size() - 1);
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = values[i] - values[i - 1];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.size() < 2) return 0.0;
  const double center = median(diffs);
  return kMadScale * mad(diffs, center) / std::sqrt(2.0);
}

}  // namespace ranagent::tsa
