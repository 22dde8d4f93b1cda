#include "ranagent/core/series.hpp"

namespace ranagent {

std::vector<double> values_of(const Series& series) {
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& p : series) out.push_back(p.value);
  return out;
}

}  // namespace ranagent
