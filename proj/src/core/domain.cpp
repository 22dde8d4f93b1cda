#include "ranagent/core/domain.hpp"

#include <algorithm>

#include "ranagent/core/errors.hpp"

namespace ranagent {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::cell: return "cell";
    case Level::band: return "band";
    case Level::sector: return "sector";
    case Level::node: return "node";
    case Level::region: return "region";
    case Level::cluster: return "cluster";
  }
  return "cell";
}

std::optional<Level> parse_level(std::string_view text) {
  for (Level level : kAllLevels) {
    if (to_string(level) == text) return level;
  }
  return std::nullopt;
}

Level level_from_string(std::string_view text) {
  if (auto level = parse_level(text)) return *level;
  throw Error(Errc::invalid_argument, "unknown hierarchy level '" + std::string(text) + "'");
}

std::string to_string(const ElementRef& ref) {
  return std::string(to_string(ref.level)) + ":" + ref.id;
}

namespace {

constexpr std::array<KpiInfo, 5> kDefaultKpis{{
    {kpi::dl_throughput, KpiDomain::non_negative, Polarity::higher_is_better},
    {kpi::prb_utilization, KpiDomain::percent, Polarity::lower_is_better},
    {kpi::rrc_setup_success, KpiDomain::percent, Polarity::higher_is_better},
    {kpi::ho_success, KpiDomain::percent, Polarity::higher_is_better},
    {kpi::call_drop, KpiDomain::percent, Polarity::lower_is_better},
}};

}  // namespace

std::span<const KpiInfo> default_kpis() { return kDefaultKpis; }

const KpiInfo* find_kpi(std::string_view name) {
  auto it = std::find_if(kDefaultKpis.begin(), kDefaultKpis.end(),
                         [&](const KpiInfo& k) { return k.name == name; });
  return it == kDefaultKpis.end() ? nullptr : &*it;
}

bool is_known_kpi(std::string_view name) { return find_kpi(name) != nullptr; }

double clamp_to_domain(const KpiInfo& info, double value) {
  if (info.domain == KpiDomain::percent) return std::clamp(value, 0.0, 100.0);
  return std::max(value, 0.0);
}

bool within_domain(const KpiInfo& info, double value) {
  if (info.domain == KpiDomain::percent) return value >= 0.0 && value <= 100.0;
  return value >= 0.0;
}

bool is_known_parameter(std::string_view name) {
  return name == param::tx_power || name == param::tilt || name == param::ho_offset;
}

}  // namespace ranagent
