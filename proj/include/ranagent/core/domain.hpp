#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace ranagent {

// Seconds since scenario epoch.
using Timestamp = std::int64_t;

inline constexpr Timestamp kDaySeconds = 86400;
inline constexpr Timestamp kDefaultIntervalSeconds = 900;

// Hierarchy levels ordered by closeness to the cell.
enum class Level : int { cell = 0, band = 1, sector = 2, node = 3, region = 4, cluster = 5 };

inline constexpr std::array<Level, 6> kAllLevels{Level::cell,   Level::band,   Level::sector,
                                                 Level::node,   Level::region, Level::cluster};

std::string_view to_string(Level level);
std::optional<Level> parse_level(std::string_view text);
Level level_from_string(std::string_view text);  // throws Error(invalid_argument)

struct ElementRef {
  Level level = Level::cell;
  std::string id;

  auto operator<=>(const ElementRef&) const = default;
};

std::string to_string(const ElementRef& ref);  // "<level>:<id>"

// Default KPI vocabulary.
namespace kpi {
inline constexpr std::string_view dl_throughput = "dl_throughput_mbps";
inline constexpr std::string_view prb_utilization = "prb_utilization_pct";
inline constexpr std::string_view rrc_setup_success = "rrc_setup_success_rate_pct";
inline constexpr std::string_view ho_success = "ho_success_rate_pct";
inline constexpr std::string_view call_drop = "call_drop_rate_pct";
}  // namespace kpi

enum class KpiDomain { percent, non_negative };
enum class Polarity { higher_is_better, lower_is_better };

struct KpiInfo {
  std::string_view name;
  KpiDomain domain;
  Polarity polarity;
};

std::span<const KpiInfo> default_kpis();
const KpiInfo* find_kpi(std::string_view name);
bool is_known_kpi(std::string_view name);

// Clamps a value into the KPI's admissible range.
double clamp_to_domain(const KpiInfo& info, double value);
bool within_domain(const KpiInfo& info, double value);

// Tunable CM parameters of a cell.
namespace param {
inline constexpr std::string_view tx_power = "tx_power_dbm";
inline constexpr std::string_view tilt = "electrical_tilt_deg";
inline constexpr std::string_view ho_offset = "handover_offset_db";
}  // namespace param

bool is_known_parameter(std::string_view name);

}  // namespace ranagent
