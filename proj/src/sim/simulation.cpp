#include "ranagent/sim/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ranagent/core/errors.hpp"

namespace ranagent::sim {

namespace {

constexpr double kValueEpsilon = 1e-9;

double unit_open(std::uint64_t bits) {
  // 53 random bits mapped into (0, 1].
  return (static_cast<double>(bits >> 11) + 1.0) * (1.0 / 9007199254740992.0);
}

bool element_contains(const ElementRef& target, const CellDescriptor& cell) {
  switch (target.level) {
    case Level::cell: return target.id == cell.id;
    case Level::band: return target.id == cell.band;
    case Level::sector: return target.id == cell.sector;
    case Level::node: return target.id == cell.node;
    case Level::region: return target.id == cell.region;
    case Level::cluster: return target.id == cell.cluster;
  }
  return false;
}

}  // namespace

double noise_draw(std::uint64_t seed, std::string_view cell, std::string_view kpi, std::int64_t index) {
  const std::uint64_t stream = mix64(seed ^ fnv1a64(cell) ^ mix64(fnv1a64(kpi)));
  const auto i = static_cast<std::uint64_t>(index);
  const double u1 = unit_open(mix64(stream ^ mix64(2 * i)));
  const double u2 = unit_open(mix64(stream ^ mix64(2 * i + 1)));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Simulation::Simulation(std::shared_ptr<const NetworkTopology> topology, ScenarioSpec spec)
    : topology_(std::move(topology)), spec_(std::move(spec)) {
  validate_scenario(spec_, *topology_);
  for (const auto& c : topology_->cells()) configs_[c.id] = c.initial_config;
  for (std::size_t i = 0; i < spec_.events.size(); ++i) {
    if (spec_.events[i].kind == EventKind::config_change) pending_config_events_.push_back(i);
  }
  std::stable_sort(pending_config_events_.begin(), pending_config_events_.end(), [&](auto a, auto b) {
    return spec_.events[a].onset < spec_.events[b].onset;
  });
  for (const auto& a : spec_.action_effects) {
    bindings_.push_back(Binding{a.cell, a.parameter, a.value, 0, a.effects});
  }
}

const CellConfig& Simulation::config(const std::string& cell) const {
  auto it = configs_.find(cell);
  if (it == configs_.end()) throw Error(Errc::unknown_element, "unknown cell '" + cell + "'", cell);
  return it->second;
}

void Simulation::apply_due_events(Timestamp t) {
  while (!pending_config_events_.empty() && spec_.events[pending_config_events_.front()].onset <= t) {
    const ScenarioEvent& e = spec_.events[pending_config_events_.front()];
    pending_config_events_.erase(pending_config_events_.begin());
    CellConfig& cfg = configs_.at(e.target.id);
    const double old_value = cfg.get(e.parameter);
    if (std::abs(old_value - e.value) > kValueEpsilon) {
      cfg.set(e.parameter, e.value);
      ++cfg.config_version;
      cm_log_.push_back(CmChange{e.target.id, e.parameter, e.onset, old_value, e.value, "scenario"});
    }
    bindings_.push_back(Binding{e.target.id, e.parameter, e.value, e.onset, e.effects});
  }
}

std::optional<CmChange> Simulation::apply_config(const std::string& cell, std::string_view parameter,
                                                 double value, std::string_view source) {
  auto it = configs_.find(cell);
  if (it == configs_.end()) throw Error(Errc::unknown_element, "unknown cell '" + cell + "'", cell);
  const auto& bounds = topology_->bounds().for_parameter(parameter);
  if (value < bounds.min || value > bounds.max) {
    throw Error(Errc::out_of_bounds,
                std::string(parameter) + " value outside [" + format_fixed6(bounds.min) + ", " +
                    format_fixed6(bounds.max) + "] for cell '" + cell + "'",
                std::string(parameter));
  }
  // Events due at the current instant take effect before an operator change.
  apply_due_events(now());
  CellConfig& cfg = it->second;
  const double old_value = cfg.get(parameter);
  if (std::abs(old_value - value) <= kValueEpsilon) return std::nullopt;
  cfg.set(parameter, value);
  ++cfg.config_version;
  CmChange change{cell, std::string(parameter), now(), old_value, value, std::string(source)};
  cm_log_.push_back(change);
  return change;
}

double Simulation::effect_sum(const CellDescriptor& cell, std::string_view kpi_name, Timestamp t) const {
  const KpiBaseline& base = spec_.baseline.at(std::string(kpi_name));
  double total = 0.0;
  for (const auto& e : spec_.events) {
    if (!e.kpi || *e.kpi != kpi_name || t < e.onset || !element_contains(e.target, cell)) continue;
    const double mag = resolve_magnitude(e.magnitude, e.unit, base);
    switch (e.kind) {
      case EventKind::step_shift:
        total += mag;
        break;
      case EventKind::transient_spike:
        if (t < e.onset + e.duration * spec_.interval_s) total += mag;
        break;
      case EventKind::linear_drift: {
        const double span = static_cast<double>(e.duration * spec_.interval_s);
        total += mag * std::min(1.0, static_cast<double>(t - e.onset) / span);
        break;
      }
      default:
        break;
    }
  }
  const CellConfig& cfg = configs_.at(cell.id);
  for (const auto& b : bindings_) {
    if (b.cell != cell.id || t < b.active_from) continue;
    if (std::abs(cfg.get(b.parameter) - b.value) > kValueEpsilon) continue;
    for (const auto& eff : b.effects) {
      if (eff.kpi == kpi_name) total += resolve_magnitude(eff.delta, eff.unit, base);
    }
  }
  return total;
}

double Simulation::sample_value(const std::string& cell_id, std::string_view kpi_name, std::int64_t index) const {
  const CellDescriptor& cell = topology_->cell(cell_id);
  const KpiBaseline& base = spec_.baseline.at(std::string(kpi_name));
  const Timestamp t = index * spec_.interval_s;
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(t % kDaySeconds) / kDaySeconds;
  return base.mean + base.diurnal_amplitude * std::sin(phase) + effect_sum(cell, kpi_name, t);
}

std::vector<KpiSample> Simulation::advance(std::int64_t intervals) {
  if (intervals < 0) throw Error(Errc::invalid_argument, "cannot advance a negative number of intervals");
  std::vector<KpiSample> out;
  out.reserve(static_cast<std::size_t>(intervals) * topology_->cells().size() * default_kpis().size());
  for (std::int64_t step = 0; step < intervals; ++step) {
    const Timestamp t = now();
    apply_due_events(t);
    for (const auto& cell : topology_->cells()) {
      for (const auto& info : default_kpis()) {
        const KpiBaseline& base = spec_.baseline.at(std::string(info.name));
        double value = sample_value(cell.id, info.name, cursor_);
        if (base.noise_sigma > 0.0) value += base.noise_sigma * noise_draw(spec_.seed, cell.id, info.name, cursor_);
        out.push_back(KpiSample{cell.id, Level::cell, std::string(info.name), t, clamp_to_domain(info, value)});
      }
    }
    ++cursor_;
  }
  return out;
}

std::vector<KpiSample> generate_stream(const NetworkTopology& topology, const ScenarioSpec& spec) {
  Simulation sim(std::make_shared<const NetworkTopology>(topology), spec);
  return sim.advance(spec.horizon);
}

}  // namespace ranagent::sim
