#include "ranagent/sim/topology.hpp"

#include <algorithm>

#include "ranagent/core/errors.hpp"

namespace ranagent::sim {

const ParameterBounds& ConfigBounds::for_parameter(std::string_view name) const {
  if (name == param::tx_power) return tx_power_dbm;
  if (name == param::tilt) return electrical_tilt_deg;
  if (name == param::ho_offset) return handover_offset_db;
  throw Error(Errc::invalid_argument, "unknown parameter '" + std::string(name) + "'");
}

double CellConfig::get(std::string_view parameter) const {
  if (parameter == param::tx_power) return tx_power_dbm;
  if (parameter == param::tilt) return electrical_tilt_deg;
  if (parameter == param::ho_offset) return handover_offset_db;
  throw Error(Errc::invalid_argument, "unknown parameter '" + std::string(parameter) + "'");
}

void CellConfig::set(std::string_view parameter, double value) {
  if (parameter == param::tx_power) {
    tx_power_dbm = value;
  } else if (parameter == param::tilt) {
    electrical_tilt_deg = value;
  } else if (parameter == param::ho_offset) {
    handover_offset_db = value;
  } else {
    throw Error(Errc::invalid_argument, "unknown parameter '" + std::string(parameter) + "'");
  }
}

bool CellConfig::same_values(const CellConfig& other) const {
  return tx_power_dbm == other.tx_power_dbm && electrical_tilt_deg == other.electrical_tilt_deg &&
         handover_offset_db == other.handover_offset_db;
}

namespace {

template <typename Range, typename Proj>
void check_unique(const Range& items, Proj proj, std::string_view what) {
  std::set<std::string> seen;
  for (const auto& item : items) {
    const std::string& id = proj(item);
    if (id.empty()) throw Error(Errc::invalid_argument, "empty " + std::string(what) + " identifier");
    if (!seen.insert(id).second) {
      throw Error(Errc::duplicate_id, "duplicate " + std::string(what) + " identifier '" + id + "'", id);
    }
  }
}

void check_declared(const std::set<std::string>& declared, const std::string& id, std::string_view what,
                    const std::string& owner) {
  if (!declared.contains(id)) {
    throw Error(Errc::dangling_reference,
                std::string(what) + " '" + id + "' referenced by '" + owner + "' is not declared", id);
  }
}

void check_bounds(const ConfigBounds& bounds, const CellConfig& config, const std::string& cell) {
  for (std::string_view p : {param::tx_power, param::tilt, param::ho_offset}) {
    const auto& b = bounds.for_parameter(p);
    double v = config.get(p);
    if (v < b.min || v > b.max) {
      throw Error(Errc::out_of_bounds,
                  "initial " + std::string(p) + " of cell '" + cell + "' outside declared bounds", cell);
    }
  }
}

}  // namespace

NetworkTopology build_topology(const TopologySpec& spec) {
  auto self = [](const std::string& s) -> const std::string& { return s; };
  check_unique(spec.bands, self, "band");
  check_unique(spec.sectors, self, "sector");
  check_unique(spec.clusters, self, "cluster");
  check_unique(spec.nodes, [](const TopologySpec::Node& n) -> const std::string& { return n.id; }, "node");
  check_unique(spec.cells, [](const TopologySpec::Cell& c) -> const std::string& { return c.id; }, "cell");

  NetworkTopology topo;
  topo.spec_ = spec;
  topo.bounds_ = spec.bounds;
  topo.bands_ = {spec.bands.begin(), spec.bands.end()};
  topo.sectors_ = {spec.sectors.begin(), spec.sectors.end()};
  topo.clusters_ = {spec.clusters.begin(), spec.clusters.end()};

  for (const auto& [region, cluster] : spec.regions) {
    if (region.empty()) throw Error(Errc::invalid_argument, "empty region identifier");
    check_declared(topo.clusters_, cluster, "cluster", region);
  }
  topo.regions_ = spec.regions;
  std::set<std::string> region_ids;
  for (const auto& [region, _] : spec.regions) region_ids.insert(region);

  for (const auto& n : spec.nodes) {
    check_declared(region_ids, n.region, "region", n.id);
    topo.node_index_[n.id] = topo.nodes_.size();
    topo.nodes_.push_back(NodeDescriptor{n.id, n.region, {}, n.inventory});
  }

  for (const auto& c : spec.cells) {
    auto node_it = topo.node_index_.find(c.node);
    if (node_it == topo.node_index_.end()) {
      throw Error(Errc::dangling_reference,
                  "node '" + c.node + "' referenced by '" + c.id + "' is not declared", c.node);
    }
    check_declared(topo.bands_, c.band, "band", c.id);
    check_declared(topo.sectors_, c.sector, "sector", c.id);
    NodeDescriptor& node = topo.nodes_[node_it->second];
    CellDescriptor cell{c.id, c.node, c.band, c.sector, node.region, topo.regions_.at(node.region),
                        c.initial_config.value_or(CellConfig{})};
    check_bounds(spec.bounds, cell.initial_config, c.id);
    node.cells.push_back(c.id);
    topo.cell_index_[c.id] = topo.cells_.size();
    topo.cells_.push_back(std::move(cell));
  }

  for (const auto& node : topo.nodes_) {
    if (node.cells.empty()) {
      throw Error(Errc::invalid_argument, "node '" + node.id + "' owns no cells", node.id);
    }
  }
  for (const auto& cluster : topo.clusters_) {
    bool has_region = std::any_of(topo.regions_.begin(), topo.regions_.end(),
                                  [&](const auto& r) { return r.second == cluster; });
    if (!has_region) {
      throw Error(Errc::invalid_argument, "cluster '" + cluster + "' groups no region", cluster);
    }
  }
  return topo;
}

bool NetworkTopology::contains(const ElementRef& ref) const {
  switch (ref.level) {
    case Level::cell: return cell_index_.contains(ref.id);
    case Level::band: return bands_.contains(ref.id);
    case Level::sector: return sectors_.contains(ref.id);
    case Level::node: return node_index_.contains(ref.id);
    case Level::region: return regions_.contains(ref.id);
    case Level::cluster: return clusters_.contains(ref.id);
  }
  return false;
}

void NetworkTopology::require(const ElementRef& ref) const {
  if (!contains(ref)) {
    throw Error(Errc::unknown_element, "unknown element " + to_string(ref), ref.id);
  }
}

const CellDescriptor& NetworkTopology::cell(const std::string& id) const {
  auto it = cell_index_.find(id);
  if (it == cell_index_.end()) throw Error(Errc::unknown_element, "unknown cell '" + id + "'", id);
  return cells_[it->second];
}

const NodeDescriptor& NetworkTopology::node(const std::string& id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) throw Error(Errc::unknown_element, "unknown node '" + id + "'", id);
  return nodes_[it->second];
}

std::size_t NetworkTopology::cell_index(const std::string& id) const {
  auto it = cell_index_.find(id);
  if (it == cell_index_.end()) throw Error(Errc::unknown_element, "unknown cell '" + id + "'", id);
  return it->second;
}

const std::string& NetworkTopology::group_of(const std::string& cell_id, Level level) const {
  const CellDescriptor& c = cell(cell_id);
  switch (level) {
    case Level::cell: return c.id;
    case Level::band: return c.band;
    case Level::sector: return c.sector;
    case Level::node: return c.node;
    case Level::region: return c.region;
    case Level::cluster: return c.cluster;
  }
  return c.id;
}

std::vector<std::string> NetworkTopology::elements(Level level) const {
  std::vector<std::string> out;
  switch (level) {
    case Level::cell:
      for (const auto& c : cells_) out.push_back(c.id);
      break;
    case Level::band: out.assign(bands_.begin(), bands_.end()); break;
    case Level::sector: out.assign(sectors_.begin(), sectors_.end()); break;
    case Level::node:
      for (const auto& n : nodes_) out.push_back(n.id);
      break;
    case Level::region:
      for (const auto& [r, _] : regions_) out.push_back(r);
      break;
    case Level::cluster: out.assign(clusters_.begin(), clusters_.end()); break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> NetworkTopology::member_cells(const ElementRef& ref) const {
  require(ref);
  std::vector<std::string> out;
  for (const auto& c : cells_) {
    if (group_of(c.id, ref.level) == ref.id) out.push_back(c.id);
  }
  return out;
}

std::vector<std::string> NetworkTopology::children(const ElementRef& parent, Level level) const {
  std::set<std::string> out;
  for (const auto& cell_id : member_cells(parent)) out.insert(group_of(cell_id, level));
  return {out.begin(), out.end()};
}

std::optional<ElementRef> NetworkTopology::peer_parent(const ElementRef& ref) const {
  require(ref);
  switch (ref.level) {
    case Level::cell: return ElementRef{Level::node, cell(ref.id).node};
    case Level::node: return ElementRef{Level::region, node(ref.id).region};
    case Level::region: return ElementRef{Level::cluster, regions_.at(ref.id)};
    default: return std::nullopt;
  }
}

std::vector<std::string> NetworkTopology::peers(const ElementRef& ref) const {
  auto parent = peer_parent(ref);
  if (!parent) return elements(ref.level);
  switch (ref.level) {
    case Level::cell: {
      auto ids = node(parent->id).cells;
      std::sort(ids.begin(), ids.end());
      return ids;
    }
    case Level::node: {
      std::vector<std::string> ids;
      for (const auto& n : nodes_) {
        if (n.region == parent->id) ids.push_back(n.id);
      }
      std::sort(ids.begin(), ids.end());
      return ids;
    }
    case Level::region: {
      std::vector<std::string> ids;
      for (const auto& [r, c] : regions_) {
        if (c == parent->id) ids.push_back(r);
      }
      return ids;
    }
    default: return elements(ref.level);
  }
}

bool NetworkTopology::is_ancestor(const ElementRef& ancestor, const ElementRef& ref) const {
  if (ancestor == ref || !contains(ancestor) || !contains(ref)) return false;
  for (const auto& c : member_cells(ref)) {
    if (group_of(c, ancestor.level) != ancestor.id) return false;
  }
  return true;
}

std::vector<ElementRef> NetworkTopology::ancestors(const ElementRef& ref) const {
  require(ref);
  std::vector<ElementRef> out;
  switch (ref.level) {
    case Level::cell: {
      const auto& c = cell(ref.id);
      out = {{Level::band, c.band}, {Level::sector, c.sector}, {Level::node, c.node},
             {Level::region, c.region}, {Level::cluster, c.cluster}};
      break;
    }
    case Level::node: {
      const auto& n = node(ref.id);
      out = {{Level::region, n.region}, {Level::cluster, regions_.at(n.region)}};
      break;
    }
    case Level::region: out = {{Level::cluster, regions_.at(ref.id)}}; break;
    default: break;
  }
  return out;
}

Json to_json(const CellConfig& config) {
  return Json{{"tx_power_dbm", config.tx_power_dbm},
              {"electrical_tilt_deg", config.electrical_tilt_deg},
              {"handover_offset_db", config.handover_offset_db},
              {"config_version", config.config_version}};
}

CellConfig cell_config_from_json(const Json& doc, const std::string& path) {
  CellConfig c;
  c.tx_power_dbm = doc.value("tx_power_dbm", c.tx_power_dbm);
  c.electrical_tilt_deg = doc.value("electrical_tilt_deg", c.electrical_tilt_deg);
  c.handover_offset_db = doc.value("handover_offset_db", c.handover_offset_db);
  c.config_version = doc.value("config_version", c.config_version);
  if (c.config_version < 1) throw Error(Errc::invalid_argument, "config_version must be >= 1", path);
  return c;
}

namespace {

Json bounds_json(const ParameterBounds& b) { return Json{{"min", b.min}, {"max", b.max}}; }

ParameterBounds bounds_from(const Json& doc, const ParameterBounds& fallback, const std::string& path) {
  ParameterBounds b{doc.value("min", fallback.min), doc.value("max", fallback.max)};
  if (b.min > b.max) throw Error(Errc::invalid_argument, "min exceeds max", path);
  return b;
}

std::vector<std::string> string_list(const Json& doc, std::string_view key, const std::string& path) {
  const Json& arr = require(doc, key, path);
  if (!arr.is_array()) throw Error(Errc::invalid_argument, "expected an array", join_path(path, key));
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw Error(Errc::invalid_argument, "expected a string", index_path(join_path(path, key), i));
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

}  // namespace

Json to_json(const TopologySpec& spec) {
  Json doc;
  doc["bands"] = spec.bands;
  doc["sectors"] = spec.sectors;
  doc["clusters"] = spec.clusters;
  doc["regions"] = Json::object();
  for (const auto& [r, c] : spec.regions) doc["regions"][r] = c;
  doc["nodes"] = Json::array();
  for (const auto& n : spec.nodes) {
    doc["nodes"].push_back(Json{{"id", n.id},
                                {"region", n.region},
                                {"vendor", n.inventory.vendor},
                                {"hardware_model", n.inventory.hardware_model},
                                {"software_version", n.inventory.software_version},
                                {"commissioned_at", n.inventory.commissioned_at}});
  }
  doc["cells"] = Json::array();
  for (const auto& c : spec.cells) {
    Json cell{{"id", c.id}, {"node", c.node}, {"band", c.band}, {"sector", c.sector}};
    if (c.initial_config) cell["config"] = to_json(*c.initial_config);
    doc["cells"].push_back(std::move(cell));
  }
  doc["bounds"] = Json{{"tx_power_dbm", bounds_json(spec.bounds.tx_power_dbm)},
                       {"electrical_tilt_deg", bounds_json(spec.bounds.electrical_tilt_deg)},
                       {"handover_offset_db", bounds_json(spec.bounds.handover_offset_db)}};
  return doc;
}

TopologySpec topology_spec_from_json(const Json& doc, const std::string& path) {
  TopologySpec spec;
  spec.bands = string_list(doc, "bands", path);
  spec.sectors = string_list(doc, "sectors", path);
  spec.clusters = string_list(doc, "clusters", path);
  const Json& regions = require(doc, "regions", path);
  if (!regions.is_object()) {
    throw Error(Errc::invalid_argument, "regions must map region -> cluster", join_path(path, "regions"));
  }
  for (const auto& [r, c] : regions.items()) {
    if (!c.is_string()) {
      throw Error(Errc::invalid_argument, "cluster must be a string", join_path(path, "regions." + r));
    }
    spec.regions[r] = c.get<std::string>();
  }
  const Json& nodes = require(doc, "nodes", path);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string p = index_path(join_path(path, "nodes"), i);
    TopologySpec::Node n;
    n.id = require_string(nodes[i], "id", p);
    n.region = require_string(nodes[i], "region", p);
    n.inventory.vendor = nodes[i].value("vendor", n.inventory.vendor);
    n.inventory.hardware_model = nodes[i].value("hardware_model", n.inventory.hardware_model);
    n.inventory.software_version = nodes[i].value("software_version", n.inventory.software_version);
    n.inventory.commissioned_at = nodes[i].value("commissioned_at", n.inventory.commissioned_at);
    spec.nodes.push_back(std::move(n));
  }
  const Json& cells = require(doc, "cells", path);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string p = index_path(join_path(path, "cells"), i);
    TopologySpec::Cell c;
    c.id = require_string(cells[i], "id", p);
    c.node = require_string(cells[i], "node", p);
    c.band = require_string(cells[i], "band", p);
    c.sector = require_string(cells[i], "sector", p);
    if (cells[i].contains("config")) c.initial_config = cell_config_from_json(cells[i]["config"], p + ".config");
    spec.cells.push_back(std::move(c));
  }
  if (doc.contains("bounds")) {
    const Json& b = doc["bounds"];
    const std::string p = join_path(path, "bounds");
    if (b.contains("tx_power_dbm"))
      spec.bounds.tx_power_dbm = bounds_from(b["tx_power_dbm"], spec.bounds.tx_power_dbm, p + ".tx_power_dbm");
    if (b.contains("electrical_tilt_deg"))
      spec.bounds.electrical_tilt_deg =
          bounds_from(b["electrical_tilt_deg"], spec.bounds.electrical_tilt_deg, p + ".electrical_tilt_deg");
    if (b.contains("handover_offset_db"))
      spec.bounds.handover_offset_db =
          bounds_from(b["handover_offset_db"], spec.bounds.handover_offset_db, p + ".handover_offset_db");
  }
  return spec;
}

}  // namespace ranagent::sim
