#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ranagent/core/domain.hpp"
#include "ranagent/core/json_io.hpp"

namespace ranagent::sim {

struct ParameterBounds {
  double min = 0.0;
  double max = 0.0;
};

struct ConfigBounds {
  ParameterBounds tx_power_dbm{30.0, 49.0};
  ParameterBounds electrical_tilt_deg{0.0, 12.0};
  ParameterBounds handover_offset_db{-6.0, 6.0};

  const ParameterBounds& for_parameter(std::string_view name) const;
};

struct CellConfig {
  double tx_power_dbm = 43.0;
  double electrical_tilt_deg = 4.0;
  double handover_offset_db = 0.0;
  std::int64_t config_version = 1;

  double get(std::string_view parameter) const;
  void set(std::string_view parameter, double value);

  // Parameter values only; config_version is excluded.
  bool same_values(const CellConfig& other) const;
};

struct InventoryInfo {
  std::string vendor = "generic";
  std::string hardware_model = "gnb-1";
  std::string software_version = "1.0";
  Timestamp commissioned_at = 0;
};

// Declarative description consumed by build_topology.
struct TopologySpec {
  struct Node {
    std::string id;
    std::string region;
    InventoryInfo inventory;
  };
  struct Cell {
    std::string id;
    std::string node;
    std::string band;
    std::string sector;
    std::optional<CellConfig> initial_config;
  };

  std::vector<std::string> bands;
  std::vector<std::string> sectors;
  std::vector<std::string> clusters;
  std::map<std::string, std::string> regions;  // region -> cluster
  std::vector<Node> nodes;
  std::vector<Cell> cells;
  ConfigBounds bounds;
};

struct CellDescriptor {
  std::string id;
  std::string node;
  std::string band;
  std::string sector;
  std::string region;
  std::string cluster;
  CellConfig initial_config;
};

struct NodeDescriptor {
  std::string id;
  std::string region;
  std::vector<std::string> cells;
  InventoryInfo inventory;
};

class NetworkTopology {
public:
  const std::vector<CellDescriptor>& cells() const { return cells_; }
  const std::vector<NodeDescriptor>& nodes() const { return nodes_; }
  const std::set<std::string>& bands() const { return bands_; }
  const std::set<std::string>& sectors() const { return sectors_; }
  const std::map<std::string, std::string>& regions() const { return regions_; }
  const std::set<std::string>& clusters() const { return clusters_; }
  const ConfigBounds& bounds() const { return bounds_; }

  bool contains(const ElementRef& ref) const;
  bool contains(Level level, const std::string& id) const { return contains(ElementRef{level, id}); }
  void require(const ElementRef& ref) const;  // throws Error(unknown_element)

  const CellDescriptor& cell(const std::string& id) const;
  const NodeDescriptor& node(const std::string& id) const;

  // Identifier of the element at `level` that contains `cell_id`.
  const std::string& group_of(const std::string& cell_id, Level level) const;

  // Every element id at `level`, sorted.
  std::vector<std::string> elements(Level level) const;

  // Cells under an element, in topology order.
  std::vector<std::string> member_cells(const ElementRef& ref) const;

  // Elements at `level` sharing at least one cell with `parent`, sorted.
  std::vector<std::string> children(const ElementRef& parent, Level level) const;

  // Tree parent used for peer comparison: cell->node, node->region,
  // region->cluster. Band, sector and cluster peers are network-wide (nullopt).
  std::optional<ElementRef> peer_parent(const ElementRef& ref) const;

  // Elements sharing `ref`'s peer parent (including `ref`), sorted.
  std::vector<std::string> peers(const ElementRef& ref) const;

  // True when `ancestor` contains every member cell of `ref` (and differs from it).
  bool is_ancestor(const ElementRef& ancestor, const ElementRef& ref) const;

  // ref plus ancestors at node, region and cluster level, and band/sector for cells.
  std::vector<ElementRef> ancestors(const ElementRef& ref) const;

  std::size_t cell_index(const std::string& id) const;

  const TopologySpec& spec() const { return spec_; }

private:
  friend NetworkTopology build_topology(const TopologySpec& spec);

  TopologySpec spec_;
  std::vector<CellDescriptor> cells_;
  std::vector<NodeDescriptor> nodes_;
  std::set<std::string> bands_;
  std::set<std::string> sectors_;
  std::map<std::string, std::string> regions_;
  std::set<std::string> clusters_;
  ConfigBounds bounds_;
  std::map<std::string, std::size_t> cell_index_;
  std::map<std::string, std::size_t> node_index_;
};

// Validates the spec and resolves derived membership.
// Errors: Error(duplicate_id) and Error(dangling_reference), naming the offending id.
NetworkTopology build_topology(const TopologySpec& spec);

Json to_json(const TopologySpec& spec);
TopologySpec topology_spec_from_json(const Json& doc, const std::string& path = "topology");

Json to_json(const CellConfig& config);
CellConfig cell_config_from_json(const Json& doc, const std::string& path);

}  // namespace ranagent::sim
