#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowte/paths.hpp"
#include "flowte/topology.hpp"
#include "flowte/traffic.hpp"

namespace flowte {

/// Flat indexing shared by every instance over one (topology, path set):
/// demands are the ordered pairs (s, t), s != t, in row-major order; flat
/// path index p enumerates (demand, path index) in that order.
struct FlowLayout {
  std::size_t num_nodes = 0;
  std::size_t max_paths = 0;
  std::vector<NodeIndex> demand_src;
  std::vector<NodeIndex> demand_dst;
  std::vector<std::size_t> demand_first_path;  // size num_demands + 1
  std::vector<std::size_t> path_demand;
  std::vector<std::size_t> path_first_hop;     // size num_paths + 1, into hops
  std::vector<EdgeIndex> hops;                 // edges of every path, concatenated
  std::vector<std::vector<std::size_t>> edge_paths;  // flat paths through each edge

  static std::shared_ptr<const FlowLayout> build(const Topology& topo, const PathSet& paths);

  std::size_t num_demands() const { return demand_src.size(); }
  std::size_t num_paths() const { return path_demand.size(); }
  std::size_t path_count(std::size_t d) const {
    return demand_first_path[d + 1] - demand_first_path[d];
  }
  std::span<const EdgeIndex> path_edges(std::size_t p) const {
    return {hops.data() + path_first_hop[p], path_first_hop[p + 1] - path_first_hop[p]};
  }
};

/// One TE problem: topology, precomputed paths and one demand matrix.
class TeInstance {
 public:
  TeInstance(std::shared_ptr<const Topology> topo, std::shared_ptr<const PathSet> paths,
             DemandMatrix demands);
  TeInstance(std::shared_ptr<const Topology> topo, std::shared_ptr<const PathSet> paths,
             std::shared_ptr<const FlowLayout> layout, DemandMatrix demands);
  /// Convenience for tests and tools; computes k-shortest paths.
  static TeInstance create(Topology topo, DemandMatrix demands, std::size_t k = 4);

  const Topology& topology() const { return *topo_; }
  const PathSet& path_set() const { return *paths_; }
  const FlowLayout& layout() const { return *layout_; }
  const DemandMatrix& demands() const { return demands_; }
  std::shared_ptr<const Topology> topology_ptr() const { return topo_; }
  std::shared_ptr<const PathSet> path_set_ptr() const { return paths_; }
  std::shared_ptr<const FlowLayout> layout_ptr() const { return layout_; }

  std::size_t num_demands() const { return layout_->num_demands(); }
  std::size_t num_paths() const { return layout_->num_paths(); }
  std::size_t num_edges() const { return topo_->num_edges(); }
  double volume(std::size_t d) const { return volumes_[d]; }
  std::span<const double> volumes() const { return volumes_; }
  double capacity(EdgeIndex e) const { return capacities_[e]; }
  std::span<const double> capacities() const { return capacities_; }
  double total_demand() const { return total_demand_; }

  /// Positive-volume demand with no path.
  bool unroutable(std::size_t d) const {
    return volumes_[d] > 0.0 && layout_->path_count(d) == 0;
  }

  /// Same topology and paths, different demands.
  TeInstance with_demands(DemandMatrix demands) const;
  /// Same node/edge structure and paths, different capacities (failures).
  TeInstance with_topology(std::shared_ptr<const Topology> topo) const;

 private:
  void cache();

  std::shared_ptr<const Topology> topo_;
  std::shared_ptr<const PathSet> paths_;
  std::shared_ptr<const FlowLayout> layout_;
  DemandMatrix demands_;
  std::vector<double> volumes_;
  std::vector<double> capacities_;
  double total_demand_ = 0.0;
};

/// Split ratio per flat path index.
struct FlowAllocation {
  std::vector<double> split;

  static FlowAllocation zeros(const TeInstance& inst) {
    return {std::vector<double>(inst.num_paths(), 0.0)};
  }
  bool operator==(const FlowAllocation&) const = default;
};

/// True when every ratio is finite and >= 0 and every demand's ratios sum
/// to at most 1 + slack.
bool is_valid_allocation(const TeInstance& inst, const FlowAllocation& alloc, double slack = 1e-9);

enum class ObjectiveKind { TotalFlow, MaxLinkUtilization, DelayPenalizedFlow };
enum class Orientation { Maximize, Minimize };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::TotalFlow;
  std::vector<double> delay_coefficients;  // per edge, for DelayPenalizedFlow

  static ObjectiveSpec total_flow() { return {}; }
  static ObjectiveSpec max_link_utilization() { return {ObjectiveKind::MaxLinkUtilization, {}}; }
  /// Coefficient of edge e = per_unit * delay_weight(e).
  static ObjectiveSpec delay_penalized(const Topology& topo, double per_unit = 0.1);

  Orientation orientation() const {
    return kind == ObjectiveKind::MaxLinkUtilization ? Orientation::Minimize
                                                     : Orientation::Maximize;
  }
};

std::string to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(const std::string& name);

struct ObjectiveValue {
  double value = 0.0;
  Orientation orientation = Orientation::Maximize;
};

inline constexpr double kInfiniteUtilization = std::numeric_limits<double>::infinity();

std::vector<double> link_loads(const TeInstance& inst, const FlowAllocation& alloc);
double intended_total_flow(const TeInstance& inst, const FlowAllocation& alloc);

/// Per-path scale min over e in p of min(1, c(e) / load(e)).
std::vector<double> drop_factors(const TeInstance& inst, std::span<const double> loads);

/// Allocation after proportional dropping. Its link loads never exceed
/// capacity, exactly: a downward fix-up pass absorbs rounding.
FlowAllocation drop_to_feasible(const TeInstance& inst, const FlowAllocation& alloc);

double feasible_total_flow(const TeInstance& inst, const FlowAllocation& alloc);
/// feasible flow / total demand; 1 for an all-zero demand matrix.
double satisfied_demand(const TeInstance& inst, const FlowAllocation& alloc);
/// max load/capacity over c > 0 edges; loaded zero-capacity edges give +inf.
double max_link_utilization(const TeInstance& inst, const FlowAllocation& alloc);
double delay_penalized_flow(const TeInstance& inst, const FlowAllocation& alloc,
                            std::span<const double> coefficients);
/// intended flow - sum_e max(0, load(e) - c(e)).
double surrogate_loss(const TeInstance& inst, const FlowAllocation& alloc);
/// d surrogate / d split, one entry per flat path; 0 subgradient at kinks.
std::vector<double> surrogate_gradient(const TeInstance& inst, const FlowAllocation& alloc);

/// Raw objective of the allocation as given (intended loads).
ObjectiveValue objective_value(const TeInstance& inst, const FlowAllocation& alloc,
                               const ObjectiveSpec& spec);
/// Objective of what the network actually carries: flow objectives are
/// evaluated after proportional dropping; MLU on the intended loads.
ObjectiveValue deployed_objective(const TeInstance& inst, const FlowAllocation& alloc,
                                  const ObjectiveSpec& spec);

/// Line-delimited (src, dst, path_index, split_ratio) interchange format.
std::string format_allocation(const TeInstance& inst, const FlowAllocation& alloc);
void write_allocation(const std::filesystem::path& file, const TeInstance& inst,
                      const FlowAllocation& alloc);
FlowAllocation parse_allocation(std::string_view text, const TeInstance& inst);
FlowAllocation read_allocation(const std::filesystem::path& file, const TeInstance& inst);

}  // namespace flowte
