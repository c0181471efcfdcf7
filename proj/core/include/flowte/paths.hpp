#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "flowte/topology.hpp"

namespace flowte {

/// Ordered edge list from a source to a destination.
using Path = std::vector<EdgeIndex>;

/// Up to k loop-free paths for every ordered node pair, shortest first.
class PathSet {
 public:
  PathSet() = default;
  PathSet(std::size_t num_nodes, std::size_t k, std::vector<std::vector<Path>> by_pair);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t k() const { return k_; }

  const std::vector<Path>& paths(NodeIndex src, NodeIndex dst) const {
    return by_pair_.at(src * num_nodes_ + dst);
  }
  std::size_t total_paths() const;

  /// Paths listed by node identifiers, for `flowte paths`.
  std::string to_json(const Topology& topo) const;

  bool operator==(const PathSet&) const = default;

 private:
  std::size_t num_nodes_ = 0;
  std::size_t k_ = 0;
  std::vector<std::vector<Path>> by_pair_;
};

/// Loopless k-shortest paths by hop count (Yen). Ties are broken by the
/// lexicographic order of the node index sequence, so the result equals
/// the first k entries of all simple paths sorted by (hops, node sequence).
PathSet k_shortest_paths(const Topology& topo, std::size_t k = 4);

/// Node sequence s, v1, ..., t visited by `path`.
std::vector<NodeIndex> path_nodes(const Topology& topo, const Path& path);

/// True when `path` is a contiguous, loop-free walk from src to dst.
bool is_valid_path(const Topology& topo, const Path& path, NodeIndex src, NodeIndex dst);

}  // namespace flowte
