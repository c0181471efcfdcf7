#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace flowte {

using NodeIndex = std::size_t;
using EdgeIndex = std::size_t;

struct Edge {
  NodeIndex src = 0;
  NodeIndex dst = 0;
  double capacity = 0.0;      // flow units per interval
  double delay_weight = 1.0;  // nonnegative; 1 == one hop

  bool operator==(const Edge&) const = default;
};

/// Directed capacitated site graph. Immutable once constructed; every
/// constructor path validates the invariants (unique node ids, unique
/// (src, dst) pairs, no self-loops, capacities >= 0).
class Topology {
 public:
  Topology() = default;
  Topology(std::vector<std::string> nodes, std::vector<Edge> edges);

  /// Parses the JSON topology document (see docs/formats.md).
  static Topology parse(std::string_view document);
  static Topology load(const std::filesystem::path& file);

  std::string to_json() const;
  void save(const std::filesystem::path& file) const;

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeIndex e) const { return edges_.at(e); }
  const std::string& node_name(NodeIndex v) const { return nodes_.at(v); }

  std::optional<NodeIndex> node_index(std::string_view name) const;
  std::optional<EdgeIndex> find_edge(NodeIndex src, NodeIndex dst) const;

  /// Outgoing edges of `v`, ordered by destination node index.
  std::span<const EdgeIndex> out_edges(NodeIndex v) const {
    return out_edges_.at(v);
  }

  double max_capacity() const;
  std::vector<double> capacities() const;

  /// Copy with every capacity replaced; size must equal num_edges().
  Topology with_capacities(std::span<const double> capacities) const;

  /// Stable 64-bit fingerprint of nodes, edges and capacities.
  std::uint64_t fingerprint() const;

  bool operator==(const Topology& other) const {
    return nodes_ == other.nodes_ && edges_ == other.edges_;
  }

 private:
  void index();

  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, NodeIndex> node_lookup_;
  std::unordered_map<std::uint64_t, EdgeIndex> edge_lookup_;
  std::vector<std::vector<EdgeIndex>> out_edges_;
};

/// Zeroes the capacity of every edge in `failed`. Node and edge sets are
/// preserved, so path sets computed on the original stay valid.
Topology apply_failures(const Topology& topo, std::span<const EdgeIndex> failed);

namespace topologies {

/// 12 sites, 19 bidirectional links (38 directed edges); heterogeneous
/// capacities in three tiers.
Topology b4_like();

/// A->B->D and A->C->D with bottleneck capacities on the B and C branches.
Topology diamond(double upper_capacity = 5.0, double lower_capacity = 4.0);

/// v0 -> v1 -> ... -> v{n-1}, one direction only.
Topology line(std::size_t n, double capacity = 10.0);

/// Random connected bidirectional graph: a random spanning tree plus
/// `extra_links` chords; capacities uniform in [lo, hi].
Topology random_connected(std::size_t n, std::size_t extra_links,
                          std::uint64_t seed, double lo = 50.0,
                          double hi = 200.0);

}  // namespace topologies

}  // namespace flowte
