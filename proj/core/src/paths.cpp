#include "flowte/paths.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <optional>
#include <set>

#include "flowte/error.hpp"
#include "json.hpp"

namespace flowte {

PathSet::PathSet(std::size_t num_nodes, std::size_t k, std::vector<std::vector<Path>> by_pair)
    : num_nodes_(num_nodes), k_(k), by_pair_(std::move(by_pair)) {
  if (by_pair_.size() != num_nodes_ * num_nodes_) {
    throw ValidationError("path set pair table has wrong size");
  }
}

std::size_t PathSet::total_paths() const {
  std::size_t total = 0;
  for (const auto& ps : by_pair_) total += ps.size();
  return total;
}

std::string PathSet::to_json(const Topology& topo) const {
  nlohmann::json doc;
  doc["k"] = k_;
  doc["pairs"] = nlohmann::json::array();
  for (NodeIndex s = 0; s < num_nodes_; ++s) {
    for (NodeIndex t = 0; t < num_nodes_; ++t) {
      if (s == t) continue;
      nlohmann::json paths = nlohmann::json::array();
      for (const Path& p : this->paths(s, t)) {
        nlohmann::json hops = nlohmann::json::array();
        for (NodeIndex v : path_nodes(topo, p)) hops.push_back(topo.node_name(v));
        paths.push_back(hops);
      }
      doc["pairs"].push_back({{"src", topo.node_name(s)},
                              {"dst", topo.node_name(t)},
                              {"paths", paths}});
    }
  }
  return doc.dump(2) + "\n";
}

std::vector<NodeIndex> path_nodes(const Topology& topo, const Path& path) {
  std::vector<NodeIndex> nodes;
  if (path.empty()) return nodes;
  nodes.push_back(topo.edge(path.front()).src);
  for (EdgeIndex e : path) nodes.push_back(topo.edge(e).dst);
  return nodes;
}

bool is_valid_path(const Topology& topo, const Path& path, NodeIndex src, NodeIndex dst) {
  if (path.empty() || src == dst) return false;
  if (topo.edge(path.front()).src != src || topo.edge(path.back()).dst != dst) return false;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (topo.edge(path[i - 1]).dst != topo.edge(path[i]).src) return false;
  }
  auto nodes = path_nodes(topo, path);
  std::sort(nodes.begin(), nodes.end());
  return std::adjacent_find(nodes.begin(), nodes.end()) == nodes.end();
}

namespace {

struct Candidate {
  std::vector<NodeIndex> nodes;
  Path edges;

  bool operator<(const Candidate& other) const {
    if (edges.size() != other.edges.size()) return edges.size() < other.edges.size();
    return nodes < other.nodes;
  }
};

// Min-hop path from src to dst avoiding banned nodes/edges; among equally
// short paths, the lexicographically smallest node sequence.
std::optional<Path> shortest_path(const Topology& topo, NodeIndex src, NodeIndex dst,
                                  const std::vector<bool>& banned_node,
                                  const std::vector<bool>& banned_edge) {
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  const std::size_t n = topo.num_nodes();
  // Reverse BFS gives the hop distance to dst.
  std::vector<std::vector<EdgeIndex>> in_edges(n);
  for (EdgeIndex e = 0; e < topo.num_edges(); ++e) in_edges[topo.edge(e).dst].push_back(e);
  std::vector<std::size_t> dist(n, kInf);
  std::deque<NodeIndex> queue;
  dist[dst] = 0;
  queue.push_back(dst);
  while (!queue.empty()) {
    const NodeIndex v = queue.front();
    queue.pop_front();
    for (EdgeIndex e : in_edges[v]) {
      const NodeIndex u = topo.edge(e).src;
      if (banned_edge[e] || banned_node[u] || dist[u] != kInf) continue;
      dist[u] = dist[v] + 1;
      queue.push_back(u);
    }
  }
  if (banned_node[src] || dist[src] == kInf) return std::nullopt;
  Path path;
  NodeIndex cur = src;
  while (cur != dst) {
    // out_edges is sorted by destination, so the first match is lex-min.
    bool advanced = false;
    for (EdgeIndex e : topo.out_edges(cur)) {
      const NodeIndex next = topo.edge(e).dst;
      if (banned_edge[e] || banned_node[next]) continue;
      if (dist[next] != kInf && dist[next] + 1 == dist[cur]) {
        path.push_back(e);
        cur = next;
        advanced = true;
        break;
      }
    }
    if (!advanced) return std::nullopt;
  }
  return path;
}

std::vector<Path> yen(const Topology& topo, NodeIndex src, NodeIndex dst, std::size_t k) {
  std::vector<Path> result;
  const std::size_t n = topo.num_nodes();
  std::vector<bool> banned_node(n, false);
  std::vector<bool> banned_edge(topo.num_edges(), false);
  auto first = shortest_path(topo, src, dst, banned_node, banned_edge);
  if (!first) return result;

  std::vector<Candidate> accepted;
  accepted.push_back({path_nodes(topo, *first), *first});
  std::set<Candidate> pending;

  while (accepted.size() < k) {
    const Candidate& last = accepted.back();
    for (std::size_t i = 0; i + 1 < last.nodes.size(); ++i) {
      const NodeIndex spur = last.nodes[i];
      std::fill(banned_node.begin(), banned_node.end(), false);
      std::fill(banned_edge.begin(), banned_edge.end(), false);
      for (const Candidate& a : accepted) {
        if (a.nodes.size() > i + 1 &&
            std::equal(a.nodes.begin(), a.nodes.begin() + static_cast<std::ptrdiff_t>(i + 1),
                       last.nodes.begin())) {
          banned_edge[a.edges[i]] = true;
        }
      }
      for (std::size_t j = 0; j < i; ++j) banned_node[last.nodes[j]] = true;

      auto spur_path = shortest_path(topo, spur, dst, banned_node, banned_edge);
      if (!spur_path) continue;
      Candidate c;
      c.edges.assign(last.edges.begin(), last.edges.begin() + static_cast<std::ptrdiff_t>(i));
      c.edges.insert(c.edges.end(), spur_path->begin(), spur_path->end());
      c.nodes = path_nodes(topo, c.edges);
      pending.insert(std::move(c));
    }
    // Drop candidates already accepted (possible through different spurs).
    while (!pending.empty()) {
      auto it = pending.begin();
      const bool seen = std::any_of(accepted.begin(), accepted.end(),
                                    [&](const Candidate& a) { return a.nodes == it->nodes; });
      if (!seen) break;
      pending.erase(it);
    }
    if (pending.empty()) break;
    accepted.push_back(*pending.begin());
    pending.erase(pending.begin());
  }
  for (auto& c : accepted) result.push_back(std::move(c.edges));
  return result;
}

}  // namespace

PathSet k_shortest_paths(const Topology& topo, std::size_t k) {
  if (k == 0) throw ValidationError("k must be positive");
  const std::size_t n = topo.num_nodes();
  std::vector<std::vector<Path>> by_pair(n * n);
  for (NodeIndex s = 0; s < n; ++s) {
    for (NodeIndex t = 0; t < n; ++t) {
      if (s != t) by_pair[s * n + t] = yen(topo, s, t, k);
    }
  }
  return PathSet(n, k, std::move(by_pair));
}

}  // namespace flowte
