#include "flowte/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "flowte/error.hpp"
#include "json.hpp"

namespace flowte {

namespace {

std::uint64_t pair_key(NodeIndex src, NodeIndex dst) {
  return (static_cast<std::uint64_t>(src) << 32) | static_cast<std::uint64_t>(dst);
}

// FNV-1a over raw bytes.
struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
};

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Topology::Topology(std::vector<std::string> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  index();
}

void Topology::index() {
  node_lookup_.clear();
  edge_lookup_.clear();
  for (NodeIndex v = 0; v < nodes_.size(); ++v) {
    if (!node_lookup_.emplace(nodes_[v], v).second) {
      throw ValidationError("duplicate node identifier '" + nodes_[v] + "'");
    }
  }
  out_edges_.assign(nodes_.size(), {});
  for (EdgeIndex e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    if (edge.src >= nodes_.size() || edge.dst >= nodes_.size()) {
      throw ValidationError("edge " + std::to_string(e) + " references unknown node");
    }
    const std::string label =
        "edge " + nodes_[edge.src] + "->" + nodes_[edge.dst];
    if (edge.src == edge.dst) throw ValidationError(label + " is a self-loop");
    if (!std::isfinite(edge.capacity) || edge.capacity < 0.0) {
      throw ValidationError(label + " has invalid capacity " +
                            std::to_string(edge.capacity));
    }
    if (!std::isfinite(edge.delay_weight) || edge.delay_weight < 0.0) {
      throw ValidationError(label + " has invalid delay_weight");
    }
    if (!edge_lookup_.emplace(pair_key(edge.src, edge.dst), e).second) {
      throw ValidationError("duplicate " + label);
    }
    out_edges_[edge.src].push_back(e);
  }
  for (auto& out : out_edges_) {
    std::sort(out.begin(), out.end(), [this](EdgeIndex a, EdgeIndex b) {
      return edges_[a].dst < edges_[b].dst;
    });
  }
}

Topology Topology::parse(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("topology document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw ValidationError("topology document needs a 'nodes' array");
  }
  std::vector<std::string> nodes;
  for (const auto& n : doc["nodes"]) {
    if (!n.is_string()) throw ValidationError("node identifiers must be strings");
    nodes.push_back(n.get<std::string>());
  }
  std::unordered_map<std::string, NodeIndex> lookup;
  for (NodeIndex v = 0; v < nodes.size(); ++v) {
    if (!lookup.emplace(nodes[v], v).second) {
      throw ValidationError("duplicate node identifier '" + nodes[v] + "'");
    }
  }
  const bool directed = doc.value("directed", true);
  std::vector<Edge> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw ValidationError("'edges' must be an array");
    for (const auto& e : doc["edges"]) {
      if (!e.is_object() || !e.contains("src") || !e.contains("dst") ||
          !e.contains("capacity")) {
        throw ValidationError("edge record needs src, dst and capacity");
      }
      const auto src_name = e["src"].get<std::string>();
      const auto dst_name = e["dst"].get<std::string>();
      auto src = lookup.find(src_name);
      auto dst = lookup.find(dst_name);
      if (src == lookup.end()) throw ValidationError("edge references unknown node '" + src_name + "'");
      if (dst == lookup.end()) throw ValidationError("edge references unknown node '" + dst_name + "'");
      if (!e["capacity"].is_number()) {
        throw ValidationError("edge " + src_name + "->" + dst_name + " capacity must be numeric");
      }
      Edge edge{src->second, dst->second, e["capacity"].get<double>(),
                e.value("delay_weight", 1.0)};
      edges.push_back(edge);
      if (!directed) edges.push_back({edge.dst, edge.src, edge.capacity, edge.delay_weight});
    }
  }
  return Topology(std::move(nodes), std::move(edges));
}

Topology Topology::load(const std::filesystem::path& file) {
  return parse(read_file(file));
}

std::string Topology::to_json() const {
  nlohmann::json doc;
  doc["directed"] = true;
  doc["nodes"] = nodes_;
  doc["edges"] = nlohmann::json::array();
  for (const Edge& e : edges_) {
    doc["edges"].push_back({{"src", nodes_[e.src]},
                            {"dst", nodes_[e.dst]},
                            {"capacity", e.capacity},
                            {"delay_weight", e.delay_weight}});
  }
  return doc.dump(2) + "\n";
}

void Topology::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << to_json();
}

std::optional<NodeIndex> Topology::node_index(std::string_view name) const {
  auto it = node_lookup_.find(std::string(name));
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<EdgeIndex> Topology::find_edge(NodeIndex src, NodeIndex dst) const {
  auto it = edge_lookup_.find(pair_key(src, dst));
  if (it == edge_lookup_.end()) return std::nullopt;
  return it->second;
}

double Topology::max_capacity() const {
  double m = 0.0;
  for (const Edge& e : edges_) m = std::max(m, e.capacity);
  return m;
}

std::vector<double> Topology::capacities() const {
  std::vector<double> c(edges_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) c[e] = edges_[e].capacity;
  return c;
}

Topology Topology::with_capacities(std::span<const double> capacities) const {
  if (capacities.size() != edges_.size()) {
    throw ValidationError("capacity vector size mismatch");
  }
  std::vector<Edge> edges = edges_;
  for (std::size_t e = 0; e < edges.size(); ++e) edges[e].capacity = capacities[e];
  return Topology(nodes_, std::move(edges));
}

std::uint64_t Topology::fingerprint() const {
  Fnv f;
  for (const auto& n : nodes_) {
    f.bytes(n.data(), n.size());
    f.value('\0');
  }
  for (const Edge& e : edges_) {
    f.value(static_cast<std::uint64_t>(e.src));
    f.value(static_cast<std::uint64_t>(e.dst));
    f.value(e.capacity);
    f.value(e.delay_weight);
  }
  return f.h;
}

Topology apply_failures(const Topology& topo, std::span<const EdgeIndex> failed) {
  std::vector<double> caps = topo.capacities();
  for (EdgeIndex e : failed) {
    if (e >= caps.size()) {
      throw ValidationError("failed edge index " + std::to_string(e) + " is not in the topology");
    }
    caps[e] = 0.0;
  }
  return topo.with_capacities(caps);
}

namespace topologies {

namespace {

void add_link(std::vector<Edge>& edges, NodeIndex a, NodeIndex b, double cap) {
  edges.push_back({a, b, cap, 1.0});
  edges.push_back({b, a, cap, 1.0});
}

}  // namespace

Topology b4_like() {
  std::vector<std::string> nodes = {"usw1", "usw2", "usc1", "usc2",
                                    "use1", "use2", "eu1",  "eu2",
                                    "eu3",  "as1",  "as2",  "as3"};
  enum : NodeIndex { usw1, usw2, usc1, usc2, use1, use2, eu1, eu2, eu3, as1, as2, as3 };
  constexpr double kHigh = 200.0, kMid = 150.0, kLow = 100.0;
  std::vector<Edge> edges;
  add_link(edges, usw1, usw2, kHigh);
  add_link(edges, usw1, usc1, kMid);
  add_link(edges, usw2, usc1, kHigh);
  add_link(edges, usw2, usc2, kMid);
  add_link(edges, usc1, usc2, kHigh);
  add_link(edges, usc1, use1, kHigh);
  add_link(edges, usc2, use2, kMid);
  add_link(edges, use1, use2, kHigh);
  add_link(edges, use1, eu1, kMid);
  add_link(edges, use2, eu2, kLow);
  add_link(edges, eu1, eu2, kHigh);
  add_link(edges, eu1, eu3, kMid);
  add_link(edges, eu2, eu3, kHigh);
  add_link(edges, usw1, as1, kLow);
  add_link(edges, usw2, as2, kMid);
  add_link(edges, as1, as2, kHigh);
  add_link(edges, as2, as3, kMid);
  add_link(edges, as1, as3, kHigh);
  add_link(edges, eu3, as3, kLow);
  return Topology(std::move(nodes), std::move(edges));
}

Topology diamond(double upper_capacity, double lower_capacity) {
  // Entry links are wide so the branch links are the bottlenecks.
  const double wide = 100.0 * std::max({upper_capacity, lower_capacity, 1.0});
  return Topology({"A", "B", "C", "D"},
                  {{0, 1, wide, 1.0},
                   {1, 3, upper_capacity, 1.0},
                   {0, 2, wide, 1.0},
                   {2, 3, lower_capacity, 1.0}});
}

Topology line(std::size_t n, double capacity) {
  std::vector<std::string> nodes;
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back("v" + std::to_string(i));
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, capacity, 1.0});
  return Topology(std::move(nodes), std::move(edges));
}

Topology random_connected(std::size_t n, std::size_t extra_links,
                          std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cap(lo, hi);
  std::vector<std::string> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back("n" + std::to_string(i));
  std::vector<Edge> edges;
  std::vector<std::vector<bool>> linked(n, std::vector<bool>(n, false));
  for (std::size_t v = 1; v < n; ++v) {
    std::uniform_int_distribution<std::size_t> pick(0, v - 1);
    const std::size_t u = pick(rng);
    linked[u][v] = linked[v][u] = true;
    add_link(edges, u, v, std::round(cap(rng)));
  }
  std::size_t max_links = n * (n - 1) / 2;
  std::size_t target = std::min(max_links, (n > 0 ? n - 1 : 0) + extra_links);
  std::size_t links = n > 0 ? n - 1 : 0;
  std::uniform_int_distribution<std::size_t> any(0, n > 0 ? n - 1 : 0);
  while (links < target) {
    const std::size_t u = any(rng), v = any(rng);
    if (u == v || linked[u][v]) continue;
    linked[u][v] = linked[v][u] = true;
    add_link(edges, u, v, std::round(cap(rng)));
    ++links;
  }
  return Topology(std::move(nodes), std::move(edges));
}

}  // namespace topologies

}  // namespace flowte
