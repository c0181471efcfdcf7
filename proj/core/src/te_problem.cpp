#include "flowte/te_problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flowte/error.hpp"

namespace flowte {

std::shared_ptr<const FlowLayout> FlowLayout::build(const Topology& topo, const PathSet& paths) {
  auto layout = std::make_shared<FlowLayout>();
  const std::size_t n = topo.num_nodes();
  if (paths.num_nodes() != n) throw ValidationError("path set does not match topology");
  layout->num_nodes = n;
  layout->max_paths = paths.k();
  layout->edge_paths.assign(topo.num_edges(), {});
  layout->demand_first_path.push_back(0);
  layout->path_first_hop.push_back(0);
  for (NodeIndex s = 0; s < n; ++s) {
    for (NodeIndex t = 0; t < n; ++t) {
      if (s == t) continue;
      const std::size_t d = layout->demand_src.size();
      layout->demand_src.push_back(s);
      layout->demand_dst.push_back(t);
      for (const Path& path : paths.paths(s, t)) {
        const std::size_t p = layout->path_demand.size();
        layout->path_demand.push_back(d);
        for (EdgeIndex e : path) {
          if (e >= topo.num_edges()) throw ValidationError("path references unknown edge");
          layout->hops.push_back(e);
          layout->edge_paths[e].push_back(p);
        }
        layout->path_first_hop.push_back(layout->hops.size());
      }
      layout->demand_first_path.push_back(layout->path_demand.size());
    }
  }
  return layout;
}

TeInstance::TeInstance(std::shared_ptr<const Topology> topo, std::shared_ptr<const PathSet> paths,
                       DemandMatrix demands)
    : TeInstance(topo, paths, FlowLayout::build(*topo, *paths), std::move(demands)) {}

TeInstance::TeInstance(std::shared_ptr<const Topology> topo, std::shared_ptr<const PathSet> paths,
                       std::shared_ptr<const FlowLayout> layout, DemandMatrix demands)
    : topo_(std::move(topo)),
      paths_(std::move(paths)),
      layout_(std::move(layout)),
      demands_(std::move(demands)) {
  if (demands_.num_nodes() != topo_->num_nodes()) {
    throw ValidationError("demand matrix size does not match topology");
  }
  cache();
}

TeInstance TeInstance::create(Topology topo, DemandMatrix demands, std::size_t k) {
  auto t = std::make_shared<const Topology>(std::move(topo));
  auto p = std::make_shared<const PathSet>(k_shortest_paths(*t, k));
  return TeInstance(t, p, std::move(demands));
}

void TeInstance::cache() {
  const FlowLayout& l = *layout_;
  volumes_.resize(l.num_demands());
  total_demand_ = 0.0;
  for (std::size_t d = 0; d < l.num_demands(); ++d) {
    volumes_[d] = demands_.volume(l.demand_src[d], l.demand_dst[d]);
    total_demand_ += volumes_[d];
  }
  capacities_ = topo_->capacities();
}

TeInstance TeInstance::with_demands(DemandMatrix demands) const {
  return TeInstance(topo_, paths_, layout_, std::move(demands));
}

TeInstance TeInstance::with_topology(std::shared_ptr<const Topology> topo) const {
  if (topo->num_nodes() != topo_->num_nodes() || topo->num_edges() != topo_->num_edges()) {
    throw ValidationError("replacement topology changes the node or edge set");
  }
  return TeInstance(std::move(topo), paths_, layout_, demands_);
}

bool is_valid_allocation(const TeInstance& inst, const FlowAllocation& alloc, double slack) {
  if (alloc.split.size() != inst.num_paths()) return false;
  const FlowLayout& l = inst.layout();
  for (std::size_t d = 0; d < l.num_demands(); ++d) {
    double sum = 0.0;
    for (std::size_t p = l.demand_first_path[d]; p < l.demand_first_path[d + 1]; ++p) {
      const double f = alloc.split[p];
      if (!std::isfinite(f) || f < 0.0) return false;
      sum += f;
    }
    if (sum > 1.0 + slack) return false;
  }
  return true;
}

ObjectiveSpec ObjectiveSpec::delay_penalized(const Topology& topo, double per_unit) {
  ObjectiveSpec spec{ObjectiveKind::DelayPenalizedFlow, {}};
  for (const Edge& e : topo.edges()) spec.delay_coefficients.push_back(per_unit * e.delay_weight);
  return spec;
}

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::TotalFlow: return "total-flow";
    case ObjectiveKind::MaxLinkUtilization: return "mlu";
    case ObjectiveKind::DelayPenalizedFlow: return "delay-penalized";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(const std::string& name) {
  if (name == "total-flow") return ObjectiveKind::TotalFlow;
  if (name == "mlu") return ObjectiveKind::MaxLinkUtilization;
  if (name == "delay-penalized") return ObjectiveKind::DelayPenalizedFlow;
  throw ValidationError("unknown objective '" + name + "'");
}

namespace {

void check_size(const TeInstance& inst, const FlowAllocation& alloc) {
  if (alloc.split.size() != inst.num_paths()) {
    throw ValidationError("allocation size does not match instance");
  }
}

}  // namespace

std::vector<double> link_loads(const TeInstance& inst, const FlowAllocation& alloc) {
  check_size(inst, alloc);
  const FlowLayout& l = inst.layout();
  std::vector<double> loads(inst.num_edges(), 0.0);
  for (std::size_t p = 0; p < l.num_paths(); ++p) {
    const double flow = alloc.split[p] * inst.volume(l.path_demand[p]);
    if (flow == 0.0) continue;
    for (EdgeIndex e : l.path_edges(p)) loads[e] += flow;
  }
  return loads;
}

double intended_total_flow(const TeInstance& inst, const FlowAllocation& alloc) {
  check_size(inst, alloc);
  const FlowLayout& l = inst.layout();
  double total = 0.0;
  for (std::size_t p = 0; p < l.num_paths(); ++p) {
    total += alloc.split[p] * inst.volume(l.path_demand[p]);
  }
  return total;
}

std::vector<double> drop_factors(const TeInstance& inst, std::span<const double> loads) {
  const FlowLayout& l = inst.layout();
  std::vector<double> edge_factor(inst.num_edges(), 1.0);
  for (EdgeIndex e = 0; e < inst.num_edges(); ++e) {
    if (loads[e] > inst.capacity(e)) edge_factor[e] = inst.capacity(e) / loads[e];
  }
  std::vector<double> factor(l.num_paths(), 1.0);
  for (std::size_t p = 0; p < l.num_paths(); ++p) {
    double f = 1.0;
    for (EdgeIndex e : l.path_edges(p)) f = std::min(f, edge_factor[e]);
    factor[p] = f;
  }
  return factor;
}

FlowAllocation drop_to_feasible(const TeInstance& inst, const FlowAllocation& alloc) {
  const FlowLayout& l = inst.layout();
  FlowAllocation out = alloc;
  {
    const auto factor = drop_factors(inst, link_loads(inst, alloc));
    for (std::size_t p = 0; p < l.num_paths(); ++p) out.split[p] *= factor[p];
  }
  // Rounding in the products can leave a load an ulp above capacity; shave
  // the offending paths until the recomputed loads are exactly within.
  for (int pass = 0; pass < 64; ++pass) {
    const auto loads = link_loads(inst, out);
    bool clean = true;
    for (EdgeIndex e = 0; e < inst.num_edges(); ++e) {
      if (loads[e] <= inst.capacity(e)) continue;
      clean = false;
      const double ratio = inst.capacity(e) > 0.0 ? inst.capacity(e) / loads[e] : 0.0;
      for (std::size_t p : l.edge_paths[e]) {
        out.split[p] = std::nextafter(out.split[p] * ratio, 0.0);
        if (out.split[p] < 0.0) out.split[p] = 0.0;
      }
    }
    if (clean) return out;
  }
  throw NumericalError("proportional dropping did not converge");
}

double feasible_total_flow(const TeInstance& inst, const FlowAllocation& alloc) {
  const FlowLayout& l = inst.layout();
  const auto factor = drop_factors(inst, link_loads(inst, alloc));
  double total = 0.0;
  for (std::size_t p = 0; p < l.num_paths(); ++p) {
    total += alloc.split[p] * inst.volume(l.path_demand[p]) * factor[p];
  }
  return total;
}

double satisfied_demand(const TeInstance& inst, const FlowAllocation& alloc) {
  if (inst.total_demand() <= 0.0) return 1.0;
  return feasible_total_flow(inst, alloc) / inst.total_demand();
}

double max_link_utilization(const TeInstance& inst, const FlowAllocation& alloc) {
  const auto loads = link_loads(inst, alloc);
  double mlu = 0.0;
  for (EdgeIndex e = 0; e < inst.num_edges(); ++e) {
    if (inst.capacity(e) > 0.0) {
      mlu = std::max(mlu, loads[e] / inst.capacity(e));
    } else if (loads[e] > 0.0) {
      return kInfiniteUtilization;
    }
  }
  return mlu;
}

double delay_penalized_flow(const TeInstance& inst, const FlowAllocation& alloc,
                            std::span<const double> coefficients) {
  if (coefficients.size() != inst.num_edges()) {
    throw ValidationError("delay coefficient vector size mismatch");
  }
  const auto loads = link_loads(inst, alloc);
  double penalty = 0.0;
  for (EdgeIndex e = 0; e < inst.num_edges(); ++e) penalty += coefficients[e] * loads[e];
  return intended_total_flow(inst, alloc) - penalty;
}

double surrogate_loss(const TeInstance& inst, const FlowAllocation& alloc) {
  const auto loads = link_loads(inst, alloc);
  double over = 0.0;
  for (EdgeIndex e = 0; e < inst.num_edges(); ++e) {
    over += std::max(0.0, loads[e] - inst.capacity(e));
  }
  return intended_total_flow(inst, alloc) - over;
}

std::vector<double> surrogate_gradient(const TeInstance& inst, const FlowAllocation& alloc) {
  const FlowLayout& l = inst.layout();
  const auto loads = link_loads(inst, alloc);
  std::vector<double> grad(l.num_paths(), 0.0);
  for (std::size_t p = 0; p < l.num_paths(); ++p) {
    const double d = inst.volume(l.path_demand[p]);
    double over_edges = 0.0;
    for (EdgeIndex e : l.path_edges(p)) {
      if (loads[e] > inst.capacity(e)) over_edges += 1.0;
    }
    grad[p] = d * (1.0 - over_edges);
  }
  return grad;
}

ObjectiveValue objective_value(const TeInstance& inst, const FlowAllocation& alloc,
                               const ObjectiveSpec& spec) {
  switch (spec.kind) {
    case ObjectiveKind::TotalFlow:
      return {intended_total_flow(inst, alloc), Orientation::Maximize};
    case ObjectiveKind::MaxLinkUtilization:
      return {max_link_utilization(inst, alloc), Orientation::Minimize};
    case ObjectiveKind::DelayPenalizedFlow:
      return {delay_penalized_flow(inst, alloc, spec.delay_coefficients), Orientation::Maximize};
  }
  throw ValidationError("unknown objective");
}

ObjectiveValue deployed_objective(const TeInstance& inst, const FlowAllocation& alloc,
                                  const ObjectiveSpec& spec) {
  switch (spec.kind) {
    case ObjectiveKind::TotalFlow:
      return {feasible_total_flow(inst, alloc), Orientation::Maximize};
    case ObjectiveKind::MaxLinkUtilization:
      return {max_link_utilization(inst, alloc), Orientation::Minimize};
    case ObjectiveKind::DelayPenalizedFlow:
      return {delay_penalized_flow(inst, drop_to_feasible(inst, alloc), spec.delay_coefficients),
              Orientation::Maximize};
  }
  throw ValidationError("unknown objective");
}

std::string format_allocation(const TeInstance& inst, const FlowAllocation& alloc) {
  check_size(inst, alloc);
  const FlowLayout& l = inst.layout();
  const Topology& topo = inst.topology();
  std::string out = "# flowte-allocation v1\n";
  char buf[64];
  for (std::size_t d = 0; d < l.num_demands(); ++d) {
    for (std::size_t p = l.demand_first_path[d]; p < l.demand_first_path[d + 1]; ++p) {
      std::snprintf(buf, sizeof buf, "%.17g", alloc.split[p]);
      out += topo.node_name(l.demand_src[d]);
      out += '\t';
      out += topo.node_name(l.demand_dst[d]);
      out += '\t';
      out += std::to_string(p - l.demand_first_path[d]);
      out += '\t';
      out += buf;
      out += '\n';
    }
  }
  return out;
}

void write_allocation(const std::filesystem::path& file, const TeInstance& inst,
                      const FlowAllocation& alloc) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << format_allocation(inst, alloc);
}

FlowAllocation parse_allocation(std::string_view text, const TeInstance& inst) {
  const FlowLayout& l = inst.layout();
  const Topology& topo = inst.topology();
  FlowAllocation alloc = FlowAllocation::zeros(inst);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string src, dst;
    std::size_t index = 0;
    std::string ratio_text;
    if (!(fields >> src >> dst >> index >> ratio_text)) {
      throw ValidationError("allocation line " + std::to_string(line_no) + " is malformed");
    }
    auto s = topo.node_index(src);
    auto t = topo.node_index(dst);
    if (!s || !t || *s == *t) {
      throw ValidationError("allocation line " + std::to_string(line_no) + " has unknown pair");
    }
    const std::size_t n = topo.num_nodes();
    const std::size_t d = *s * (n - 1) + (*t < *s ? *t : *t - 1);
    if (index >= l.path_count(d)) {
      throw ValidationError("allocation line " + std::to_string(line_no) + " has bad path index");
    }
    alloc.split[l.demand_first_path[d] + index] = std::strtod(ratio_text.c_str(), nullptr);
  }
  return alloc;
}

FlowAllocation read_allocation(const std::filesystem::path& file, const TeInstance& inst) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_allocation(ss.str(), inst);
}

}  // namespace flowte
