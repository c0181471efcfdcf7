#include "flowte/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "flowte/error.hpp"
#include "json.hpp"

namespace flowte {

namespace {

// Projects LP flow values onto valid split ratios.
void polish(const TeInstance& inst, FlowAllocation& alloc, std::span<const std::size_t> demands) {
  const FlowLayout& l = inst.layout();
  for (std::size_t d : demands) {
    double sum = 0.0;
    for (std::size_t p = l.demand_first_path[d]; p < l.demand_first_path[d + 1]; ++p) {
      alloc.split[p] = std::max(0.0, alloc.split[p]);
      sum += alloc.split[p];
    }
    if (sum > 1.0) {
      for (std::size_t p = l.demand_first_path[d]; p < l.demand_first_path[d + 1]; ++p) {
        alloc.split[p] /= sum;
      }
    }
  }
}

// Optimizes the split ratios of `active` demands with `fixed` providing the
// (unchanged) ratios of every other demand.
LpSolution solve_restricted(const TeInstance& inst, const ObjectiveSpec& spec,
                            std::span<const std::size_t> active, const FlowAllocation& fixed,
                            const lp::Options& options) {
  const auto start = std::chrono::steady_clock::now();
  const FlowLayout& l = inst.layout();
  const std::size_t num_edges = inst.num_edges();

  std::vector<bool> is_active(inst.num_demands(), false);
  for (std::size_t d : active) is_active[d] = true;

  FlowAllocation alloc = fixed;
  std::vector<double> fixed_load(num_edges, 0.0);
  for (std::size_t p = 0; p < l.num_paths(); ++p) {
    const std::size_t d = l.path_demand[p];
    if (is_active[d]) {
      alloc.split[p] = 0.0;
      continue;
    }
    const double flow = fixed.split[p] * inst.volume(d);
    for (EdgeIndex e : l.path_edges(p)) fixed_load[e] += flow;
  }

  // One variable per active positive-volume path: the flow x_p = F_p d.
  lp::LinearProgram program;
  std::vector<std::size_t> var_path;
  std::vector<std::size_t> path_var(l.num_paths(), SIZE_MAX);
  std::vector<std::size_t> routed;
  const bool mlu = spec.kind == ObjectiveKind::MaxLinkUtilization;
  for (std::size_t d : active) {
    if (inst.volume(d) <= 0.0 || l.path_count(d) == 0) continue;
    routed.push_back(d);
    for (std::size_t p = l.demand_first_path[d]; p < l.demand_first_path[d + 1]; ++p) {
      double coef = 1.0;
      if (spec.kind == ObjectiveKind::DelayPenalizedFlow) {
        for (EdgeIndex e : l.path_edges(p)) coef -= spec.delay_coefficients.at(e);
      } else if (mlu) {
        coef = 0.0;
      }
      path_var[p] = program.add_variable(coef);
      var_path.push_back(p);
    }
  }

  const double kappa = std::max(inst.topology().max_capacity(), 1e-12);
  std::size_t t_var = SIZE_MAX;
  if (mlu) t_var = program.add_variable(-1.0 / kappa);

  for (std::size_t d : routed) {
    std::vector<lp::Term> terms;
    for (std::size_t p = l.demand_first_path[d]; p < l.demand_first_path[d + 1]; ++p) {
      terms.push_back({path_var[p], 1.0});
    }
    program.add_constraint(std::move(terms), mlu ? lp::Sense::Equal : lp::Sense::LessEqual,
                           inst.volume(d));
  }
  for (EdgeIndex e = 0; e < num_edges; ++e) {
    std::vector<lp::Term> terms;
    for (std::size_t p : l.edge_paths[e]) {
      if (path_var[p] != SIZE_MAX) terms.push_back({path_var[p], 1.0});
    }
    if (mlu) {
      if (terms.empty() && inst.capacity(e) > 0.0) continue;
      if (terms.empty()) continue;
      terms.push_back({t_var, -inst.capacity(e) / kappa});
      program.add_constraint(std::move(terms), lp::Sense::LessEqual, -fixed_load[e]);
    } else {
      if (terms.empty()) continue;
      program.add_constraint(std::move(terms), lp::Sense::LessEqual,
                             std::max(0.0, inst.capacity(e) - fixed_load[e]));
    }
  }

  const lp::Result result = lp::solve(program, options);
  LpSolution solution;
  solution.status = result.status;
  solution.iterations = result.iterations;
  if (result.status == lp::Status::Optimal || result.status == lp::Status::IterationLimit) {
    for (std::size_t v = 0; v < var_path.size(); ++v) {
      const std::size_t p = var_path[v];
      alloc.split[p] = result.x[v] / inst.volume(l.path_demand[p]);
    }
    polish(inst, alloc, routed);
  } else {
    // No usable solution: fall back to shortest-path pinning for active demands.
    for (std::size_t d : routed) alloc.split[l.demand_first_path[d]] = 1.0;
  }
  solution.allocation = std::move(alloc);
  solution.objective = deployed_objective(inst, solution.allocation, spec).value;
  solution.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return solution;
}

}  // namespace

FlowAllocation pin_shortest_paths(const TeInstance& inst) {
  const FlowLayout& l = inst.layout();
  FlowAllocation alloc = FlowAllocation::zeros(inst);
  for (std::size_t d = 0; d < l.num_demands(); ++d) {
    if (l.path_count(d) > 0) alloc.split[l.demand_first_path[d]] = 1.0;
  }
  return alloc;
}

std::vector<std::size_t> top_demands(const TeInstance& inst, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("fraction must be in [0, 1]");
  std::vector<std::size_t> ranked;
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    if (inst.volume(d) > 0.0) ranked.push_back(d);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return inst.volume(a) > inst.volume(b);
  });
  const auto count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(ranked.size()) - 1e-9));
  ranked.resize(std::min(count, ranked.size()));
  return ranked;
}

LpSolution solve_lp_all(const TeInstance& inst, const ObjectiveSpec& objective,
                        const lp::Options& options) {
  std::vector<std::size_t> all(inst.num_demands());
  std::iota(all.begin(), all.end(), 0);
  return solve_restricted(inst, objective, all, FlowAllocation::zeros(inst), options);
}

LpSolution solve_lp_top(const TeInstance& inst, double fraction, const ObjectiveSpec& objective,
                        const lp::Options& options) {
  const auto top = top_demands(inst, fraction);
  return solve_restricted(inst, objective, top, pin_shortest_paths(inst), options);
}

OracleResult brute_force_oracle(const TeInstance& inst, double grid_step, std::size_t max_points) {
  if (!(grid_step > 0.0 && grid_step <= 1.0)) throw ValidationError("grid step must be in (0, 1]");
  const auto steps = static_cast<int>(std::lround(1.0 / grid_step));
  if (std::abs(steps * grid_step - 1.0) > 1e-9) {
    throw ValidationError("grid step must divide 1");
  }
  const FlowLayout& l = inst.layout();
  std::vector<std::size_t> demands;
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    if (inst.volume(d) > 0.0 && l.path_count(d) > 0) demands.push_back(d);
  }
  if (demands.size() > 3) throw SizeError("brute-force oracle supports at most 3 demands");
  for (std::size_t d : demands) {
    if (l.path_count(d) > 4) throw SizeError("brute-force oracle supports at most 4 paths per demand");
  }

  // Edges touched by the searched demands, renumbered densely.
  std::vector<std::size_t> local_edge(inst.num_edges(), SIZE_MAX);
  std::vector<double> cap;
  for (std::size_t d : demands) {
    for (std::size_t p = l.demand_first_path[d]; p < l.demand_first_path[d + 1]; ++p) {
      for (EdgeIndex e : l.path_edges(p)) {
        if (local_edge[e] == SIZE_MAX) {
          local_edge[e] = cap.size();
          cap.push_back(inst.capacity(e));
        }
      }
    }
  }
  const std::size_t ne = cap.size();

  struct Paths {
    std::vector<std::vector<std::size_t>> edges;  // local edge ids per path
  };
  std::vector<Paths> demand_paths;
  // Grid points per demand: integer compositions with sum <= steps.
  std::vector<std::vector<std::vector<int>>> grids;
  double total_points = 1.0;
  for (std::size_t d : demands) {
    Paths ps;
    for (std::size_t p = l.demand_first_path[d]; p < l.demand_first_path[d + 1]; ++p) {
      std::vector<std::size_t> le;
      for (EdgeIndex e : l.path_edges(p)) le.push_back(local_edge[e]);
      ps.edges.push_back(std::move(le));
    }
    const std::size_t m = ps.edges.size();
    std::vector<std::vector<int>> grid;
    std::vector<int> point(m, 0);
    auto rec = [&](auto&& self, std::size_t i, int remaining) -> void {
      if (i == m) {
        grid.push_back(point);
        return;
      }
      for (int v = 0; v <= remaining; ++v) {
        point[i] = v;
        self(self, i + 1, remaining - v);
      }
      point[i] = 0;
    };
    rec(rec, 0, steps);
    total_points *= static_cast<double>(grid.size());
    grids.push_back(std::move(grid));
    demand_paths.push_back(std::move(ps));
  }
  if (total_points > static_cast<double>(max_points)) {
    throw SizeError("brute-force grid has too many points");
  }

  // Per demand and grid point: the flow on each path and the load vector.
  struct PointData {
    std::vector<double> flows;
    std::vector<double> load;
  };
  std::vector<std::vector<PointData>> data(demands.size());
  for (std::size_t k = 0; k < demands.size(); ++k) {
    const double vol = inst.volume(demands[k]);
    for (const auto& pt : grids[k]) {
      PointData pd{std::vector<double>(pt.size()), std::vector<double>(ne, 0.0)};
      for (std::size_t j = 0; j < pt.size(); ++j) {
        pd.flows[j] = vol * static_cast<double>(pt[j]) / steps;
        for (std::size_t e : demand_paths[k].edges[j]) pd.load[e] += pd.flows[j];
      }
      data[k].push_back(std::move(pd));
    }
  }

  std::vector<std::size_t> choice(demands.size(), 0), best_choice(demands.size(), 0);
  double best = -1.0;
  std::size_t evaluated = 0;
  std::vector<std::vector<double>> partial(demands.size() + 1, std::vector<double>(ne, 0.0));
  std::vector<double> factor(ne);

  auto evaluate = [&]() {
    const auto& load = partial[demands.size()];
    for (std::size_t e = 0; e < ne; ++e) factor[e] = load[e] > cap[e] ? cap[e] / load[e] : 1.0;
    double flow = 0.0;
    for (std::size_t k = 0; k < demands.size(); ++k) {
      const PointData& pd = data[k][choice[k]];
      for (std::size_t j = 0; j < pd.flows.size(); ++j) {
        if (pd.flows[j] == 0.0) continue;
        double f = 1.0;
        for (std::size_t e : demand_paths[k].edges[j]) f = std::min(f, factor[e]);
        flow += pd.flows[j] * f;
      }
    }
    ++evaluated;
    if (flow > best + 1e-12) {
      best = flow;
      best_choice = choice;
    }
  };
  auto search = [&](auto&& self, std::size_t k) -> void {
    if (k == demands.size()) {
      evaluate();
      return;
    }
    for (std::size_t i = 0; i < data[k].size(); ++i) {
      choice[k] = i;
      const auto& load = data[k][i].load;
      for (std::size_t e = 0; e < ne; ++e) partial[k + 1][e] = partial[k][e] + load[e];
      self(self, k + 1);
    }
  };
  search(search, 0);

  OracleResult out;
  out.allocation = FlowAllocation::zeros(inst);
  for (std::size_t k = 0; k < demands.size(); ++k) {
    const auto& pt = grids[k][best_choice[k]];
    for (std::size_t j = 0; j < pt.size(); ++j) {
      out.allocation.split[l.demand_first_path[demands[k]] + j] = static_cast<double>(pt[j]) / steps;
    }
  }
  out.total_flow = feasible_total_flow(inst, out.allocation);
  out.evaluated = evaluated;
  return out;
}

std::string lp_report_record(const LpSolution& solution) {
  nlohmann::json rec{{"status", lp::to_string(solution.status)},
                     {"objective", solution.objective},
                     {"iterations", solution.iterations},
                     {"wall_seconds", solution.wall_seconds}};
  return rec.dump();
}

}  // namespace flowte
