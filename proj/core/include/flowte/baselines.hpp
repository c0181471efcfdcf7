#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "flowte/simplex.hpp"
#include "flowte/te_problem.hpp"

namespace flowte {

struct LpSolution {
  FlowAllocation allocation;
  double objective = 0.0;  // deployed objective of `allocation`
  lp::Status status = lp::Status::Infeasible;
  std::size_t iterations = 0;
  double wall_seconds = 0.0;
};

/// Exact optimum of the path formulation over all demands. Total-flow and
/// delay-penalized objectives maximize routed flow under demand and capacity
/// constraints; MLU fully routes every routable demand and minimizes t with
/// load(e) <= t c(e).
LpSolution solve_lp_all(const TeInstance& inst, const ObjectiveSpec& objective = {},
                        const lp::Options& options = {});

/// LP over the top `fraction` of demands by current volume (ties by pair
/// order) against residual capacity; all other demands pinned to their
/// first path. `objective` is measured on the combined allocation after
/// proportional dropping.
LpSolution solve_lp_top(const TeInstance& inst, double fraction = 0.10,
                        const ObjectiveSpec& objective = {}, const lp::Options& options = {});

/// Indices of the demands LP-top optimizes, in rank order.
std::vector<std::size_t> top_demands(const TeInstance& inst, double fraction);

/// F_d(first path) = 1 for every demand with a path.
FlowAllocation pin_shortest_paths(const TeInstance& inst);

struct OracleResult {
  FlowAllocation allocation;
  double total_flow = 0.0;  // feasible total flow of `allocation`
  std::size_t evaluated = 0;
};

/// Exhaustive search of the split-ratio grid (step in {0.5, 0.1, 0.05, 0.01}
/// or any 1/n) maximizing feasible total flow. Only for instances with at
/// most 3 positive demands of at most 4 paths each; throws SizeError
/// otherwise or when the grid exceeds `max_points` combinations.
OracleResult brute_force_oracle(const TeInstance& inst, double grid_step,
                                std::size_t max_points = 400'000'000);

/// JSON record {status, objective, iterations, wall_seconds}.
std::string lp_report_record(const LpSolution& solution);

}  // namespace flowte
