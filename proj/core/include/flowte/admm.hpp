#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "flowte/te_problem.hpp"

namespace flowte {

inline constexpr double kDefaultRho = 10.0;

/// Variables of the split problem
///   min -sum d F   s.t.  sum_p F + s1 - 1 = 0        (per demand)
///                        sum_{p ni e} z + s3 - c = 0 (per edge)
///                        d F_p - z_pe = 0            (per path hop)
///                        F, s >= 0
/// Volumes and capacities are divided by `scale` (total demand by default).
/// z and lambda4 are indexed like FlowLayout::hops. Demands with zero volume
/// or no path are frozen: their F is carried through and they add no rows.
struct AdmmState {
  double rho = kDefaultRho;
  double scale = 1.0;
  std::vector<double> F;
  std::vector<double> z;
  std::vector<double> s1;
  std::vector<double> s3;
  std::vector<double> lambda1;
  std::vector<double> lambda3;
  std::vector<double> lambda4;
};

struct Residuals {
  std::vector<double> g1;
  std::vector<double> g3;
  std::vector<double> g4;

  double norm1() const;
  double norm3() const;
  double norm4() const;
  double norm() const;
};

/// `scale` <= 0 selects the instance's total demand (1 if that is zero).
AdmmState warm_start(const TeInstance& inst, const FlowAllocation& alloc, double rho = kDefaultRho,
                     double scale = 0.0);

Residuals residuals(const AdmmState& state, const TeInstance& inst);
double augmented_lagrangian(const AdmmState& state, const TeInstance& inst);
/// sum d F over active demands, in normalized units.
double admm_objective(const AdmmState& state, const TeInstance& inst);

/// Exact block minimizers of the augmented Lagrangian and the dual ascent.
void update_f(AdmmState& state, const TeInstance& inst);
void update_z(AdmmState& state, const TeInstance& inst);
void update_s(AdmmState& state, const TeInstance& inst);
void update_duals(AdmmState& state, const TeInstance& inst);

/// One sweep: z, s, F, then the duals. Throws NumericalError (with a dump
/// of the offending entries) if any variable becomes non-finite.
AdmmState iterate(const AdmmState& state, const TeInstance& inst);

/// F clipped to [0, 1], each demand renormalized when its sum exceeds 1.
FlowAllocation project(const AdmmState& state, const TeInstance& inst);

struct AdmmTraceRecord {
  std::size_t iteration = 0;
  double g1 = 0.0;
  double g3 = 0.0;
  double g4 = 0.0;
  double lagrangian = 0.0;
  double objective = 0.0;
};

AdmmTraceRecord trace_record(std::size_t iteration, const AdmmState& state, const TeInstance& inst);

/// 1 sweep below 500 nodes, 2 otherwise.
std::size_t default_admm_iterations(const Topology& topo);

/// warm_start, `iterations` sweeps, project. Record 0 is the warm start.
FlowAllocation refine(const TeInstance& inst, const FlowAllocation& alloc, std::size_t iterations,
                      double rho = kDefaultRho, std::vector<AdmmTraceRecord>* trace = nullptr);

std::string format_admm_trace(const std::vector<AdmmTraceRecord>& trace);
void write_admm_trace(const std::filesystem::path& file, const std::vector<AdmmTraceRecord>& trace);

}  // namespace flowte
