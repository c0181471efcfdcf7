#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowte/topology.hpp"

namespace flowte {

/// Source->destination volumes for one interval; dense n x n storage with a
/// zero diagonal.
class DemandMatrix {
 public:
  DemandMatrix() = default;
  explicit DemandMatrix(std::size_t num_nodes, std::size_t interval = 0);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t interval() const { return interval_; }
  void set_interval(std::size_t interval) { interval_ = interval; }

  double volume(NodeIndex src, NodeIndex dst) const { return volumes_[src * num_nodes_ + dst]; }
  /// Throws ValidationError for self-demands and negative/non-finite volumes.
  void set(NodeIndex src, NodeIndex dst, double volume);

  double total() const;
  std::size_t nonzero_count() const;
  std::span<const double> dense() const { return volumes_; }

  DemandMatrix scaled(double factor) const;

  bool operator==(const DemandMatrix&) const = default;

 private:
  std::size_t num_nodes_ = 0;
  std::size_t interval_ = 0;
  std::vector<double> volumes_;
};

using Trace = std::vector<DemandMatrix>;

/// Knobs of the synthetic generator. Per-pair base rates are log-normal
/// (stratified quantiles, randomly assigned to pairs); each pair's volume is
/// modulated over time by a bounded random walk in log space.
struct GeneratorParams {
  double sigma = 2.55;         // log-normal shape of base rates
  double walk_step = 0.08;     // per-interval std of the log-space walk
  double walk_bound = 0.6;     // |walk| is reflected at this bound
  double noise = 0.05;         // iid per-interval log-space jitter
  double mean_volume = 10.0;   // mean base rate before calibration
};

/// Deterministic in (topology size, intervals, seed, params). A topology with
/// fewer than two nodes yields empty matrices.
Trace generate_trace(const Topology& topo, std::size_t intervals, std::uint64_t seed,
                     const GeneratorParams& params = {});

/// Mean over intervals of the share of total volume carried by the top 10%
/// of node pairs (ranked within each interval).
double top_decile_share(const Trace& trace);

struct CalibrationOptions {
  double target = 0.9;           // LP-all offline satisfied demand
  double tolerance = 0.03;       // accepted |achieved - target|
  std::size_t sample_intervals = 12;
  std::size_t max_bisections = 40;
  std::size_t k_paths = 4;
};

struct CalibrationResult {
  double scale = 1.0;
  double achieved = 1.0;  // mean LP-all satisfied demand on the sample
  Trace trace;            // rescaled trace
};

/// Finds one scalar so LP-all satisfied demand on evenly spaced sample
/// intervals is within tolerance of the target. Scale 1 is kept when it
/// already meets the target. Throws UnreachableError when even vanishing
/// traffic cannot reach the target (e.g. unroutable pairs dominate).
CalibrationResult calibrate_scale(const Topology& topo, const Trace& trace,
                                  const CalibrationOptions& options = {});

struct TraceSplit {
  Trace train;
  Trace validation;
  Trace test;
};

struct SplitLengths {
  std::size_t train = 700;
  std::size_t validation = 100;
  std::size_t test = 200;
};

/// Contiguous, in-order, disjoint split; throws when the trace is too short.
TraceSplit split_trace(const Trace& trace, const SplitLengths& lengths = {});

/// Line-delimited `interval src dst volume` records (docs/formats.md).
void write_trace(const std::filesystem::path& file, const Topology& topo, const Trace& trace);
std::string format_trace(const Topology& topo, const Trace& trace);
Trace read_trace(const std::filesystem::path& file, const Topology& topo);
Trace parse_trace(std::string_view text, const Topology& topo);

/// Order-sensitive 64-bit hash of every volume in the trace.
std::uint64_t trace_hash(const Trace& trace);

}  // namespace flowte
