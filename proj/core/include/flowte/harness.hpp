#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowte/admm.hpp"
#include "flowte/model.hpp"
#include "flowte/te_problem.hpp"

namespace flowte {

enum class SchemeKind { Teal, TealNoAdmm, TealDirectLoss, LpAll, LpTop, SpPin };

std::string to_string(SchemeKind kind);
/// Accepts the names printed by to_string; throws ValidationError otherwise.
SchemeKind parse_scheme_kind(const std::string& name);

struct SchemeSpec {
  SchemeKind kind = SchemeKind::SpPin;
  std::filesystem::path checkpoint;        // teal variants
  double fraction = 0.10;                  // lp-top
  std::optional<std::size_t> iterations;   // ADMM sweeps; default by topology size
  double rho = kDefaultRho;
};

/// Computes one allocation per TE instance.
class Scheme {
 public:
  virtual ~Scheme() = default;
  virtual std::string name() const = 0;
  virtual FlowAllocation compute(const TeInstance& inst) = 0;
  /// Online mode normally derives staleness from wall time; a fixed value
  /// here overrides it with that many whole budgets.
  virtual std::optional<std::size_t> forced_delay() const { return std::nullopt; }
};

/// Teal with an in-memory model. `admm_iterations` = 0 skips refinement.
std::unique_ptr<Scheme> make_teal_scheme(std::shared_ptr<const ModelParameters> model,
                                         std::size_t admm_iterations, std::string name = "teal",
                                         double rho = kDefaultRho);
std::unique_ptr<Scheme> make_lp_all_scheme(ObjectiveSpec objective = {});
std::unique_ptr<Scheme> make_lp_top_scheme(double fraction = 0.10, ObjectiveSpec objective = {});
std::unique_ptr<Scheme> make_sp_pin_scheme();
/// Wraps `inner` so every allocation becomes active `budgets` intervals late.
std::unique_ptr<Scheme> make_delayed_scheme(std::unique_ptr<Scheme> inner, std::size_t budgets);

/// Builds a scheme from its spec; loads and checks checkpoints against
/// `topo`. For objectives other than total flow, teal runs without ADMM.
std::unique_ptr<Scheme> make_scheme(const SchemeSpec& spec, const Topology& topo,
                                    const ObjectiveSpec& objective = {});

struct IntervalRecord {
  std::size_t interval = 0;
  double compute_seconds = 0.0;
  /// Interval whose computation produced the active allocation; -1 for the
  /// shortest-path bootstrap.
  std::int64_t source_interval = 0;
  double satisfied_demand = 0.0;
  double objective = 0.0;
  /// Loads after proportional dropping are within capacity, exactly.
  bool feasible = true;
};

struct Aggregate {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
};

/// Linear-interpolation percentiles, q in [0, 100].
double percentile(std::vector<double> values, double q);
Aggregate aggregate(std::span<const double> values);
/// Sorted (value, fraction <= value) points.
std::vector<std::pair<double, double>> cdf_points(std::span<const double> values);

struct EvalReport {
  std::string scheme;
  std::string mode;  // offline | online | failures-N
  std::vector<IntervalRecord> intervals;

  std::vector<double> satisfied() const;
  std::vector<double> objectives() const;
  std::vector<double> compute_seconds() const;
};

struct EvalOptions {
  ObjectiveSpec objective;
  double interval_budget = 300.0;  // seconds
  /// Timing repeats per interval; the median is recorded. The first
  /// computed allocation is the one evaluated. Offline runs take the
  /// repeats in rounds over all intervals, online runs back to back.
  std::size_t timing_repeats = 1;
  /// When false every compute time is recorded as 0 (reproducible reports;
  /// online staleness then comes only from forced delays).
  bool record_timing = true;
};

/// Applies `alloc` (computed for `source`) to the demands of `current`;
/// demands with no volume in `source` fall back to their shortest path.
FlowAllocation stale_allocation(const TeInstance& source, const TeInstance& current,
                                const FlowAllocation& alloc);

EvalReport run_offline(Scheme& scheme, std::span<const TeInstance> instances,
                       const EvalOptions& options = {});
/// Simulated clock: the allocation computed for t becomes active at
/// t + floor(seconds / budget); interval 0 starts from shortest paths.
EvalReport run_online(Scheme& scheme, std::span<const TeInstance> instances,
                      const EvalOptions& options = {});

struct FailureReport {
  std::size_t failed_links = 0;
  EvalReport report;  // one record per (interval, failure set)
};

/// Recomputes the scheme on each interval with every failure set applied.
/// Reports are grouped by the number of failed links, ascending.
std::vector<FailureReport> run_failures(Scheme& scheme, std::span<const TeInstance> instances,
                                        const std::vector<std::vector<EdgeIndex>>& failure_sets,
                                        const EvalOptions& options = {});

/// Every single-link failure set and `pairs` seeded random two-link sets
/// over the edges that carry at least one path.
std::vector<std::vector<EdgeIndex>> failure_sets(const TeInstance& inst, std::size_t pairs,
                                                 std::uint64_t seed);

struct Comparison {
  std::uint64_t trace_hash = 0;
  std::vector<EvalReport> reports;
};

/// Runs every scheme on the same instances; scheme names must be unique.
/// `mode` is "offline" or "online". Throws Error if an instance changes
/// during the run (trace hash mismatch).
Comparison compare(std::span<Scheme* const> schemes, std::span<const TeInstance> instances,
                   const std::string& mode, const EvalOptions& options = {});

/// median(a satisfied) - median(b satisfied).
double median_delta(const EvalReport& a, const EvalReport& b);

std::string format_records(const EvalReport& report);
/// Rebuilds a report from format_records output (aggregates are always
/// recomputed from the records).
EvalReport parse_records(std::string_view text);
std::string format_summary(std::span<const EvalReport> reports, std::uint64_t trace_hash = 0);
std::string format_cdf(std::span<const double> values);
std::string format_timeline(const EvalReport& report);

/// <dir>/<scheme>.<mode>.jsonl, .cdf.txt, .timeline.txt and <dir>/summary.json.
void write_reports(const std::filesystem::path& dir, std::span<const EvalReport> reports,
                   std::uint64_t trace_hash = 0);

}  // namespace flowte
