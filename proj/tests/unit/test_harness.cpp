#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "flowte/baselines.hpp"
#include "flowte/error.hpp"
#include "flowte/harness.hpp"

using namespace flowte;

namespace {

constexpr std::size_t kAD = 2;  // (A, D) on 4 nodes

std::vector<TeInstance> b4_intervals(std::size_t n, std::uint64_t seed = 5) {
  const Topology topo = topologies::b4_like();
  const Trace trace = calibrate_scale(topo, generate_trace(topo, n, seed)).trace;
  const TeInstance proto = TeInstance::create(topo, trace.front());
  std::vector<TeInstance> out;
  for (const auto& m : trace) out.push_back(proto.with_demands(m));
  return out;
}

std::vector<TeInstance> light_line(std::size_t n) {
  const TeInstance proto = TeInstance::create(topologies::line(3, 10.0), DemandMatrix(3));
  std::vector<TeInstance> out;
  for (std::size_t t = 0; t < n; ++t) {
    DemandMatrix dm(3, t);
    dm.set(0, 2, 1.0 + 0.1 * static_cast<double>(t));
    dm.set(0, 1, 2.0);
    out.push_back(proto.with_demands(dm));
  }
  return out;
}

std::shared_ptr<const ModelParameters> untrained(const Topology& topo) {
  return std::make_shared<const ModelParameters>(ModelParameters::create(topo, {}));
}

}  // namespace

TEST(Aggregates, PercentilesInterpolate) {
  EXPECT_DOUBLE_EQ(percentile({4.0, 1.0, 3.0, 2.0}, 50.0), 2.5);
  EXPECT_DOUBLE_EQ(percentile({1.0, 2.0, 3.0, 4.0}, 90.0), 3.7);
  EXPECT_DOUBLE_EQ(percentile({7.0}, 99.0), 7.0);
  EXPECT_THROW(percentile({}, 50.0), ValidationError);
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const Aggregate a = aggregate(v);
  EXPECT_EQ(a.count, 4u);
  EXPECT_DOUBLE_EQ(a.mean, 2.5);
  EXPECT_DOUBLE_EQ(a.stddev, std::sqrt(1.25));
  EXPECT_EQ(a.min, 1.0);
  EXPECT_EQ(a.max, 4.0);
}

TEST(Aggregates, CdfMergesTies) {
  const std::vector<double> v = {0.5, 0.2, 0.5, 0.9};
  const auto pts = cdf_points(v);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0], std::make_pair(0.2, 0.25));
  EXPECT_EQ(pts[1], std::make_pair(0.5, 0.75));
  EXPECT_EQ(pts[2], std::make_pair(0.9, 1.0));
}

TEST(Offline, ShortestPathsCarryLightTraffic) {
  auto sp = make_sp_pin_scheme();
  const auto insts = light_line(4);
  const EvalReport r = run_offline(*sp, insts);
  ASSERT_EQ(r.intervals.size(), 4u);
  for (const auto& rec : r.intervals) {
    EXPECT_EQ(rec.satisfied_demand, 1.0);
    EXPECT_TRUE(rec.feasible);
  }
}

TEST(Offline, EmptyTraceGivesEmptyReport) {
  auto sp = make_sp_pin_scheme();
  const EvalReport r = run_offline(*sp, std::span<const TeInstance>{});
  EXPECT_TRUE(r.intervals.empty());
  EXPECT_EQ(aggregate(r.satisfied()).count, 0u);
}

TEST(Offline, LpAllDominatesEveryScheme) {
  const auto insts = b4_intervals(8);
  auto lp = make_lp_all_scheme();
  const EvalReport best = run_offline(*lp, insts);
  std::vector<std::unique_ptr<Scheme>> others;
  others.push_back(make_lp_top_scheme());
  others.push_back(make_sp_pin_scheme());
  others.push_back(make_teal_scheme(untrained(insts[0].topology()), 1));
  others.push_back(make_teal_scheme(untrained(insts[0].topology()), 0, "teal-no-admm"));
  for (auto& s : others) {
    const EvalReport r = run_offline(*s, insts);
    for (std::size_t t = 0; t < insts.size(); ++t) {
      EXPECT_LE(r.intervals[t].satisfied_demand, best.intervals[t].satisfied_demand + 1e-9) << s->name() << " " << t;
      EXPECT_TRUE(r.intervals[t].feasible);
    }
  }
}

TEST(Offline, TimingRepeatsEvaluateFirstAllocation) {
  struct Counting : Scheme {
    std::vector<std::size_t> order;
    std::string name() const override { return "counting"; }
    FlowAllocation compute(const TeInstance& inst) override {
      order.push_back(inst.demands().interval());
      FlowAllocation a = pin_shortest_paths(inst);
      // Later calls for the same interval route nothing.
      if (std::count(order.begin(), order.end(), order.back()) > 1) {
        a = FlowAllocation::zeros(inst);
      }
      return a;
    }
  } counting;
  const auto insts = light_line(3);
  EvalOptions opts;
  opts.timing_repeats = 3;
  const EvalReport r = run_offline(counting, insts, opts);
  EXPECT_EQ(counting.order, (std::vector<std::size_t>{0, 1, 2, 0, 1, 2, 0, 1, 2}));
  for (const auto& rec : r.intervals) {
    EXPECT_EQ(rec.satisfied_demand, 1.0);
    EXPECT_GT(rec.compute_seconds, 0.0);
  }
  opts.record_timing = false;
  counting.order.clear();
  const EvalReport quiet = run_offline(counting, insts, opts);
  EXPECT_EQ(counting.order.size(), 3u);
  for (const auto& rec : quiet.intervals) EXPECT_EQ(rec.compute_seconds, 0.0);
}

TEST(Online, FastSchemeMatchesOffline) {
  const auto insts = b4_intervals(6);
  auto lp = make_lp_all_scheme();
  const EvalReport off = run_offline(*lp, insts);
  const EvalReport on = run_online(*lp, insts);
  ASSERT_EQ(on.intervals.size(), off.intervals.size());
  for (std::size_t t = 0; t < insts.size(); ++t) {
    EXPECT_EQ(on.intervals[t].source_interval, static_cast<std::int64_t>(t));
    EXPECT_EQ(on.intervals[t].satisfied_demand, off.intervals[t].satisfied_demand);
    EXPECT_EQ(on.intervals[t].objective, off.intervals[t].objective);
  }
}

TEST(Online, ForcedDelayUsesOldAllocations) {
  const auto insts = b4_intervals(7);
  auto delayed = make_delayed_scheme(make_lp_all_scheme(), 2);
  const EvalReport on = run_online(*delayed, insts);
  auto lp = make_lp_all_scheme();
  for (std::size_t t = 0; t < insts.size(); ++t) {
    const auto& rec = on.intervals[t];
    if (t < 2) {
      EXPECT_EQ(rec.source_interval, -1);
      EXPECT_EQ(rec.satisfied_demand, satisfied_demand(insts[t], pin_shortest_paths(insts[t])));
    } else {
      EXPECT_EQ(rec.source_interval, static_cast<std::int64_t>(t - 2));
      const FlowAllocation old = lp->compute(insts[t - 2]);
      EXPECT_DOUBLE_EQ(rec.satisfied_demand,
                       satisfied_demand(insts[t], stale_allocation(insts[t - 2], insts[t], old)));
    }
  }
  const EvalReport off = run_offline(*lp, insts);
  EXPECT_LE(aggregate(on.satisfied()).mean, aggregate(off.satisfied()).mean);
}

TEST(Online, SlowSchemeStalenessFollowsBudget) {
  // A budget far below any compute time pushes every allocation past the end.
  const auto insts = b4_intervals(3);
  auto lp = make_lp_all_scheme();
  EvalOptions opt;
  opt.interval_budget = 1e-12;
  const EvalReport on = run_online(*lp, insts, opt);
  for (const auto& rec : on.intervals) EXPECT_EQ(rec.source_interval, -1);
}

TEST(Online, StaleAbsentPairsUseShortestPath) {
  const TeInstance prev = TeInstance::create(topologies::diamond(), DemandMatrix(4));
  DemandMatrix now(4);
  now.set(0, 3, 3.0);
  const TeInstance cur = prev.with_demands(now);
  FlowAllocation old = FlowAllocation::zeros(prev);
  const std::size_t p = prev.layout().demand_first_path[kAD];
  old.split[p + 1] = 1.0;
  const FlowAllocation stale = stale_allocation(prev, cur, old);
  EXPECT_EQ(stale.split[p], 1.0);
  EXPECT_EQ(stale.split[p + 1], 0.0);

  DemandMatrix before(4);
  before.set(0, 3, 1.0);
  const FlowAllocation kept = stale_allocation(prev.with_demands(before), cur, old);
  EXPECT_EQ(kept.split[p + 1], 1.0);
}

TEST(Failures, EmptySetMatchesOffline) {
  const auto insts = b4_intervals(3);
  auto lp = make_lp_all_scheme();
  const auto reports = run_failures(*lp, insts, {{}});
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].failed_links, 0u);
  const EvalReport off = run_offline(*lp, insts);
  for (std::size_t t = 0; t < insts.size(); ++t) {
    EXPECT_EQ(reports[0].report.intervals[t].satisfied_demand, off.intervals[t].satisfied_demand);
  }
}

TEST(Failures, UnusedEdgeChangesNothing) {
  // Edge B->D carries nothing when the only demand is A->C.
  DemandMatrix dm(4);
  dm.set(0, 2, 3.0);
  const TeInstance inst = TeInstance::create(topologies::diamond(), dm);
  auto sp = make_sp_pin_scheme();
  const std::vector<TeInstance> one = {inst};
  const auto reports = run_failures(*sp, one, {{}, {1}});
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[1].report.intervals[0].satisfied_demand, reports[0].report.intervals[0].satisfied_demand);
}

TEST(Failures, DiamondUpperBranchLoss) {
  DemandMatrix dm(4);
  dm.set(0, 3, 12.0);
  const std::vector<TeInstance> one = {TeInstance::create(topologies::diamond(), dm)};
  auto lp = make_lp_all_scheme();
  const auto reports = run_failures(*lp, one, {{}, {1}});
  EXPECT_NEAR(reports[0].report.intervals[0].satisfied_demand, 9.0 / 12.0, 1e-9);
  EXPECT_NEAR(reports[1].report.intervals[0].satisfied_demand, 4.0 / 12.0, 1e-9);
  EXPECT_EQ(reports[1].report.mode, "failures-1");
}

TEST(Failures, SameCheckpointAcrossFailures) {
  const auto insts = b4_intervals(2);
  auto teal = make_teal_scheme(untrained(insts[0].topology()), 1);
  const auto sets = failure_sets(insts[0], 3, 9);
  const auto reports = run_failures(*teal, insts, sets);
  ASSERT_EQ(reports.size(), 2u);
  for (const auto& f : reports) {
    for (const auto& rec : f.report.intervals) EXPECT_TRUE(rec.feasible);
  }
}

TEST(Failures, SetGeneration) {
  const auto insts = b4_intervals(1);
  const auto sets = failure_sets(insts[0], 5, 3);
  std::size_t singles = 0, pairs = 0;
  for (const auto& s : sets) {
    if (s.size() == 1) ++singles;
    if (s.size() == 2) {
      ++pairs;
      EXPECT_LT(s[0], s[1]);
    }
  }
  EXPECT_EQ(singles, insts[0].num_edges());
  EXPECT_EQ(pairs, 5u);
  EXPECT_EQ(failure_sets(insts[0], 5, 3), sets);
}

TEST(Compare, DuplicatesRejected) {
  const auto insts = light_line(2);
  auto a = make_sp_pin_scheme();
  auto b = make_sp_pin_scheme();
  std::vector<Scheme*> list = {a.get(), b.get()};
  EXPECT_THROW(compare(list, insts, "offline"), ValidationError);
  std::vector<Scheme*> single = {a.get()};
  EXPECT_THROW(compare(single, insts, "sideways"), ValidationError);
}

TEST(Compare, SingleSchemeEqualsItsReport) {
  const auto insts = b4_intervals(4);
  auto lp = make_lp_top_scheme();
  std::vector<Scheme*> list = {lp.get()};
  const Comparison c = compare(list, insts, "offline");
  ASSERT_EQ(c.reports.size(), 1u);
  EXPECT_EQ(c.reports[0].satisfied(), run_offline(*lp, insts).satisfied());
  Trace t;
  for (const auto& i : insts) t.push_back(i.demands());
  EXPECT_EQ(c.trace_hash, trace_hash(t));
}

TEST(Compare, AdmmDeltaIsReported) {
  const auto insts = b4_intervals(6);
  auto model = untrained(insts[0].topology());
  auto with = make_teal_scheme(model, 1);
  auto without = make_teal_scheme(model, 0, "teal-no-admm");
  std::vector<Scheme*> list = {without.get(), with.get()};
  const Comparison c = compare(list, insts, "offline");
  EXPECT_GE(median_delta(c.reports[1], c.reports[0]), 0.0);
  const std::string summary = format_summary(c.reports, c.trace_hash);
  EXPECT_NE(summary.find("median_satisfied_delta_vs_teal-no-admm"), std::string::npos);
}

TEST(Reports, RecordsRoundTrip) {
  const auto insts = b4_intervals(3);
  auto delayed = make_delayed_scheme(make_sp_pin_scheme(), 1);
  const EvalReport r = run_online(*delayed, insts);
  const EvalReport back = parse_records(format_records(r));
  EXPECT_EQ(back.scheme, r.scheme);
  EXPECT_EQ(back.mode, "online");
  ASSERT_EQ(back.intervals.size(), r.intervals.size());
  for (std::size_t i = 0; i < r.intervals.size(); ++i) {
    EXPECT_EQ(back.intervals[i].source_interval, r.intervals[i].source_interval);
    EXPECT_EQ(back.intervals[i].satisfied_demand, r.intervals[i].satisfied_demand);
    EXPECT_EQ(back.intervals[i].compute_seconds, r.intervals[i].compute_seconds);
  }
  const std::vector<EvalReport> one = {r}, other = {back};
  EXPECT_EQ(format_summary(one), format_summary(other));
  EXPECT_THROW(parse_records("{\"scheme\":1}\n"), ValidationError);
}

TEST(Reports, FilesWritten) {
  const auto insts = light_line(3);
  auto sp = make_sp_pin_scheme();
  const std::vector<EvalReport> reports = {run_offline(*sp, insts)};
  const auto dir = std::filesystem::temp_directory_path() / "flowte_harness_reports";
  std::filesystem::remove_all(dir);
  write_reports(dir, reports, 42);
  for (const char* f : {"sp-pin.offline.jsonl", "sp-pin.offline.cdf.txt", "sp-pin.offline.timeline.txt", "summary.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_EQ(format_timeline(reports[0]), "0\t1\n1\t1\n2\t1\n");
  std::filesystem::remove_all(dir);
}

TEST(Schemes, SpecValidation) {
  const Topology topo = topologies::b4_like();
  SchemeSpec spec;
  spec.kind = SchemeKind::Teal;
  EXPECT_THROW(make_scheme(spec, topo), ValidationError);
  spec.checkpoint = "/nonexistent/model.json";
  EXPECT_THROW(make_scheme(spec, topo), ValidationError);

  const auto dir = std::filesystem::temp_directory_path();
  const auto file = dir / "flowte_harness_diamond_model.json";
  save_checkpoint(file, ModelParameters::create(topologies::diamond(), {}));
  spec.checkpoint = file;
  EXPECT_THROW(make_scheme(spec, topo), ValidationError);
  EXPECT_NO_THROW(make_scheme(spec, topologies::diamond()));
  std::filesystem::remove(file);

  EXPECT_EQ(parse_scheme_kind("teal-direct-loss"), SchemeKind::TealDirectLoss);
  EXPECT_THROW(parse_scheme_kind("ncflow"), ValidationError);
  spec.kind = SchemeKind::LpTop;
  spec.fraction = 0.0;
  EXPECT_THROW(make_scheme(spec, topo), ValidationError);
}
