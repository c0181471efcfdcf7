#include <gtest/gtest.h>

#include <cmath>

#include "flowte/baselines.hpp"
#include "flowte/error.hpp"
#include "flowte/traffic.hpp"

using namespace flowte;

namespace {

Trace ad_trace(std::size_t n, double base) {
  Trace tr;
  for (std::size_t t = 0; t < n; ++t) {
    DemandMatrix m(4, t);
    m.set(0, 3, base * (1.0 + 0.05 * static_cast<double>(t % 3)));
    tr.push_back(m);
  }
  return tr;
}

double mean_lp_satisfied(const Topology& topo, const Trace& trace) {
  double s = 0.0;
  for (const auto& m : trace) {
    const TeInstance inst = TeInstance::create(topo, m);
    s += satisfied_demand(inst, solve_lp_all(inst).allocation);
  }
  return s / static_cast<double>(trace.size());
}

}  // namespace

TEST(DemandMatrix, RejectsSelfAndNegativeVolumes) {
  DemandMatrix m(3);
  EXPECT_THROW(m.set(1, 1, 1.0), ValidationError);
  EXPECT_THROW(m.set(0, 1, -1.0), ValidationError);
  EXPECT_THROW(m.set(0, 1, std::nan("")), ValidationError);
  m.set(0, 1, 2.0);
  m.set(2, 0, 3.0);
  EXPECT_EQ(m.total(), 5.0);
  EXPECT_EQ(m.nonzero_count(), 2u);
  EXPECT_EQ(m.scaled(2.0).volume(2, 0), 6.0);
}

TEST(Generator, DeterministicInSeed) {
  const Topology t = topologies::b4_like();
  EXPECT_EQ(generate_trace(t, 20, 9), generate_trace(t, 20, 9));
  EXPECT_NE(generate_trace(t, 20, 9), generate_trace(t, 20, 10));
  GeneratorParams p;
  p.sigma = 1.0;
  EXPECT_NE(generate_trace(t, 20, 9, p), generate_trace(t, 20, 9));
}

TEST(Generator, SingleNodeGivesEmptyMatrices) {
  const Topology t({"solo"}, {});
  const Trace tr = generate_trace(t, 5, 1);
  ASSERT_EQ(tr.size(), 5u);
  for (const auto& m : tr) EXPECT_EQ(m.total(), 0.0);
}

TEST(Generator, VolumesNonNegativeWithZeroDiagonal) {
  const Topology t = topologies::random_connected(8, 4, 2);
  const Trace tr = generate_trace(t, 50, 4);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    EXPECT_EQ(tr[i].interval(), i);
    for (NodeIndex s = 0; s < 8; ++s) {
      EXPECT_EQ(tr[i].volume(s, s), 0.0);
      for (NodeIndex d = 0; d < 8; ++d) {
        EXPECT_GE(tr[i].volume(s, d), 0.0);
        EXPECT_TRUE(std::isfinite(tr[i].volume(s, d)));
      }
    }
  }
}

TEST(Generator, TopDecileShareOnB4) {
  const Topology t = topologies::b4_like();
  const double share = top_decile_share(generate_trace(t, 1000, 1));
  EXPECT_GE(share, 0.80);
  EXPECT_LE(share, 0.92);
}

TEST(Generator, TopDecileShareAcrossSeeds) {
  const Topology t = topologies::b4_like();
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const double share = top_decile_share(generate_trace(t, 500, seed));
    EXPECT_GE(share, 0.80) << seed;
    EXPECT_LE(share, 0.92) << seed;
  }
}

TEST(Generator, TopDecileShareHandComputed) {
  // 6 ordered pairs on 3 nodes: the top decile rounds up to one pair.
  DemandMatrix m(3);
  m.set(0, 1, 90.0);
  m.set(1, 0, 10.0);
  EXPECT_NEAR(top_decile_share({m}), 0.9, 1e-12);
}

TEST(Calibration, UncongestedTargetOneKeepsScale) {
  const Topology d = topologies::diamond();
  CalibrationOptions opt;
  opt.target = 1.0;
  opt.tolerance = 0.0;
  const CalibrationResult r = calibrate_scale(d, ad_trace(6, 1.0), opt);
  EXPECT_EQ(r.scale, 1.0);
  EXPECT_EQ(r.achieved, 1.0);
  EXPECT_EQ(r.trace, ad_trace(6, 1.0));
}

TEST(Calibration, DiamondReachesTarget) {
  const Topology d = topologies::diamond();
  const CalibrationResult r = calibrate_scale(d, ad_trace(6, 40.0));
  const double s = mean_lp_satisfied(d, r.trace);
  EXPECT_GE(s, 0.87);
  EXPECT_LE(s, 0.93);
  EXPECT_NEAR(s, r.achieved, 1e-9);
}

TEST(Calibration, DoubledCapacitiesDoubleTheScale) {
  const Topology t = topologies::b4_like();
  const Trace tr = generate_trace(t, 40, 3);
  std::vector<double> caps = t.capacities();
  for (double& c : caps) c *= 2.0;
  const double a = calibrate_scale(t, tr).scale;
  const double b = calibrate_scale(t.with_capacities(caps), tr).scale;
  EXPECT_NEAR(b / a, 2.0, 0.2);
}

TEST(Calibration, UnreachableTargetIsAnError) {
  // Most ordered pairs of the one-way diamond have no path.
  const Topology d = topologies::diamond();
  EXPECT_THROW(calibrate_scale(d, generate_trace(d, 10, 2)), UnreachableError);
}

TEST(Split, DefaultLengths) {
  const Trace tr = generate_trace(topologies::line(3), 1000, 1);
  const TraceSplit s = split_trace(tr);
  ASSERT_EQ(s.train.size(), 700u);
  ASSERT_EQ(s.validation.size(), 100u);
  ASSERT_EQ(s.test.size(), 200u);
  EXPECT_EQ(s.train.back().interval(), 699u);
  EXPECT_EQ(s.validation.front().interval(), 700u);
  EXPECT_EQ(s.validation.back().interval(), 799u);
  EXPECT_EQ(s.test.front().interval(), 800u);
  EXPECT_EQ(s.test.back(), tr.back());
}

TEST(Split, Singletons) {
  const Trace tr = generate_trace(topologies::line(3), 3, 1);
  const TraceSplit s = split_trace(tr, {1, 1, 1});
  EXPECT_EQ(s.train, Trace{tr[0]});
  EXPECT_EQ(s.validation, Trace{tr[1]});
  EXPECT_EQ(s.test, Trace{tr[2]});
}

TEST(Split, TooShortIsAnError) {
  EXPECT_THROW(split_trace(generate_trace(topologies::line(3), 999, 1)), ValidationError);
}

TEST(TraceFile, RoundTripIsBitExact) {
  const Topology t = topologies::b4_like();
  const Trace tr = calibrate_scale(t, generate_trace(t, 8, 5)).trace;
  const Trace back = parse_trace(format_trace(t, tr), t);
  EXPECT_EQ(back, tr);
  EXPECT_EQ(trace_hash(back), trace_hash(tr));
}

TEST(TraceFile, RejectsMalformedRecords) {
  const Topology t = topologies::line(3);
  EXPECT_THROW(parse_trace("0\tv0\tzz\t1.0\n", t), ValidationError);
  EXPECT_THROW(parse_trace("0\tv0\tv1\t-1.0\n", t), ValidationError);
  EXPECT_THROW(parse_trace("0\tv0\tv1\n", t), ValidationError);
  EXPECT_THROW(parse_trace("0\tv0\tv0\t1.0\n", t), ValidationError);
}

TEST(TraceFile, HashIsOrderSensitive) {
  const Trace tr = generate_trace(topologies::b4_like(), 4, 2);
  Trace swapped = tr;
  std::swap(swapped[0], swapped[1]);
  EXPECT_NE(trace_hash(tr), trace_hash(swapped));
}
