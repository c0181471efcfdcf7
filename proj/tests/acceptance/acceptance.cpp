// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is 0 only when all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "flowte/admm.hpp"
#include "flowte/baselines.hpp"
#include "flowte/harness.hpp"
#include "flowte/model.hpp"
#include "flowte/rl.hpp"
#include "gradcheck.hpp"

using namespace flowte;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) { return percentile(std::move(v), 50.0); }

/// Shared desk-scale setup: B4-like topology, calibrated trace, trained models.
struct Fixture {
  Topology topo = topologies::b4_like();
  TraceSplit split;
  std::vector<TeInstance> test;
  std::shared_ptr<const ModelParameters> rl, direct, mlu, delay;
  ObjectiveSpec delay_spec;
  double train_seconds = 0.0;  // longest single training run
};

TrainingConfig training_config(const ObjectiveSpec& objective) {
  TrainingConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 40;
  cfg.batch_intervals = 4;
  cfg.counterfactual_samples = 8;
  cfg.seed = 1;
  cfg.model.seed = 1;
  cfg.objective = objective;
  return cfg;
}

Fixture build_fixture() {
  Fixture fx;
  fx.split = split_trace(calibrate_scale(fx.topo, generate_trace(fx.topo, 1000, 1)).trace);
  const TeInstance proto = TeInstance::create(fx.topo, fx.split.train.front());
  fx.test = make_instances(proto, fx.split.test);
  fx.delay_spec = ObjectiveSpec::delay_penalized(fx.topo, 0.1);

  struct Job {
    bool rl;
    ObjectiveSpec objective;
    std::shared_ptr<const ModelParameters>* out;
    double seconds = 0.0;
    std::string diagnostic;
  };
  std::vector<Job> jobs{{true, ObjectiveSpec::total_flow(), &fx.rl},
                        {false, ObjectiveSpec::total_flow(), &fx.direct},
                        {true, ObjectiveSpec::max_link_utilization(), &fx.mlu},
                        {true, fx.delay_spec, &fx.delay}};
  std::vector<std::thread> threads;
  for (Job& job : jobs) {
    threads.emplace_back([&job, &fx, &proto] {
      const auto start = Clock::now();
      const TrainingConfig cfg = training_config(job.objective);
      TrainingResult r = job.rl ? train_rl(proto, fx.split, cfg) : train_direct_loss(proto, fx.split, cfg);
      job.seconds = seconds_since(start);
      if (r.diverged) job.diagnostic = r.diagnostic;
      *job.out = std::make_shared<const ModelParameters>(std::move(r.model));
    });
  }
  for (auto& t : threads) t.join();
  for (const Job& job : jobs) {
    fx.train_seconds = std::max(fx.train_seconds, job.seconds);
    if (!job.diagnostic.empty()) std::fprintf(stderr, "training diverged: %s\n", job.diagnostic.c_str());
  }
  return fx;
}

// 1 -------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto start = Clock::now();
  const Topology kite({"A", "B", "C", "D"},
                      {{0, 1, 5.0}, {1, 3, 4.0}, {0, 2, 6.0}, {2, 3, 3.0}, {1, 2, 2.0}});
  const Topology triangle({"A", "B", "C"}, {{0, 1, 4.0}, {1, 0, 4.0}, {1, 2, 3.0},
                                            {2, 1, 3.0}, {0, 2, 2.0}, {2, 0, 5.0}});
  std::vector<TeInstance> cases;
  auto add = [&](const Topology& t, std::vector<std::tuple<NodeIndex, NodeIndex, double>> ds) {
    DemandMatrix m(t.num_nodes());
    for (auto [s, d, v] : ds) m.set(s, d, v);
    cases.push_back(TeInstance::create(t, m));
  };
  add(topologies::diamond(5.0, 4.0), {{0, 3, 12.0}});
  add(topologies::diamond(5.0, 4.0), {{0, 3, 7.0}});
  add(kite, {{0, 3, 9.0}});
  add(kite, {{0, 3, 9.0}, {1, 2, 2.0}});
  add(triangle, {{0, 1, 6.0}, {1, 2, 1.5}});
  add(topologies::diamond(5.0, 4.0), {{0, 3, 10.0}, {0, 1, 3.0}, {0, 2, 1.0}});

  double worst = 0.0;
  for (const TeInstance& inst : cases) {
    const double lp = solve_lp_all(inst).objective;
    const double oracle = brute_force_oracle(inst, 0.01).total_flow;
    worst = std::max(worst, std::abs(lp - oracle) / std::max(lp, 1e-12));
  }
  const double secs = seconds_since(start);
  return {worst <= 0.01 && secs < 10.0 && cases.size() >= 5,
          fmt("%zu instances, worst relative gap %.2e, %.2f s", cases.size(), worst, secs)};
}

// 2 -------------------------------------------------------------------------

double constraint_violation(const TeInstance& inst, const FlowAllocation& a) {
  const FlowLayout& l = inst.layout();
  double worst = 0.0;
  for (double f : a.split) worst = std::max(worst, -f);
  for (std::size_t d = 0; d < l.num_demands(); ++d) {
    double sum = 0.0;
    for (std::size_t p = l.demand_first_path[d]; p < l.demand_first_path[d + 1]; ++p) sum += a.split[p];
    worst = std::max(worst, sum - 1.0);
  }
  const std::vector<double> loads = link_loads(inst, a);
  for (EdgeIndex e = 0; e < inst.num_edges(); ++e) worst = std::max(worst, loads[e] - inst.capacity(e));
  return worst;
}

Outcome lp_feasibility() {
  double worst = 0.0;
  std::size_t count = 0, optimal = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Topology topo = topologies::random_connected(8 + seed % 7, 4 + seed % 5, seed);
    const double factor = 0.5 + 0.05 * static_cast<double>(seed % 60);
    const DemandMatrix m = generate_trace(topo, 1, seed).front().scaled(factor);
    const TeInstance inst = TeInstance::create(topo, m);
    const LpSolution sol = solve_lp_all(inst);
    if (sol.status == lp::Status::Optimal) ++optimal;
    worst = std::max(worst, constraint_violation(inst, sol.allocation));
    ++count;
  }
  return {worst <= 1e-7 && optimal == count,
          fmt("%zu instances, %zu optimal, worst violation %.2e", count, optimal, worst)};
}

// 3 -------------------------------------------------------------------------

Outcome gradient_correctness() {
  const Topology kite({"A", "B", "C", "D"},
                      {{0, 1, 5.0}, {1, 3, 4.0}, {0, 2, 6.0}, {2, 3, 3.0}, {1, 2, 2.0}});
  DemandMatrix dm(4);
  dm.set(0, 3, 7.0);
  dm.set(1, 3, 3.0);
  dm.set(0, 1, 2.0);
  dm.set(0, 2, 4.0);
  const TeInstance inst = TeInstance::create(kite, dm);
  ModelParameters model = ModelParameters::create(inst.topology(), {6, 4, 24, 21, -0.5});
  const std::size_t slots = 4;
  double worst = 0.0;
  std::size_t blocks = 0;
  auto check_all = [&](const ModelParameters& analytic, const std::function<double()>& f) {
    auto ts = model.tensors();
    auto gs = analytic.tensors();
    for (std::size_t k = 0; k < ts.size(); ++k) {
      worst = std::max(worst, check::central_difference(*ts[k], *gs[k], f).max_rel_error);
      ++blocks;
    }
  };

  // Policy log-probability weighted by advantages, through FlowGNN.
  {
    const ModelPass pass = model_forward(inst, model, true);
    Rng rng(4);
    std::vector<AgentSample> samples;
    double adv = 0.7;
    for (std::size_t d : active_agents(inst)) {
      samples.push_back({d, sample_action(pass.demands[d], model.policy, rng).logits, adv});
      adv = -0.6 * adv + 0.1;
    }
    check_all(reinforce_gradient(pass, model, samples), [&] {
      const ModelPass p = model_forward(inst, model, false);
      double s = 0.0;
      for (const auto& a : samples) {
        s += a.advantage * gaussian_log_prob(a.logits, p.demands[a.demand].logits,
                                             model.policy.log_var.data, p.demands[a.demand].available);
      }
      return s;
    });
  }
  // Linear functional of logits and log-variance.
  {
    std::vector<double> c(inst.num_demands() * slots), cv(slots);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (inst.layout().path_count(i / slots) > 0) c[i] = std::sin(0.37 * static_cast<double>(i));
    }
    for (std::size_t j = 0; j < slots; ++j) cv[j] = 0.5 - 0.2 * static_cast<double>(j);
    const ModelPass pass = model_forward(inst, model, true);
    check_all(model_backward(pass, model, c, cv), [&] {
      const ModelPass p = model_forward(inst, model, false);
      double s = 0.0;
      for (std::size_t d = 0; d < p.demands.size(); ++d) {
        for (std::size_t j = 0; j < slots; ++j) s += c[d * slots + j] * p.demands[d].logits[j];
      }
      for (std::size_t j = 0; j < slots; ++j) s += cv[j] * model.policy.log_var.data[j];
      return s;
    });
  }
  // Surrogate loss of the mean action.
  {
    const ModelPass pass = model_forward(inst, model, true);
    check_all(surrogate_loss_gradient(inst, pass, model),
              [&] { return surrogate_loss(inst, allocate(inst, model)) / inst.total_demand(); });
  }
  return {worst < 1e-4, fmt("%zu parameter blocks, worst relative error %.2e", blocks, worst)};
}

// 4, 5, 7, 8, 12 ---------------------------------------------------------------

struct OfflineRuns {
  EvalReport teal, teal_no_admm, direct, lp_all, lp_top, sp_pin;
};

OfflineRuns offline_runs(const Fixture& fx) {
  const std::size_t sweeps = default_admm_iterations(fx.topo);
  auto teal = make_teal_scheme(fx.rl, sweeps, "teal");
  auto no_admm = make_teal_scheme(fx.rl, 0, "teal-no-admm");
  auto direct = make_teal_scheme(fx.direct, sweeps, "teal-direct-loss");
  auto lp_all = make_lp_all_scheme();
  auto lp_top = make_lp_top_scheme();
  auto sp = make_sp_pin_scheme();
  OfflineRuns r;
  r.teal = run_offline(*teal, fx.test);
  r.teal_no_admm = run_offline(*no_admm, fx.test);
  r.direct = run_offline(*direct, fx.test);
  r.lp_all = run_offline(*lp_all, fx.test);
  r.lp_top = run_offline(*lp_top, fx.test);
  r.sp_pin = run_offline(*sp, fx.test);
  return r;
}

Outcome near_optimality(const Fixture& fx, const OfflineRuns& r) {
  const double teal = mean(r.teal.satisfied()), lp = mean(r.lp_all.satisfied());
  const double gap = (lp - teal) / lp;
  return {gap <= 0.10 && fx.train_seconds <= 7200.0,
          fmt("teal mean %.4f, LP-all mean %.4f, relative gap %.2f%%, training %.0f s", teal, lp,
              100.0 * gap, fx.train_seconds)};
}

Outcome admm_improvement(const Fixture& fx, const OfflineRuns& r) {
  const double with = median(r.teal.satisfied()), without = median(r.teal_no_admm.satisfied());
  const std::size_t sweeps = default_admm_iterations(fx.topo);
  std::size_t infeasible = 0, monotone = 0;
  for (const TeInstance& inst : fx.test) {
    const FlowAllocation start = allocate(inst, *fx.rl);
    if (residuals(warm_start(inst, start), inst).norm() <= 0.0) continue;
    ++infeasible;
    std::vector<AdmmTraceRecord> trace;
    refine(inst, start, sweeps, kDefaultRho, &trace);
    bool ok = true;
    for (std::size_t k = 1; k < trace.size(); ++k) {
      ok = ok && std::hypot(trace[k].g1, trace[k].g3, trace[k].g4) <
                     std::hypot(trace[k - 1].g1, trace[k - 1].g3, trace[k - 1].g4);
    }
    if (ok) ++monotone;
  }
  return {with >= without && monotone == infeasible,
          fmt("median teal %.4f vs teal-no-admm %.4f; residual decreased on %zu/%zu infeasible warm starts (%zu sweep)",
              with, without, monotone, infeasible, sweeps)};
}

Outcome admm_convergence() {
  DemandMatrix m(4);
  m.set(0, 3, 12.0);
  const TeInstance inst = TeInstance::create(topologies::diamond(5.0, 4.0), m);
  const double lp = solve_lp_all(inst).objective;
  AdmmState state = warm_start(inst, FlowAllocation::zeros(inst));
  for (int k = 0; k < 50; ++k) state = iterate(state, inst);
  const double admm = feasible_total_flow(inst, project(state, inst));
  const double gap = std::abs(lp - admm) / lp;
  return {gap <= 0.02, fmt("LP-all %.4f, ADMM after 50 sweeps %.4f (gap %.2f%%)", lp, admm, 100.0 * gap)};
}

Outcome feasibility_guarantee(const Fixture& fx, const OfflineRuns& r) {
  std::size_t checked = 0, violations = 0;
  auto scan = [&](const EvalReport& rep) {
    for (const auto& rec : rep.intervals) {
      ++checked;
      if (!rec.feasible) ++violations;
    }
  };
  for (const EvalReport* rep : {&r.teal, &r.teal_no_admm, &r.direct, &r.lp_all, &r.lp_top, &r.sp_pin}) scan(*rep);
  // Independent recomputation of the dropped loads for every scheme's allocation.
  const std::size_t sweeps = default_admm_iterations(fx.topo);
  std::vector<std::unique_ptr<Scheme>> schemes;
  schemes.push_back(make_teal_scheme(fx.rl, sweeps));
  schemes.push_back(make_teal_scheme(fx.rl, 0));
  schemes.push_back(make_teal_scheme(fx.direct, sweeps));
  schemes.push_back(make_lp_all_scheme());
  schemes.push_back(make_lp_top_scheme());
  schemes.push_back(make_sp_pin_scheme());
  for (auto& s : schemes) {
    for (const TeInstance& inst : fx.test) {
      const std::vector<double> loads = link_loads(inst, drop_to_feasible(inst, s->compute(inst)));
      ++checked;
      for (EdgeIndex e = 0; e < inst.num_edges(); ++e) {
        if (loads[e] > inst.capacity(e)) {
          ++violations;
          break;
        }
      }
    }
  }
  // Online runs exercise stale allocations on current demands.
  auto teal = make_teal_scheme(fx.rl, sweeps);
  auto lp = make_delayed_scheme(make_lp_all_scheme(), 2);
  scan(run_online(*teal, fx.test));
  scan(run_online(*lp, fx.test));
  return {violations == 0, fmt("%zu interval checks, %zu over capacity", checked, violations)};
}

Outcome constant_work(const Fixture& fx) {
  auto teal = make_teal_scheme(fx.rl, default_admm_iterations(fx.topo));
  for (std::size_t i = 0; i < 10; ++i) teal->compute(fx.test[i]);  // warm caches
  // Each interval's time is its fastest of 21 rounds taken over the whole
  // split, which filters contention from other tenants of the machine.
  constexpr int kRounds = 21;
  std::vector<double> best(fx.test.size(), INFINITY);
  for (int r = 0; r < kRounds; ++r) {
    for (std::size_t t = 0; t < fx.test.size(); ++t) {
      const auto start = Clock::now();
      teal->compute(fx.test[t]);
      best[t] = std::min(best[t], seconds_since(start));
    }
  }
  const Aggregate a = aggregate(best);
  const double cv = a.stddev / a.mean;
  return {cv < 0.10, fmt("mean %.3f ms, CV %.2f%% over %zu intervals (fastest of %d rounds)", 1e3 * a.mean,
                         100.0 * cv, a.count, kRounds)};
}

Outcome traffic_realism(const Fixture& fx) {
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double s = top_decile_share(generate_trace(fx.topo, 1000, seed));
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {lo >= 0.80 && hi <= 0.92, fmt("10 seeds, top-decile share in [%.4f, %.4f]", lo, hi)};
}

Outcome staleness_trend(const Fixture& fx) {
  EvalOptions opts;
  opts.record_timing = false;
  std::vector<double> curve;
  for (std::size_t delay = 0; delay <= 5; ++delay) {
    auto s = make_delayed_scheme(make_lp_all_scheme(), delay);
    curve.push_back(mean(run_online(*s, fx.test, opts).satisfied()));
  }
  bool ok = true;
  for (std::size_t i = 1; i < curve.size(); ++i) ok = ok && curve[i] <= curve[i - 1];
  std::string values;
  for (double v : curve) values += fmt("%s%.4f", values.empty() ? "" : " ", v);
  return {ok, "mean satisfied by delay 0..5: " + values};
}

Outcome objective_flexibility(const Fixture& fx) {
  EvalOptions mlu_opts;
  mlu_opts.objective = ObjectiveSpec::max_link_utilization();
  auto teal_mlu = make_teal_scheme(fx.mlu, 0, "teal-mlu");
  auto lp_mlu = make_lp_all_scheme(mlu_opts.objective);
  const double t_mlu = mean(run_offline(*teal_mlu, fx.test, mlu_opts).objectives());
  const double l_mlu = mean(run_offline(*lp_mlu, fx.test, mlu_opts).objectives());

  EvalOptions delay_opts;
  delay_opts.objective = fx.delay_spec;
  auto teal_delay = make_teal_scheme(fx.delay, 0, "teal-delay");
  auto lp_delay = make_lp_all_scheme(fx.delay_spec);
  const double t_delay = mean(run_offline(*teal_delay, fx.test, delay_opts).objectives());
  const double l_delay = mean(run_offline(*lp_delay, fx.test, delay_opts).objectives());
  return {t_mlu <= 1.5 * l_mlu && t_delay >= 0.9 * l_delay,
          fmt("MLU teal %.4f vs LP-all %.4f (ratio %.3f); delay-penalized teal %.2f vs LP-all %.2f (ratio %.3f)",
              t_mlu, l_mlu, t_mlu / l_mlu, t_delay, l_delay, t_delay / l_delay)};
}

Outcome variant_ordering(const OfflineRuns& r) {
  const double delta = median_delta(r.teal, r.direct);
  return {delta >= -0.01, fmt("median teal %.4f vs teal-direct-loss %.4f, delta %+.4f", median(r.teal.satisfied()),
                              median(r.direct.satisfied()), delta)};
}

Outcome failure_robustness(const Fixture& fx) {
  auto teal = make_teal_scheme(fx.rl, default_admm_iterations(fx.topo));
  auto lp = make_lp_all_scheme();
  const auto sets = failure_sets(fx.test.front(), 10, 1);
  const auto t = run_failures(*teal, fx.test, sets);
  const auto l = run_failures(*lp, fx.test, sets);
  bool ok = t.size() == 2 && l.size() == 2;
  std::string detail;
  for (std::size_t g = 0; g < std::min(t.size(), l.size()); ++g) {
    const double tm = mean(t[g].report.satisfied()), lm = mean(l[g].report.satisfied());
    const double gap = (lm - tm) / lm;
    ok = ok && gap <= 0.10;
    detail += fmt("%s%zu failed: teal %.4f vs LP-all %.4f (gap %.2f%%)", detail.empty() ? "" : "; ",
                  t[g].failed_links, tm, lm, 100.0 * gap);
  }
  return {ok, detail};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("criterion %2d %s: %s  (%s)\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto guarded = [](const std::function<Outcome()>& f) -> Outcome {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("error: ") + e.what()};
    }
  };

  report(1, "oracle equivalence", guarded(oracle_equivalence));
  report(2, "LP feasibility", guarded(lp_feasibility));
  report(3, "gradient correctness", guarded(gradient_correctness));
  report(6, "ADMM convergence", guarded(admm_convergence));

  const Fixture fx = build_fixture();
  report(9, "traffic realism", guarded([&] { return traffic_realism(fx); }));
  const OfflineRuns runs = offline_runs(fx);
  report(4, "near-optimality", guarded([&] { return near_optimality(fx, runs); }));
  report(5, "ADMM improvement", guarded([&] { return admm_improvement(fx, runs); }));
  report(7, "feasibility guarantee", guarded([&] { return feasibility_guarantee(fx, runs); }));
  report(8, "constant-work inference", guarded([&] { return constant_work(fx); }));
  report(10, "staleness trend", guarded([&] { return staleness_trend(fx); }));
  report(11, "objective flexibility", guarded([&] { return objective_flexibility(fx); }));
  report(12, "variant ordering", guarded([&] { return variant_ordering(runs); }));
  report(13, "failure robustness", guarded([&] { return failure_robustness(fx); }));

  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
