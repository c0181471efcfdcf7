#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "flowte/admm.hpp"
#include "flowte/baselines.hpp"
#include "flowte/error.hpp"
#include "flowte/harness.hpp"
#include "flowte/model.hpp"
#include "flowte/rl.hpp"
#include "flowte/topology.hpp"
#include "flowte/traffic.hpp"

namespace flowte::cli {
namespace {

using nlohmann::json;

/// Bad invocation detected after flag parsing (e.g. a scheme without the
/// checkpoint it needs).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 1;
  std::string config;
};

struct DataOptions {
  std::string topology;
  std::string traffic;
};

struct SplitOptions {
  std::string split = "test";
  std::size_t train = 700;
  std::size_t validation = 100;
  std::size_t test = 200;
};

struct ObjectiveOptions {
  std::string objective = "total-flow";
  double delay_per_unit = 0.1;
};

struct SchemeOptions {
  std::string checkpoint;
  std::string direct_checkpoint;
  double fraction = 0.10;
  std::optional<std::size_t> iterations;
  double rho = kDefaultRho;
};

struct EvalFlags {
  double budget = 300.0;
  std::optional<std::size_t> delay;
  std::size_t repeats = 1;
  std::size_t pairs = 10;
  bool no_timing = false;
  std::string out_dir;
};

void add_data(CLI::App* app, DataOptions& o, bool traffic = true) {
  app->add_option("--topology", o.topology, "Topology document")->required()->envname("FLOWTE_TOPOLOGY");
  if (traffic) {
    app->add_option("--traffic", o.traffic, "Trace file")->required()->envname("FLOWTE_TRAFFIC");
  }
}

void add_split(CLI::App* app, SplitOptions& o, bool choose) {
  if (choose) {
    app->add_option("--split", o.split, "Trace segment to use")
        ->check(CLI::IsMember({"train", "validation", "test", "all"}))
        ->capture_default_str();
  }
  app->add_option("--train-intervals", o.train)->capture_default_str();
  app->add_option("--validation-intervals", o.validation)->capture_default_str();
  app->add_option("--test-intervals", o.test)->capture_default_str();
}

void add_objective(CLI::App* app, ObjectiveOptions& o) {
  app->add_option("--objective", o.objective)
      ->check(CLI::IsMember({"total-flow", "mlu", "delay-penalized"}))
      ->capture_default_str();
  app->add_option("--delay-per-unit", o.delay_per_unit, "Delay penalty per unit of delay weight")
      ->capture_default_str();
}

void add_scheme(CLI::App* app, SchemeOptions& o) {
  app->add_option("--checkpoint", o.checkpoint, "Model checkpoint for teal variants")
      ->envname("FLOWTE_CHECKPOINT");
  app->add_option("--fraction", o.fraction, "lp-top demand fraction")->capture_default_str();
  app->add_option("--iterations", o.iterations, "ADMM sweeps (default by topology size)");
  app->add_option("--rho", o.rho, "ADMM penalty")->capture_default_str();
}

void add_eval(CLI::App* app, EvalFlags& o) {
  app->add_option("--budget", o.budget, "Online interval budget, seconds")->capture_default_str();
  app->add_option("--delay", o.delay, "Force every allocation to become active this many intervals late");
  app->add_option("--repeats", o.repeats, "Timing repeats per interval")->capture_default_str();
  app->add_flag("--no-timing", o.no_timing, "Record zero compute time (reproducible reports)");
  app->add_option("--out-dir", o.out_dir, "Report directory")->required()->envname("FLOWTE_OUT_DIR");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path);
  f << text;
}

/// Config values are appended as flags after the user's arguments, so with
/// last-value-wins parsing they override the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw UsageError("config " + path + " must be a JSON object");
  auto scalar = [](const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number() || v.is_boolean()) return v.dump();
    throw UsageError("config values must be scalars or arrays of scalars");
  };
  for (const auto& [key, value] : doc.items()) {
    if (key == "config") throw UsageError("config files cannot include another config");
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + scalar(v);
      args.push_back(flag);
      args.push_back(joined);
    } else {
      args.push_back(flag);
      args.push_back(scalar(value));
    }
  }
  return args;
}

ObjectiveSpec objective_of(const ObjectiveOptions& o, const Topology& topo) {
  switch (parse_objective_kind(o.objective)) {
    case ObjectiveKind::TotalFlow: return ObjectiveSpec::total_flow();
    case ObjectiveKind::MaxLinkUtilization: return ObjectiveSpec::max_link_utilization();
    case ObjectiveKind::DelayPenalizedFlow: return ObjectiveSpec::delay_penalized(topo, o.delay_per_unit);
  }
  throw ValidationError("unknown objective");
}

SplitLengths lengths_of(const SplitOptions& o) { return {o.train, o.validation, o.test}; }

Trace segment(const Trace& trace, const SplitOptions& o) {
  if (o.split == "all") return trace;
  TraceSplit s = split_trace(trace, lengths_of(o));
  if (o.split == "train") return s.train;
  if (o.split == "validation") return s.validation;
  return s.test;
}

struct Loaded {
  Topology topo;
  Trace trace;
};

Loaded load(const DataOptions& o) {
  Loaded l;
  l.topo = Topology::load(o.topology);
  l.trace = read_trace(o.traffic, l.topo);
  if (l.trace.empty()) throw ValidationError("trace " + o.traffic + " has no intervals");
  return l;
}

std::vector<TeInstance> instances_of(const Topology& topo, const Trace& trace) {
  if (trace.empty()) throw ValidationError("selected trace segment is empty");
  return make_instances(TeInstance::create(topo, trace.front()), trace);
}

SchemeSpec spec_of(const std::string& name, const SchemeOptions& o) {
  SchemeSpec spec;
  spec.kind = parse_scheme_kind(name);
  spec.checkpoint = spec.kind == SchemeKind::TealDirectLoss && !o.direct_checkpoint.empty()
                        ? o.direct_checkpoint
                        : o.checkpoint;
  spec.fraction = o.fraction;
  spec.iterations = o.iterations;
  spec.rho = o.rho;
  const bool teal = spec.kind == SchemeKind::Teal || spec.kind == SchemeKind::TealNoAdmm ||
                    spec.kind == SchemeKind::TealDirectLoss;
  if (teal && spec.checkpoint.empty()) {
    throw UsageError(name + " needs --checkpoint" +
                     (spec.kind == SchemeKind::TealDirectLoss ? " (or --direct-checkpoint)" : ""));
  }
  return spec;
}

EvalOptions eval_options_of(const EvalFlags& f, ObjectiveSpec objective) {
  EvalOptions opts;
  opts.objective = std::move(objective);
  opts.interval_budget = f.budget;
  opts.timing_repeats = f.repeats;
  opts.record_timing = !f.no_timing;
  return opts;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_reports(std::ostream& out, std::span<const EvalReport> reports) {
  out << std::setprecision(6);
  for (const auto& r : reports) {
    const auto sat = r.satisfied();
    const Aggregate a = aggregate(sat);
    out << r.scheme << ' ' << r.mode << " intervals=" << a.count << " mean_satisfied=" << a.mean
        << " p50=" << a.p50 << " p90=" << a.p90 << '\n';
  }
}

// ---- subcommands ----------------------------------------------------------

struct GenTopo {
  std::string kind = "b4";
  std::size_t nodes = 8;
  std::optional<std::size_t> links;
  double capacity = 10.0;
  double upper = 5.0;
  double lower = 4.0;
  double cap_lo = 50.0;
  double cap_hi = 200.0;
  std::string out;
};

int gen_topo(const GenTopo& o, const Globals& g, std::ostream& out) {
  Topology topo;
  if (o.kind == "b4") {
    topo = topologies::b4_like();
  } else if (o.kind == "diamond") {
    topo = topologies::diamond(o.upper, o.lower);
  } else if (o.kind == "line") {
    topo = topologies::line(o.nodes, o.capacity);
  } else {
    topo = topologies::random_connected(o.nodes, o.links.value_or(o.nodes), g.seed, o.cap_lo, o.cap_hi);
  }
  write_text(o.out, topo.to_json() + "\n", out);
  return kExitOk;
}

struct GenTraffic {
  DataOptions data;
  std::size_t intervals = 1000;
  GeneratorParams params;
  double target = 0.9;
  double tolerance = 0.03;
  std::string out;
};

int gen_traffic(const GenTraffic& o, const Globals& g, std::ostream& out, std::ostream& err) {
  const Topology topo = Topology::load(o.data.topology);
  Trace trace = generate_trace(topo, o.intervals, g.seed, o.params);
  err << std::setprecision(6) << "top_decile_share=" << top_decile_share(trace);
  if (o.target > 0.0 && !trace.empty()) {
    CalibrationOptions c;
    c.target = o.target;
    c.tolerance = o.tolerance;
    CalibrationResult r = calibrate_scale(topo, trace, c);
    trace = std::move(r.trace);
    err << " scale=" << r.scale << " lp_all_satisfied=" << r.achieved;
  }
  err << '\n';
  if (o.out.empty()) {
    out << format_trace(topo, trace);
  } else {
    write_trace(o.out, topo, trace);
  }
  return kExitOk;
}

struct PathsCmd {
  DataOptions data;
  std::size_t k = 4;
  std::string out;
};

int paths_cmd(const PathsCmd& o, std::ostream& out) {
  const Topology topo = Topology::load(o.data.topology);
  write_text(o.out, k_shortest_paths(topo, o.k).to_json(topo) + "\n", out);
  return kExitOk;
}

struct TrainCmd {
  std::string variant;
  DataOptions data;
  SplitOptions split;
  ObjectiveOptions objective;
  double lr = 1e-3;
  std::size_t epochs = 40;
  std::size_t batch = 4;
  std::size_t samples = 8;
  double final_lr_fraction = 1.0;
  std::size_t validation_limit = 0;
  std::string out;
  std::string log;
};

int train_cmd(const TrainCmd& o, const Globals& g, std::ostream& out, std::ostream& err) {
  const Loaded l = load(o.data);
  const TraceSplit split = split_trace(l.trace, lengths_of(o.split));
  TrainingConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch_intervals = o.batch;
  cfg.counterfactual_samples = o.samples;
  cfg.final_lr_fraction = o.final_lr_fraction;
  cfg.validation_intervals = o.validation_limit;
  cfg.seed = g.seed;
  cfg.model.seed = g.seed;
  cfg.objective = objective_of(o.objective, l.topo);
  const TeInstance prototype = TeInstance::create(l.topo, split.train.front());
  const TrainingResult res = o.variant == "rl" ? train_rl(prototype, split, cfg)
                                               : train_direct_loss(prototype, split, cfg);
  if (!o.log.empty()) write_training_log(o.log, res.curve);
  if (res.diverged) {
    err << "error: training diverged: " << res.diagnostic << '\n';
    return kExitFailure;
  }
  save_checkpoint(o.out, res.model);
  const double best = res.curve.empty() ? 0.0 : res.curve[res.best_epoch].validation;
  out << std::setprecision(6) << "best_epoch=" << res.best_epoch << " validation=" << best << '\n';
  return kExitOk;
}

struct SolveCmd {
  std::string scheme;
  DataOptions data;
  ObjectiveOptions objective;
  SchemeOptions options;
  std::size_t interval = 0;
  std::string out;
};

TeInstance instance_at(const Loaded& l, std::size_t interval) {
  if (interval >= l.trace.size()) {
    throw ValidationError("interval " + std::to_string(interval) + " outside trace of " +
                          std::to_string(l.trace.size()));
  }
  return TeInstance::create(l.topo, l.trace[interval]);
}

int solve_cmd(const SolveCmd& o, std::ostream& out) {
  const SchemeSpec spec = spec_of(o.scheme, o.options);
  const Loaded l = load(o.data);
  const TeInstance inst = instance_at(l, o.interval);
  const ObjectiveSpec objective = objective_of(o.objective, l.topo);
  json record{{"scheme", o.scheme}, {"interval", o.interval}};
  FlowAllocation alloc;
  if (spec.kind == SchemeKind::LpAll || spec.kind == SchemeKind::LpTop) {
    const LpSolution sol = spec.kind == SchemeKind::LpAll ? solve_lp_all(inst, objective)
                                                          : solve_lp_top(inst, spec.fraction, objective);
    record["lp"] = json::parse(lp_report_record(sol));
    alloc = sol.allocation;
  } else {
    alloc = make_scheme(spec, l.topo, objective)->compute(inst);
  }
  record["satisfied_demand"] = satisfied_demand(inst, alloc);
  const double value = deployed_objective(inst, alloc, objective).value;
  record["objective"] = std::isfinite(value) ? json(value) : json("inf");
  if (!o.out.empty()) write_allocation(o.out, inst, alloc);
  out << record.dump() << '\n';
  return kExitOk;
}

struct RefineCmd {
  std::string method;
  DataOptions data;
  std::size_t interval = 0;
  std::string allocation;
  std::optional<std::size_t> iterations;
  double rho = kDefaultRho;
  std::string out;
  std::string trace;
};

int refine_cmd(const RefineCmd& o, std::ostream& out) {
  const Loaded l = load(o.data);
  const TeInstance inst = instance_at(l, o.interval);
  const FlowAllocation before = read_allocation(o.allocation, inst);
  std::vector<AdmmTraceRecord> trace;
  const FlowAllocation after =
      refine(inst, before, o.iterations.value_or(default_admm_iterations(l.topo)), o.rho, &trace);
  if (!o.out.empty()) write_allocation(o.out, inst, after);
  if (!o.trace.empty()) write_admm_trace(o.trace, trace);
  out << json{{"interval", o.interval},
              {"satisfied_before", satisfied_demand(inst, before)},
              {"satisfied_after", satisfied_demand(inst, after)},
              {"residual_before", std::hypot(trace.front().g1, trace.front().g3, trace.front().g4)},
              {"residual_after", std::hypot(trace.back().g1, trace.back().g3, trace.back().g4)}}
             .dump()
      << '\n';
  return kExitOk;
}

struct EvalCmd {
  std::string mode;
  DataOptions data;
  SplitOptions split;
  ObjectiveOptions objective;
  SchemeOptions options;
  EvalFlags flags;
  std::string scheme = "sp-pin";
};

int eval_cmd(const EvalCmd& o, const Globals& g, std::ostream& out) {
  const SchemeSpec spec = spec_of(o.scheme, o.options);
  const Loaded l = load(o.data);
  const Trace trace = segment(l.trace, o.split);
  const std::vector<TeInstance> insts = instances_of(l.topo, trace);
  const ObjectiveSpec objective = objective_of(o.objective, l.topo);
  std::unique_ptr<Scheme> scheme = make_scheme(spec, l.topo, objective);
  if (o.flags.delay) scheme = make_delayed_scheme(std::move(scheme), *o.flags.delay);
  const EvalOptions opts = eval_options_of(o.flags, objective);
  std::vector<EvalReport> reports;
  if (o.mode == "offline") {
    reports.push_back(run_offline(*scheme, insts, opts));
  } else if (o.mode == "online") {
    reports.push_back(run_online(*scheme, insts, opts));
  } else {
    const auto sets = failure_sets(insts.front(), o.flags.pairs, g.seed);
    for (auto& fr : run_failures(*scheme, insts, sets, opts)) reports.push_back(std::move(fr.report));
  }
  write_reports(o.flags.out_dir, reports, trace_hash(trace));
  print_reports(out, reports);
  return kExitOk;
}

struct CompareCmd {
  DataOptions data;
  SplitOptions split;
  ObjectiveOptions objective;
  SchemeOptions options;
  EvalFlags flags;
  std::string schemes = "teal,teal-no-admm,lp-all";
  std::string mode = "offline";
};

int compare_cmd(const CompareCmd& o, std::ostream& out) {
  const std::vector<std::string> names = split_list(o.schemes);
  if (names.empty()) throw UsageError("--schemes is empty");
  std::vector<SchemeSpec> specs;
  for (const auto& n : names) specs.push_back(spec_of(n, o.options));
  const Loaded l = load(o.data);
  const std::vector<TeInstance> insts = instances_of(l.topo, segment(l.trace, o.split));
  const ObjectiveSpec objective = objective_of(o.objective, l.topo);
  std::vector<std::unique_ptr<Scheme>> owned;
  std::vector<Scheme*> schemes;
  for (const auto& s : specs) {
    owned.push_back(make_scheme(s, l.topo, objective));
    if (o.flags.delay) owned.back() = make_delayed_scheme(std::move(owned.back()), *o.flags.delay);
    schemes.push_back(owned.back().get());
  }
  const Comparison cmp = compare(schemes, insts, o.mode, eval_options_of(o.flags, objective));
  write_reports(o.flags.out_dir, cmp.reports, cmp.trace_hash);
  print_reports(out, cmp.reports);
  for (std::size_t i = 1; i < cmp.reports.size(); ++i) {
    out << "median_delta " << cmp.reports[i].scheme << " - " << cmp.reports[0].scheme << " = "
        << median_delta(cmp.reports[i], cmp.reports[0]) << '\n';
  }
  return kExitOk;
}

struct ReportCmd {
  std::vector<std::string> records;
  std::string out_dir;
};

int report_cmd(const ReportCmd& o, std::ostream& out) {
  std::vector<EvalReport> reports;
  for (const auto& f : o.records) reports.push_back(parse_records(read_file(f)));
  write_reports(o.out_dir, reports);
  print_reports(out, reports);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learning-accelerated WAN traffic engineering", "flowte"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->envname("FLOWTE_SEED")->capture_default_str();
  app.add_option("--config", g.config, "JSON object of flag values; overrides the command line");

  GenTopo topo_o;
  auto* topo_c = app.add_subcommand("gen-topo", "Write a topology document");
  topo_c->add_option("--kind", topo_o.kind)
      ->check(CLI::IsMember({"b4", "diamond", "line", "random"}))
      ->capture_default_str();
  topo_c->add_option("--nodes", topo_o.nodes, "line/random node count")->capture_default_str();
  topo_c->add_option("--links", topo_o.links, "random: extra links beyond the spanning tree (default nodes)");
  topo_c->add_option("--capacity", topo_o.capacity, "line capacity")->capture_default_str();
  topo_c->add_option("--upper", topo_o.upper, "diamond upper-branch capacity")->capture_default_str();
  topo_c->add_option("--lower", topo_o.lower, "diamond lower-branch capacity")->capture_default_str();
  topo_c->add_option("--cap-lo", topo_o.cap_lo, "random: lowest capacity")->capture_default_str();
  topo_c->add_option("--cap-hi", topo_o.cap_hi, "random: highest capacity")->capture_default_str();
  topo_c->add_option("--out", topo_o.out, "Output file (default stdout)");

  GenTraffic traffic_o;
  auto* traffic_c = app.add_subcommand("gen-traffic", "Generate and calibrate a demand trace");
  add_data(traffic_c, traffic_o.data, false);
  traffic_c->add_option("--intervals", traffic_o.intervals)->capture_default_str();
  traffic_c->add_option("--sigma", traffic_o.params.sigma, "Log-normal shape of base rates")->capture_default_str();
  traffic_c->add_option("--walk-step", traffic_o.params.walk_step)->capture_default_str();
  traffic_c->add_option("--walk-bound", traffic_o.params.walk_bound)->capture_default_str();
  traffic_c->add_option("--noise", traffic_o.params.noise)->capture_default_str();
  traffic_c->add_option("--mean-volume", traffic_o.params.mean_volume)->capture_default_str();
  traffic_c->add_option("--target", traffic_o.target, "LP-all satisfied demand to calibrate to; 0 disables")
      ->capture_default_str();
  traffic_c->add_option("--tolerance", traffic_o.tolerance)->capture_default_str();
  traffic_c->add_option("--out", traffic_o.out, "Output file (default stdout)");

  PathsCmd paths_o;
  auto* paths_c = app.add_subcommand("paths", "List k-shortest paths for every node pair");
  add_data(paths_c, paths_o.data, false);
  paths_c->add_option("--k", paths_o.k)->capture_default_str();
  paths_c->add_option("--out", paths_o.out, "Output file (default stdout)");

  TrainCmd train_o;
  auto* train_c = app.add_subcommand("train", "Train a model checkpoint");
  train_c->add_option("variant", train_o.variant)->required()->check(CLI::IsMember({"rl", "direct-loss"}));
  add_data(train_c, train_o.data);
  add_split(train_c, train_o.split, false);
  add_objective(train_c, train_o.objective);
  train_c->add_option("--lr", train_o.lr)->capture_default_str();
  train_c->add_option("--epochs", train_o.epochs)->capture_default_str();
  train_c->add_option("--batch", train_o.batch, "Intervals per step")->capture_default_str();
  train_c->add_option("--samples", train_o.samples, "Counterfactual samples per agent")->capture_default_str();
  train_c->add_option("--final-lr-fraction", train_o.final_lr_fraction)->capture_default_str();
  train_c->add_option("--validation-limit", train_o.validation_limit,
                      "Validation intervals scored per epoch (0 = all)")
      ->capture_default_str();
  train_c->add_option("--out", train_o.out, "Checkpoint file")->required();
  train_c->add_option("--log", train_o.log, "Training log (jsonl)");

  SolveCmd solve_o;
  auto* solve_c = app.add_subcommand("solve", "Allocate one interval");
  solve_c->add_option("scheme", solve_o.scheme)
      ->required()
      ->check(CLI::IsMember({"lp-all", "lp-top", "sp-pin", "teal"}));
  add_data(solve_c, solve_o.data);
  add_objective(solve_c, solve_o.objective);
  add_scheme(solve_c, solve_o.options);
  solve_c->add_option("--interval", solve_o.interval, "Index into the trace")->capture_default_str();
  solve_c->add_option("--out", solve_o.out, "Allocation file");

  RefineCmd refine_o;
  auto* refine_c = app.add_subcommand("refine", "Refine an allocation file");
  refine_c->add_option("method", refine_o.method)->required()->check(CLI::IsMember({"admm"}));
  add_data(refine_c, refine_o.data);
  refine_c->add_option("--interval", refine_o.interval)->capture_default_str();
  refine_c->add_option("--allocation", refine_o.allocation, "Input allocation file")->required();
  refine_c->add_option("--iterations", refine_o.iterations, "Sweeps (default by topology size)");
  refine_c->add_option("--rho", refine_o.rho)->capture_default_str();
  refine_c->add_option("--out", refine_o.out, "Refined allocation file");
  refine_c->add_option("--trace", refine_o.trace, "Per-sweep diagnostics (jsonl)");

  EvalCmd eval_o;
  auto* eval_c = app.add_subcommand("eval", "Evaluate one scheme over a trace segment");
  eval_c->add_option("mode", eval_o.mode)
      ->required()
      ->check(CLI::IsMember({"online", "offline", "failures"}));
  add_data(eval_c, eval_o.data);
  add_split(eval_c, eval_o.split, true);
  add_objective(eval_c, eval_o.objective);
  add_scheme(eval_c, eval_o.options);
  add_eval(eval_c, eval_o.flags);
  eval_c->add_option("--scheme", eval_o.scheme)
      ->check(CLI::IsMember({"teal", "teal-no-admm", "teal-direct-loss", "lp-all", "lp-top", "sp-pin"}))
      ->capture_default_str();
  eval_c->add_option("--pairs", eval_o.flags.pairs, "failures: random two-link sets")->capture_default_str();

  CompareCmd compare_o;
  auto* compare_c = app.add_subcommand("compare", "Evaluate several schemes on one trace");
  add_data(compare_c, compare_o.data);
  add_split(compare_c, compare_o.split, true);
  add_objective(compare_c, compare_o.objective);
  add_scheme(compare_c, compare_o.options);
  add_eval(compare_c, compare_o.flags);
  compare_c->add_option("--schemes", compare_o.schemes, "Comma-separated scheme names")->capture_default_str();
  compare_c->add_option("--direct-checkpoint", compare_o.options.direct_checkpoint,
                        "Checkpoint for teal-direct-loss");
  compare_c->add_option("--mode", compare_o.mode)
      ->check(CLI::IsMember({"offline", "online"}))
      ->capture_default_str();

  ReportCmd report_o;
  auto* report_c = app.add_subcommand("report", "Recompute summaries from per-interval records");
  report_c->add_option("records", report_o.records, "Record files (jsonl)")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->check(CLI::ExistingFile);
  report_c->add_option("--out-dir", report_o.out_dir)->required()->envname("FLOWTE_OUT_DIR");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    if (app.get_subcommands().empty()) {
      for (std::size_t i = 0; i < raw_args.size(); ++i) {
        const std::string& a = raw_args[i];
        if (a == "--seed" || a == "--config") {
          ++i;
        } else if (a.empty() || a[0] != '-') {
          what = "unknown subcommand '" + a + "'";
          break;
        }
      }
    }
    err << "usage error: " << what << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }

  try {
    if (*topo_c) return gen_topo(topo_o, g, out);
    if (*traffic_c) return gen_traffic(traffic_o, g, out, err);
    if (*paths_c) return paths_cmd(paths_o, out);
    if (*train_c) return train_cmd(train_o, g, out, err);
    if (*solve_c) return solve_cmd(solve_o, out);
    if (*refine_c) return refine_cmd(refine_o, out);
    if (*eval_c) return eval_cmd(eval_o, g, out);
    if (*compare_c) return compare_cmd(compare_o, out);
    if (*report_c) return report_cmd(report_o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace flowte::cli
