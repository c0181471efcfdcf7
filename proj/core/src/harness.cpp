#include "flowte/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "flowte/baselines.hpp"
#include "flowte/error.hpp"
#include "flowte/random.hpp"
#include "json.hpp"

namespace flowte {

namespace {

using Clock = std::chrono::steady_clock;

class TealScheme : public Scheme {
 public:
  TealScheme(std::shared_ptr<const ModelParameters> model, std::size_t iterations, std::string name, double rho)
      : model_(std::move(model)), iterations_(iterations), name_(std::move(name)), rho_(rho) {
    if (!model_) throw ValidationError("teal scheme needs a model");
  }
  std::string name() const override { return name_; }
  FlowAllocation compute(const TeInstance& inst) override {
    FlowAllocation alloc = allocate(inst, *model_);
    if (iterations_ > 0) alloc = refine(inst, alloc, iterations_, rho_);
    return alloc;
  }

 private:
  std::shared_ptr<const ModelParameters> model_;
  std::size_t iterations_;
  std::string name_;
  double rho_;
};

class LpAllScheme : public Scheme {
 public:
  explicit LpAllScheme(ObjectiveSpec objective) : objective_(std::move(objective)) {}
  std::string name() const override { return "lp-all"; }
  FlowAllocation compute(const TeInstance& inst) override {
    LpSolution s = solve_lp_all(inst, objective_);
    if (s.status != lp::Status::Optimal) throw NumericalError("lp-all: " + lp::to_string(s.status));
    return std::move(s.allocation);
  }

 private:
  ObjectiveSpec objective_;
};

class LpTopScheme : public Scheme {
 public:
  LpTopScheme(double fraction, ObjectiveSpec objective) : fraction_(fraction), objective_(std::move(objective)) {}
  std::string name() const override { return "lp-top"; }
  FlowAllocation compute(const TeInstance& inst) override {
    LpSolution s = solve_lp_top(inst, fraction_, objective_);
    if (s.status != lp::Status::Optimal) throw NumericalError("lp-top: " + lp::to_string(s.status));
    return std::move(s.allocation);
  }

 private:
  double fraction_;
  ObjectiveSpec objective_;
};

class SpPinScheme : public Scheme {
 public:
  std::string name() const override { return "sp-pin"; }
  FlowAllocation compute(const TeInstance& inst) override { return pin_shortest_paths(inst); }
};

class DelayedScheme : public Scheme {
 public:
  DelayedScheme(std::unique_ptr<Scheme> inner, std::size_t budgets)
      : inner_(std::move(inner)), budgets_(budgets) {}
  std::string name() const override { return inner_->name() + "+delay" + std::to_string(budgets_); }
  FlowAllocation compute(const TeInstance& inst) override { return inner_->compute(inst); }
  std::optional<std::size_t> forced_delay() const override { return budgets_; }

 private:
  std::unique_ptr<Scheme> inner_;
  std::size_t budgets_;
};

struct Timed {
  FlowAllocation alloc;
  double seconds = 0.0;
};

Timed timed_compute(Scheme& scheme, const TeInstance& inst, const EvalOptions& options) {
  Timed out;
  if (!options.record_timing) {
    out.alloc = scheme.compute(inst);
    return out;
  }
  std::vector<double> times;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, options.timing_repeats); ++r) {
    const auto t0 = Clock::now();
    FlowAllocation a = scheme.compute(inst);
    times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    if (r == 0) out.alloc = std::move(a);
  }
  out.seconds = percentile(times, 50.0);
  return out;
}

IntervalRecord evaluate(const TeInstance& inst, const FlowAllocation& alloc, const ObjectiveSpec& objective) {
  IntervalRecord rec;
  const FlowAllocation dropped = drop_to_feasible(inst, alloc);
  const auto loads = link_loads(inst, dropped);
  for (std::size_t e = 0; e < loads.size(); ++e) rec.feasible = rec.feasible && loads[e] <= inst.capacity(e);
  rec.satisfied_demand = satisfied_demand(inst, alloc);
  rec.objective = deployed_objective(inst, alloc, objective).value;
  return rec;
}

Trace demands_of(std::span<const TeInstance> instances) {
  Trace t;
  t.reserve(instances.size());
  for (const auto& inst : instances) t.push_back(inst.demands());
  return t;
}

nlohmann::ordered_json aggregate_json(const std::vector<double>& values) {
  const Aggregate a = aggregate(values);
  return {{"count", a.count}, {"mean", a.mean}, {"stddev", a.stddev}, {"min", a.min},
          {"max", a.max},     {"p50", a.p50},   {"p90", a.p90},       {"p99", a.p99}};
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

}  // namespace

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::Teal: return "teal";
    case SchemeKind::TealNoAdmm: return "teal-no-admm";
    case SchemeKind::TealDirectLoss: return "teal-direct-loss";
    case SchemeKind::LpAll: return "lp-all";
    case SchemeKind::LpTop: return "lp-top";
    case SchemeKind::SpPin: return "sp-pin";
  }
  return "?";
}

SchemeKind parse_scheme_kind(const std::string& name) {
  for (SchemeKind k : {SchemeKind::Teal, SchemeKind::TealNoAdmm, SchemeKind::TealDirectLoss, SchemeKind::LpAll,
                       SchemeKind::LpTop, SchemeKind::SpPin}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown scheme '" + name + "'");
}

std::unique_ptr<Scheme> make_teal_scheme(std::shared_ptr<const ModelParameters> model, std::size_t admm_iterations,
                                         std::string name, double rho) {
  return std::make_unique<TealScheme>(std::move(model), admm_iterations, std::move(name), rho);
}

std::unique_ptr<Scheme> make_lp_all_scheme(ObjectiveSpec objective) {
  return std::make_unique<LpAllScheme>(std::move(objective));
}

std::unique_ptr<Scheme> make_lp_top_scheme(double fraction, ObjectiveSpec objective) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("lp-top fraction must be in (0, 1]");
  return std::make_unique<LpTopScheme>(fraction, std::move(objective));
}

std::unique_ptr<Scheme> make_sp_pin_scheme() { return std::make_unique<SpPinScheme>(); }

std::unique_ptr<Scheme> make_delayed_scheme(std::unique_ptr<Scheme> inner, std::size_t budgets) {
  return std::make_unique<DelayedScheme>(std::move(inner), budgets);
}

std::unique_ptr<Scheme> make_scheme(const SchemeSpec& spec, const Topology& topo, const ObjectiveSpec& objective) {
  switch (spec.kind) {
    case SchemeKind::LpAll: return make_lp_all_scheme(objective);
    case SchemeKind::LpTop: return make_lp_top_scheme(spec.fraction, objective);
    case SchemeKind::SpPin: return make_sp_pin_scheme();
    case SchemeKind::Teal:
    case SchemeKind::TealNoAdmm:
    case SchemeKind::TealDirectLoss: {
      if (spec.checkpoint.empty()) throw ValidationError(to_string(spec.kind) + " needs a model checkpoint");
      if (!std::filesystem::exists(spec.checkpoint)) {
        throw ValidationError("checkpoint " + spec.checkpoint.string() + " does not exist");
      }
      auto model = std::make_shared<const ModelParameters>(load_checkpoint(spec.checkpoint));
      check_model_matches(*model, topo);
      std::size_t iterations = spec.iterations.value_or(default_admm_iterations(topo));
      if (spec.kind == SchemeKind::TealNoAdmm || objective.kind != ObjectiveKind::TotalFlow) iterations = 0;
      return make_teal_scheme(std::move(model), iterations, to_string(spec.kind), spec.rho);
    }
  }
  throw ValidationError("unknown scheme");
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  const std::vector<double> v(values.begin(), values.end());
  a.min = *std::min_element(v.begin(), v.end());
  a.max = *std::max_element(v.begin(), v.end());
  a.p50 = percentile(v, 50.0);
  a.p90 = percentile(v, 90.0);
  a.p99 = percentile(v, 99.0);
  return a;
}

std::vector<std::pair<double, double>> cdf_points(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out.emplace_back(v[i], static_cast<double>(i + 1) / static_cast<double>(v.size()));
  }
  return out;
}

std::vector<double> EvalReport::satisfied() const {
  std::vector<double> out;
  for (const auto& r : intervals) out.push_back(r.satisfied_demand);
  return out;
}

std::vector<double> EvalReport::objectives() const {
  std::vector<double> out;
  for (const auto& r : intervals) out.push_back(r.objective);
  return out;
}

std::vector<double> EvalReport::compute_seconds() const {
  std::vector<double> out;
  for (const auto& r : intervals) out.push_back(r.compute_seconds);
  return out;
}

FlowAllocation stale_allocation(const TeInstance& source, const TeInstance& current, const FlowAllocation& alloc) {
  if (source.num_paths() != current.num_paths() || alloc.split.size() != current.num_paths()) {
    throw ValidationError("stale allocation from a different path layout");
  }
  const FlowLayout& layout = current.layout();
  FlowAllocation out = alloc;
  for (std::size_t d = 0; d < current.num_demands(); ++d) {
    if (source.volume(d) > 0.0 || layout.path_count(d) == 0) continue;
    const std::size_t first = layout.demand_first_path[d];
    for (std::size_t p = first; p < layout.demand_first_path[d + 1]; ++p) out.split[p] = 0.0;
    out.split[first] = 1.0;
  }
  return out;
}

EvalReport run_offline(Scheme& scheme, std::span<const TeInstance> instances, const EvalOptions& options) {
  EvalReport report{scheme.name(), "offline", {}};
  EvalOptions once = options;
  once.timing_repeats = 1;
  std::vector<std::vector<double>> times(instances.size());
  for (std::size_t t = 0; t < instances.size(); ++t) {
    const Timed c = timed_compute(scheme, instances[t], once);
    times[t].push_back(c.seconds);
    IntervalRecord rec = evaluate(instances[t], c.alloc, options.objective);
    rec.interval = t;
    rec.source_interval = static_cast<std::int64_t>(t);
    report.intervals.push_back(rec);
  }
  // Further repeats go round-robin over the whole split so slow drift in
  // machine speed lands on every interval alike.
  if (options.record_timing) {
    for (std::size_t r = 1; r < options.timing_repeats; ++r) {
      for (std::size_t t = 0; t < instances.size(); ++t) times[t].push_back(timed_compute(scheme, instances[t], once).seconds);
    }
  }
  for (std::size_t t = 0; t < instances.size(); ++t) report.intervals[t].compute_seconds = percentile(times[t], 50.0);
  return report;
}

EvalReport run_online(Scheme& scheme, std::span<const TeInstance> instances, const EvalOptions& options) {
  if (!(options.interval_budget > 0.0)) throw ValidationError("interval budget must be positive");
  EvalReport report{scheme.name(), "online", {}};
  struct Pending {
    std::size_t source;
    std::size_t ready;
    FlowAllocation alloc;
  };
  std::vector<Pending> done;
  std::optional<std::size_t> active;  // index into done
  for (std::size_t t = 0; t < instances.size(); ++t) {
    const Timed c = timed_compute(scheme, instances[t], options);
    const std::size_t delay = scheme.forced_delay().value_or(
        static_cast<std::size_t>(std::floor(c.seconds / options.interval_budget)));
    done.push_back({t, t + delay, c.alloc});
    for (std::size_t i = 0; i < done.size(); ++i) {
      if (done[i].ready <= t && (!active || done[i].source > done[*active].source)) active = i;
    }
    IntervalRecord rec;
    if (active) {
      const Pending& p = done[*active];
      rec = evaluate(instances[t], stale_allocation(instances[p.source], instances[t], p.alloc), options.objective);
      rec.source_interval = static_cast<std::int64_t>(p.source);
    } else {
      rec = evaluate(instances[t], pin_shortest_paths(instances[t]), options.objective);
      rec.source_interval = -1;
    }
    rec.interval = t;
    rec.compute_seconds = c.seconds;
    report.intervals.push_back(rec);
  }
  return report;
}

std::vector<FailureReport> run_failures(Scheme& scheme, std::span<const TeInstance> instances,
                                        const std::vector<std::vector<EdgeIndex>>& sets,
                                        const EvalOptions& options) {
  std::vector<FailureReport> out;
  auto group = [&](std::size_t n) -> EvalReport& {
    for (auto& f : out) {
      if (f.failed_links == n) return f.report;
    }
    out.push_back({n, {scheme.name(), "failures-" + std::to_string(n), {}}});
    return out.back().report;
  };
  for (const auto& set : sets) {
    const std::set<EdgeIndex> unique(set.begin(), set.end());
    EvalReport& report = group(unique.size());
    for (std::size_t t = 0; t < instances.size(); ++t) {
      const TeInstance failed =
          instances[t].with_topology(std::make_shared<const Topology>(apply_failures(instances[t].topology(), set)));
      const Timed c = timed_compute(scheme, failed, options);
      IntervalRecord rec = evaluate(failed, c.alloc, options.objective);
      rec.interval = t;
      rec.source_interval = static_cast<std::int64_t>(t);
      rec.compute_seconds = c.seconds;
      report.intervals.push_back(rec);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const FailureReport& a, const FailureReport& b) { return a.failed_links < b.failed_links; });
  return out;
}

std::vector<std::vector<EdgeIndex>> failure_sets(const TeInstance& inst, std::size_t pairs, std::uint64_t seed) {
  std::vector<EdgeIndex> used;
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    if (!inst.layout().edge_paths[e].empty()) used.push_back(e);
  }
  std::vector<std::vector<EdgeIndex>> out;
  for (EdgeIndex e : used) out.push_back({e});
  if (used.size() < 2) return out;
  Rng rng(seed);
  std::set<std::pair<EdgeIndex, EdgeIndex>> seen;
  const std::size_t possible = used.size() * (used.size() - 1) / 2;
  while (seen.size() < std::min(pairs, possible)) {
    EdgeIndex a = used[rng.below(used.size())], b = used[rng.below(used.size())];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (seen.insert({a, b}).second) out.push_back({a, b});
  }
  return out;
}

Comparison compare(std::span<Scheme* const> schemes, std::span<const TeInstance> instances, const std::string& mode,
                   const EvalOptions& options) {
  if (mode != "offline" && mode != "online") throw ValidationError("compare mode must be offline or online");
  std::set<std::string> names;
  for (Scheme* s : schemes) {
    if (!names.insert(s->name()).second) throw ValidationError("scheme '" + s->name() + "' listed twice");
  }
  Comparison out;
  out.trace_hash = trace_hash(demands_of(instances));
  for (Scheme* s : schemes) {
    out.reports.push_back(mode == "offline" ? run_offline(*s, instances, options) : run_online(*s, instances, options));
    if (trace_hash(demands_of(instances)) != out.trace_hash) throw Error("trace changed during comparison");
  }
  return out;
}

double median_delta(const EvalReport& a, const EvalReport& b) {
  return percentile(a.satisfied(), 50.0) - percentile(b.satisfied(), 50.0);
}

std::string format_records(const EvalReport& report) {
  std::string out;
  for (const auto& r : report.intervals) {
    nlohmann::ordered_json j;
    j["scheme"] = report.scheme;
    j["mode"] = report.mode;
    j["interval"] = r.interval;
    j["source_interval"] = r.source_interval;
    j["compute_seconds"] = r.compute_seconds;
    j["satisfied_demand"] = r.satisfied_demand;
    j["objective"] = std::isfinite(r.objective) ? nlohmann::ordered_json(r.objective) : nlohmann::ordered_json("inf");
    j["feasible"] = r.feasible;
    out += j.dump() + "\n";
  }
  return out;
}

EvalReport parse_records(std::string_view text) {
  EvalReport report;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string scheme = j.at("scheme").get<std::string>();
      const std::string mode = j.at("mode").get<std::string>();
      if (report.intervals.empty()) {
        report.scheme = scheme;
        report.mode = mode;
      } else if (scheme != report.scheme || mode != report.mode) {
        throw ValidationError("line " + std::to_string(lineno) + ": records from more than one report");
      }
      IntervalRecord r;
      r.interval = j.at("interval").get<std::size_t>();
      r.source_interval = j.at("source_interval").get<std::int64_t>();
      r.compute_seconds = j.at("compute_seconds").get<double>();
      r.satisfied_demand = j.at("satisfied_demand").get<double>();
      const auto& obj = j.at("objective");
      r.objective = obj.is_string() ? kInfiniteUtilization : obj.get<double>();
      r.feasible = j.at("feasible").get<bool>();
      report.intervals.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return report;
}

std::string format_summary(std::span<const EvalReport> reports, std::uint64_t trace_hash) {
  nlohmann::ordered_json doc;
  doc["trace_hash"] = hex(trace_hash);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    std::size_t infeasible = 0;
    for (const auto& rec : r.intervals) infeasible += rec.feasible ? 0 : 1;
    nlohmann::ordered_json s;
    s["scheme"] = r.scheme;
    s["mode"] = r.mode;
    s["satisfied_demand"] = aggregate_json(r.satisfied());
    std::vector<double> finite;
    for (double v : r.objectives()) {
      if (std::isfinite(v)) finite.push_back(v);
    }
    s["objective"] = aggregate_json(finite);
    s["compute_seconds"] = aggregate_json(r.compute_seconds());
    s["infeasible_intervals"] = infeasible;
    if (!reports.empty() && &r != &reports.front() && !r.intervals.empty() && !reports.front().intervals.empty()) {
      s["median_satisfied_delta_vs_" + reports.front().scheme] = median_delta(r, reports.front());
    }
    arr.push_back(std::move(s));
  }
  doc["reports"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::string format_cdf(std::span<const double> values) {
  std::string out;
  char buf[64];
  for (const auto& [v, f] : cdf_points(values)) {
    std::snprintf(buf, sizeof buf, "%.17g\t%.17g\n", v, f);
    out += buf;
  }
  return out;
}

std::string format_timeline(const EvalReport& report) {
  std::string out;
  char buf[64];
  for (const auto& r : report.intervals) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\n", r.interval, r.satisfied_demand);
    out += buf;
  }
  return out;
}

void write_reports(const std::filesystem::path& dir, std::span<const EvalReport> reports, std::uint64_t trace_hash) {
  std::filesystem::create_directories(dir);
  for (const auto& r : reports) {
    const std::string stem = r.scheme + "." + r.mode;
    write_text(dir / (stem + ".jsonl"), format_records(r));
    write_text(dir / (stem + ".cdf.txt"), format_cdf(r.satisfied()));
    write_text(dir / (stem + ".timeline.txt"), format_timeline(r));
  }
  write_text(dir / "summary.json", format_summary(reports, trace_hash));
}

}  // namespace flowte
