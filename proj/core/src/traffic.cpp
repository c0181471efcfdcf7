#include "flowte/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "flowte/baselines.hpp"
#include "flowte/error.hpp"
#include "flowte/random.hpp"
#include "flowte/te_problem.hpp"

namespace flowte {

DemandMatrix::DemandMatrix(std::size_t num_nodes, std::size_t interval)
    : num_nodes_(num_nodes), interval_(interval), volumes_(num_nodes * num_nodes, 0.0) {}

void DemandMatrix::set(NodeIndex src, NodeIndex dst, double volume) {
  if (src >= num_nodes_ || dst >= num_nodes_) throw ValidationError("demand references unknown node");
  if (src == dst) throw ValidationError("self-demand is not allowed");
  if (!std::isfinite(volume) || volume < 0.0) {
    throw ValidationError("demand volume must be finite and nonnegative");
  }
  volumes_[src * num_nodes_ + dst] = volume;
}

double DemandMatrix::total() const {
  return std::accumulate(volumes_.begin(), volumes_.end(), 0.0);
}

std::size_t DemandMatrix::nonzero_count() const {
  return static_cast<std::size_t>(
      std::count_if(volumes_.begin(), volumes_.end(), [](double v) { return v > 0.0; }));
}

DemandMatrix DemandMatrix::scaled(double factor) const {
  DemandMatrix out = *this;
  for (double& v : out.volumes_) v *= factor;
  return out;
}

namespace {

// Acklam's rational approximation, polished with one Halley step.
double inverse_normal_cdf(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  const double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - lo) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * 3.141592653589793) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double reflect(double w, double bound) {
  if (bound <= 0.0) return 0.0;
  while (w > bound || w < -bound) {
    if (w > bound) w = 2.0 * bound - w;
    if (w < -bound) w = -2.0 * bound - w;
  }
  return w;
}

}  // namespace

Trace generate_trace(const Topology& topo, std::size_t intervals, std::uint64_t seed,
                     const GeneratorParams& params) {
  const std::size_t n = topo.num_nodes();
  Trace trace;
  trace.reserve(intervals);
  if (n < 2) {
    for (std::size_t i = 0; i < intervals; ++i) trace.emplace_back(n, i);
    return trace;
  }
  const std::size_t pairs = n * (n - 1);
  Rng rng(seed);

  // Stratified log-normal base rates, randomly assigned to pairs.
  std::vector<double> rates(pairs);
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(pairs);
    rates[i] = std::exp(params.sigma * inverse_normal_cdf(q));
    sum += rates[i];
  }
  for (double& r : rates) r *= params.mean_volume * static_cast<double>(pairs) / sum;
  for (std::size_t i = pairs - 1; i > 0; --i) std::swap(rates[i], rates[rng.below(i + 1)]);

  std::vector<double> walk(pairs);
  for (double& w : walk) w = params.walk_bound * (2.0 * rng.uniform() - 1.0);

  for (std::size_t t = 0; t < intervals; ++t) {
    DemandMatrix m(n, t);
    std::size_t k = 0;
    for (NodeIndex s = 0; s < n; ++s) {
      for (NodeIndex d = 0; d < n; ++d) {
        if (s == d) continue;
        walk[k] = reflect(walk[k] + params.walk_step * rng.normal(), params.walk_bound);
        const double jitter = params.noise * rng.normal();
        m.set(s, d, rates[k] * std::exp(walk[k] + jitter));
        ++k;
      }
    }
    trace.push_back(std::move(m));
  }
  return trace;
}

double top_decile_share(const Trace& trace) {
  double acc = 0.0;
  std::size_t counted = 0;
  for (const DemandMatrix& m : trace) {
    std::vector<double> v;
    for (NodeIndex s = 0; s < m.num_nodes(); ++s) {
      for (NodeIndex d = 0; d < m.num_nodes(); ++d) {
        if (s != d) v.push_back(m.volume(s, d));
      }
    }
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (v.empty() || total <= 0.0) continue;
    std::sort(v.begin(), v.end(), std::greater<>());
    const auto top = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(v.size())));
    acc += std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(top), 0.0) / total;
    ++counted;
  }
  return counted == 0 ? 0.0 : acc / static_cast<double>(counted);
}

CalibrationResult calibrate_scale(const Topology& topo, const Trace& trace,
                                  const CalibrationOptions& options) {
  if (trace.empty()) throw ValidationError("cannot calibrate an empty trace");
  auto t = std::make_shared<const Topology>(topo);
  auto paths = std::make_shared<const PathSet>(k_shortest_paths(topo, options.k_paths));
  auto layout = FlowLayout::build(topo, *paths);

  std::vector<std::size_t> sample;
  const std::size_t count = std::min(options.sample_intervals, trace.size());
  for (std::size_t i = 0; i < count; ++i) sample.push_back(i * trace.size() / count);

  auto satisfied_at = [&](double scale) {
    double acc = 0.0;
    for (std::size_t i : sample) {
      TeInstance inst(t, paths, layout, trace[i].scaled(scale));
      acc += satisfied_demand(inst, solve_lp_all(inst).allocation);
    }
    return acc / static_cast<double>(sample.size());
  };

  // Bisection stops once this close; far tighter than the acceptance band
  // so recalibration results are reproducible.
  const double tight = std::min(options.tolerance, 2e-3);
  auto finish = [&](double scale, double achieved) {
    if (std::abs(achieved - options.target) > options.tolerance) {
      throw UnreachableError("calibration reached satisfied demand " + std::to_string(achieved) +
                             " but target is " + std::to_string(options.target));
    }
    CalibrationResult r;
    r.scale = scale;
    r.achieved = achieved;
    for (const auto& m : trace) r.trace.push_back(m.scaled(scale));
    return r;
  };

  const double at_one = satisfied_at(1.0);
  if (std::abs(at_one - options.target) <= tight) return finish(1.0, at_one);

  // Satisfied demand is non-increasing in the scale; bracket then bisect in log space.
  double lo, hi, sat_lo, sat_hi;
  if (at_one > options.target) {
    lo = 1.0, sat_lo = at_one;
    hi = 2.0, sat_hi = satisfied_at(hi);
    while (sat_hi > options.target) {
      lo = hi, sat_lo = sat_hi;
      hi *= 2.0;
      if (hi > 1e12) throw UnreachableError("satisfied demand never drops below target");
      sat_hi = satisfied_at(hi);
    }
  } else {
    hi = 1.0, sat_hi = at_one;
    lo = 0.5, sat_lo = satisfied_at(lo);
    while (sat_lo < options.target) {
      hi = lo, sat_hi = sat_lo;
      lo *= 0.5;
      if (lo < 1e-9) {
        throw UnreachableError("target satisfied demand " + std::to_string(options.target) +
                               " unreachable even at vanishing load (best " +
                               std::to_string(sat_lo) + "); unroutable pairs dominate");
      }
      sat_lo = satisfied_at(lo);
    }
  }
  if (std::abs(sat_lo - options.target) <= tight) return finish(lo, sat_lo);
  if (std::abs(sat_hi - options.target) <= tight) return finish(hi, sat_hi);

  double best_scale = lo, best_sat = sat_lo;
  for (std::size_t it = 0; it < options.max_bisections; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double sat = satisfied_at(mid);
    if (std::abs(sat - options.target) < std::abs(best_sat - options.target)) {
      best_scale = mid;
      best_sat = sat;
    }
    if (std::abs(sat - options.target) <= tight) break;
    if (sat > options.target) lo = mid;
    else hi = mid;
  }
  return finish(best_scale, best_sat);
}

TraceSplit split_trace(const Trace& trace, const SplitLengths& lengths) {
  const std::size_t need = lengths.train + lengths.validation + lengths.test;
  if (trace.size() < need) {
    throw ValidationError("trace has " + std::to_string(trace.size()) + " intervals, split needs " +
                          std::to_string(need));
  }
  TraceSplit split;
  auto b = trace.begin();
  split.train.assign(b, b + static_cast<std::ptrdiff_t>(lengths.train));
  b += static_cast<std::ptrdiff_t>(lengths.train);
  split.validation.assign(b, b + static_cast<std::ptrdiff_t>(lengths.validation));
  b += static_cast<std::ptrdiff_t>(lengths.validation);
  split.test.assign(b, b + static_cast<std::ptrdiff_t>(lengths.test));
  return split;
}

std::string format_trace(const Topology& topo, const Trace& trace) {
  std::string out = "# flowte-trace v1 intervals=" + std::to_string(trace.size()) + "\n";
  char buf[64];
  for (const DemandMatrix& m : trace) {
    if (m.num_nodes() != topo.num_nodes()) throw ValidationError("trace does not match topology");
    for (NodeIndex s = 0; s < m.num_nodes(); ++s) {
      for (NodeIndex d = 0; d < m.num_nodes(); ++d) {
        if (s == d || m.volume(s, d) <= 0.0) continue;
        std::snprintf(buf, sizeof buf, "%.17g", m.volume(s, d));
        out += std::to_string(m.interval());
        out += '\t';
        out += topo.node_name(s);
        out += '\t';
        out += topo.node_name(d);
        out += '\t';
        out += buf;
        out += '\n';
      }
    }
  }
  return out;
}

void write_trace(const std::filesystem::path& file, const Topology& topo, const Trace& trace) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << format_trace(topo, trace);
}

Trace parse_trace(std::string_view text, const Topology& topo) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t declared = 0;
  bool have_header = false;
  std::vector<std::tuple<std::size_t, NodeIndex, NodeIndex, double>> records;
  std::size_t line_no = 0;
  std::size_t max_interval = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto pos = line.find("intervals=");
      if (pos != std::string::npos) {
        declared = std::stoul(line.substr(pos + 10));
        have_header = true;
      }
      continue;
    }
    std::istringstream fields(line);
    std::size_t interval = 0;
    std::string src, dst, vol;
    if (!(fields >> interval >> src >> dst >> vol)) {
      throw ValidationError("trace line " + std::to_string(line_no) + " is malformed");
    }
    auto s = topo.node_index(src);
    auto d = topo.node_index(dst);
    if (!s || !d) throw ValidationError("trace line " + std::to_string(line_no) + " has unknown node");
    records.emplace_back(interval, *s, *d, std::strtod(vol.c_str(), nullptr));
    max_interval = std::max(max_interval, interval);
  }
  std::size_t count = have_header ? declared : (records.empty() ? 0 : max_interval + 1);
  if (!records.empty() && max_interval >= count) {
    throw ValidationError("trace record interval exceeds declared interval count");
  }
  Trace trace;
  for (std::size_t i = 0; i < count; ++i) trace.emplace_back(topo.num_nodes(), i);
  for (const auto& [interval, s, d, v] : records) trace[interval].set(s, d, v);
  return trace;
}

Trace read_trace(const std::filesystem::path& file, const Topology& topo) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str(), topo);
}

std::uint64_t trace_hash(const Trace& trace) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 1099511628211ULL;
    }
  };
  for (const DemandMatrix& m : trace) {
    const std::uint64_t interval = m.interval();
    mix(&interval, sizeof interval);
    for (double v : m.dense()) mix(&v, sizeof v);
  }
  return h;
}

}  // namespace flowte
