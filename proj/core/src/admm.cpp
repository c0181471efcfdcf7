#include "flowte/admm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "flowte/error.hpp"

namespace flowte {

namespace {

double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Normalized data and the per-edge hop lists of the active rows.
struct Index {
  std::vector<char> active;  // per demand
  std::vector<double> vol;   // per demand, normalized
  std::vector<double> cap;   // per edge, normalized
  std::vector<std::vector<std::size_t>> edge_hops;
  std::vector<std::size_t> hop_path;
};

Index build_index(const AdmmState& state, const TeInstance& inst) {
  const FlowLayout& layout = inst.layout();
  if (state.F.size() != inst.num_paths() || state.z.size() != layout.hops.size() ||
      state.s1.size() != inst.num_demands() || state.s3.size() != inst.num_edges() ||
      state.lambda1.size() != inst.num_demands() || state.lambda3.size() != inst.num_edges() ||
      state.lambda4.size() != layout.hops.size()) {
    throw ValidationError("ADMM state does not match the instance");
  }
  if (!(state.rho > 0.0) || !(state.scale > 0.0)) throw ValidationError("ADMM needs rho > 0 and scale > 0");
  Index ix;
  ix.active.assign(inst.num_demands(), 0);
  ix.vol.assign(inst.num_demands(), 0.0);
  ix.cap.assign(inst.num_edges(), 0.0);
  ix.edge_hops.resize(inst.num_edges());
  ix.hop_path.assign(layout.hops.size(), 0);
  for (std::size_t p = 0; p < layout.num_paths(); ++p) {
    for (std::size_t h = layout.path_first_hop[p]; h < layout.path_first_hop[p + 1]; ++h) ix.hop_path[h] = p;
  }
  for (std::size_t e = 0; e < inst.num_edges(); ++e) ix.cap[e] = inst.capacity(e) / state.scale;
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    ix.vol[d] = inst.volume(d) / state.scale;
    ix.active[d] = inst.volume(d) > 0.0 && layout.path_count(d) > 0;
    if (!ix.active[d]) continue;
    for (std::size_t p = layout.demand_first_path[d]; p < layout.demand_first_path[d + 1]; ++p) {
      for (std::size_t h = layout.path_first_hop[p]; h < layout.path_first_hop[p + 1]; ++h) {
        ix.edge_hops[layout.hops[h]].push_back(h);
      }
    }
  }
  return ix;
}

Residuals residuals(const AdmmState& st, const TeInstance& inst, const Index& ix) {
  const FlowLayout& layout = inst.layout();
  Residuals g;
  g.g1.assign(inst.num_demands(), 0.0);
  g.g3.assign(inst.num_edges(), 0.0);
  g.g4.assign(layout.hops.size(), 0.0);
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    if (!ix.active[d]) continue;
    double sum = 0.0;
    for (std::size_t p = layout.demand_first_path[d]; p < layout.demand_first_path[d + 1]; ++p) {
      sum += st.F[p];
      for (std::size_t h = layout.path_first_hop[p]; h < layout.path_first_hop[p + 1]; ++h) {
        g.g4[h] = ix.vol[d] * st.F[p] - st.z[h];
      }
    }
    g.g1[d] = sum + st.s1[d] - 1.0;
  }
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    if (ix.edge_hops[e].empty()) continue;
    double sum = 0.0;
    for (std::size_t h : ix.edge_hops[e]) sum += st.z[h];
    g.g3[e] = sum + st.s3[e] - ix.cap[e];
  }
  return g;
}

double objective(const AdmmState& st, const TeInstance& inst, const Index& ix) {
  const FlowLayout& layout = inst.layout();
  double obj = 0.0;
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    if (!ix.active[d]) continue;
    for (std::size_t p = layout.demand_first_path[d]; p < layout.demand_first_path[d + 1]; ++p) {
      obj += ix.vol[d] * st.F[p];
    }
  }
  return obj;
}

double lagrangian(const AdmmState& st, const TeInstance& inst, const Index& ix) {
  const Residuals g = residuals(st, inst, ix);
  double lin = 0.0;
  for (std::size_t i = 0; i < g.g1.size(); ++i) lin += st.lambda1[i] * g.g1[i];
  for (std::size_t i = 0; i < g.g3.size(); ++i) lin += st.lambda3[i] * g.g3[i];
  for (std::size_t i = 0; i < g.g4.size(); ++i) lin += st.lambda4[i] * g.g4[i];
  const double quad = sum_squares(g.g1) + sum_squares(g.g3) + sum_squares(g.g4);
  return -objective(st, inst, ix) + lin + 0.5 * st.rho * quad;
}

// Per demand: minimize over F >= 0 the sum of
//   -v S + l1 (S + s1 - 1) + rho/2 (S + s1 - 1)^2
//   + sum_{p,e} l4 (v F_p - z) + rho/2 (v F_p - z)^2,   S = sum_p F_p.
// Stationarity gives F_p = max(0, (t_p - S) rho / w_p); S is found by
// walking the thresholds t_p in decreasing order.
void update_f(AdmmState& st, const TeInstance& inst, const Index& ix) {
  const FlowLayout& layout = inst.layout();
  const double rho = st.rho;
  std::vector<double> t, w;
  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    if (!ix.active[d]) continue;
    const double v = ix.vol[d];
    const std::size_t first = layout.demand_first_path[d];
    const std::size_t n = layout.path_count(d);
    t.assign(n, 0.0);
    w.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t p = first + j;
      double sum_l4 = 0.0, sum_z = 0.0;
      for (std::size_t h = layout.path_first_hop[p]; h < layout.path_first_hop[p + 1]; ++h) {
        sum_l4 += st.lambda4[h];
        sum_z += st.z[h];
      }
      const double hops = static_cast<double>(layout.path_first_hop[p + 1] - layout.path_first_hop[p]);
      w[j] = rho * hops * v * v;
      const double b = -v + st.lambda1[d] + rho * (st.s1[d] - 1.0) + v * sum_l4 - rho * v * sum_z;
      t[j] = -b / rho;
    }
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t[a] > t[b]; });
    double S = 0.0;
    double num = 0.0, den = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t j = order[k];
      if (t[j] <= S) break;
      num += rho * t[j] / w[j];
      den += rho / w[j];
      S = num / den;
      if (k + 1 < n && S >= t[order[k + 1]]) break;
    }
    for (std::size_t j = 0; j < n; ++j) st.F[first + j] = std::max(0.0, (t[j] - S) * rho / w[j]);
  }
}

// Per edge: z_pe = u_p - (Z + r) with u_p = v F_p + (l4 - l3) / rho,
// r = s3 - c, and Z = sum z solving Z = U - n (Z + r).
void update_z(AdmmState& st, const TeInstance& inst, const Index& ix) {
  const FlowLayout& layout = inst.layout();
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    const auto& hs = ix.edge_hops[e];
    if (hs.empty()) continue;
    const double r = st.s3[e] - ix.cap[e];
    double U = 0.0;
    for (std::size_t h : hs) {
      const std::size_t p = ix.hop_path[h];
      U += ix.vol[layout.path_demand[p]] * st.F[p] + (st.lambda4[h] - st.lambda3[e]) / st.rho;
    }
    const double n = static_cast<double>(hs.size());
    const double Z = (U - n * r) / (1.0 + n);
    for (std::size_t h : hs) {
      const std::size_t p = ix.hop_path[h];
      const double u = ix.vol[layout.path_demand[p]] * st.F[p] + (st.lambda4[h] - st.lambda3[e]) / st.rho;
      st.z[h] = u - (Z + r);
    }
  }
}

void update_s(AdmmState& st, const TeInstance& inst, const Index& ix) {
  const FlowLayout& layout = inst.layout();
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    if (!ix.active[d]) continue;
    double S = 0.0;
    for (std::size_t p = layout.demand_first_path[d]; p < layout.demand_first_path[d + 1]; ++p) S += st.F[p];
    st.s1[d] = std::max(0.0, 1.0 - S - st.lambda1[d] / st.rho);
  }
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    if (ix.edge_hops[e].empty()) continue;
    double Z = 0.0;
    for (std::size_t h : ix.edge_hops[e]) Z += st.z[h];
    st.s3[e] = std::max(0.0, ix.cap[e] - Z - st.lambda3[e] / st.rho);
  }
}

void update_duals(AdmmState& st, const TeInstance& inst, const Index& ix) {
  const Residuals g = residuals(st, inst, ix);
  for (std::size_t i = 0; i < g.g1.size(); ++i) st.lambda1[i] += st.rho * g.g1[i];
  for (std::size_t i = 0; i < g.g3.size(); ++i) st.lambda3[i] += st.rho * g.g3[i];
  for (std::size_t i = 0; i < g.g4.size(); ++i) st.lambda4[i] += st.rho * g.g4[i];
}

void check_finite(const AdmmState& st) {
  std::ostringstream dump;
  std::size_t bad = 0;
  auto scan = [&](const char* name, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (std::isfinite(v[i])) continue;
      if (bad < 8) dump << ' ' << name << '[' << i << "]=" << v[i];
      ++bad;
    }
  };
  scan("F", st.F);
  scan("z", st.z);
  scan("s1", st.s1);
  scan("s3", st.s3);
  scan("lambda1", st.lambda1);
  scan("lambda3", st.lambda3);
  scan("lambda4", st.lambda4);
  if (bad > 0) {
    throw NumericalError("ADMM state became non-finite (" + std::to_string(bad) + " entries, rho=" +
                         std::to_string(st.rho) + "):" + dump.str());
  }
}

}  // namespace

double Residuals::norm1() const { return std::sqrt(sum_squares(g1)); }
double Residuals::norm3() const { return std::sqrt(sum_squares(g3)); }
double Residuals::norm4() const { return std::sqrt(sum_squares(g4)); }
double Residuals::norm() const { return std::sqrt(sum_squares(g1) + sum_squares(g3) + sum_squares(g4)); }

AdmmState warm_start(const TeInstance& inst, const FlowAllocation& alloc, double rho, double scale) {
  if (alloc.split.size() != inst.num_paths()) throw ValidationError("allocation does not match the instance");
  const FlowLayout& layout = inst.layout();
  AdmmState st;
  st.rho = rho;
  st.scale = scale > 0.0 ? scale : (inst.total_demand() > 0.0 ? inst.total_demand() : 1.0);
  st.F = alloc.split;
  st.z.assign(layout.hops.size(), 0.0);
  st.s1.assign(inst.num_demands(), 0.0);
  st.s3.assign(inst.num_edges(), 0.0);
  st.lambda1.assign(inst.num_demands(), 0.0);
  st.lambda3.assign(inst.num_edges(), 0.0);
  st.lambda4.assign(layout.hops.size(), 0.0);
  const Index ix = build_index(st, inst);
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    if (!ix.active[d]) continue;
    double S = 0.0;
    for (std::size_t p = layout.demand_first_path[d]; p < layout.demand_first_path[d + 1]; ++p) {
      S += st.F[p];
      for (std::size_t h = layout.path_first_hop[p]; h < layout.path_first_hop[p + 1]; ++h) {
        st.z[h] = ix.vol[d] * st.F[p];
      }
    }
    st.s1[d] = std::max(0.0, 1.0 - S);
  }
  for (std::size_t e = 0; e < inst.num_edges(); ++e) {
    double Z = 0.0;
    for (std::size_t h : ix.edge_hops[e]) Z += st.z[h];
    st.s3[e] = std::max(0.0, ix.cap[e] - Z);
  }
  return st;
}

Residuals residuals(const AdmmState& state, const TeInstance& inst) {
  return residuals(state, inst, build_index(state, inst));
}

double augmented_lagrangian(const AdmmState& state, const TeInstance& inst) {
  return lagrangian(state, inst, build_index(state, inst));
}

double admm_objective(const AdmmState& state, const TeInstance& inst) {
  return objective(state, inst, build_index(state, inst));
}

void update_f(AdmmState& state, const TeInstance& inst) { update_f(state, inst, build_index(state, inst)); }
void update_z(AdmmState& state, const TeInstance& inst) { update_z(state, inst, build_index(state, inst)); }
void update_s(AdmmState& state, const TeInstance& inst) { update_s(state, inst, build_index(state, inst)); }
void update_duals(AdmmState& state, const TeInstance& inst) {
  update_duals(state, inst, build_index(state, inst));
}

AdmmState iterate(const AdmmState& state, const TeInstance& inst) {
  const Index ix = build_index(state, inst);
  AdmmState next = state;
  update_z(next, inst, ix);
  update_s(next, inst, ix);
  update_f(next, inst, ix);
  update_duals(next, inst, ix);
  check_finite(next);
  return next;
}

FlowAllocation project(const AdmmState& state, const TeInstance& inst) {
  const FlowLayout& layout = inst.layout();
  if (state.F.size() != inst.num_paths()) throw ValidationError("ADMM state does not match the instance");
  FlowAllocation out{state.F};
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    const std::size_t first = layout.demand_first_path[d], last = layout.demand_first_path[d + 1];
    double S = 0.0;
    for (std::size_t p = first; p < last; ++p) {
      out.split[p] = std::isfinite(out.split[p]) ? std::clamp(out.split[p], 0.0, 1.0) : 0.0;
      S += out.split[p];
    }
    if (S > 1.0) {
      for (std::size_t p = first; p < last; ++p) out.split[p] /= S;
      // Division can leave the sum a few ulps above 1.
      double again = 0.0;
      for (std::size_t p = first; p < last; ++p) again += out.split[p];
      for (std::size_t p = first; p < last && again > 1.0; ++p) {
        const double cut = std::min(out.split[p], again - 1.0);
        out.split[p] -= cut;
        again -= cut;
      }
    }
  }
  return out;
}

AdmmTraceRecord trace_record(std::size_t iteration, const AdmmState& state, const TeInstance& inst) {
  const Index ix = build_index(state, inst);
  const Residuals g = residuals(state, inst, ix);
  return {iteration, g.norm1(), g.norm3(), g.norm4(), lagrangian(state, inst, ix), objective(state, inst, ix)};
}

std::size_t default_admm_iterations(const Topology& topo) { return topo.num_nodes() < 500 ? 1 : 2; }

FlowAllocation refine(const TeInstance& inst, const FlowAllocation& alloc, std::size_t iterations, double rho,
                      std::vector<AdmmTraceRecord>* trace) {
  AdmmState st = warm_start(inst, alloc, rho);
  if (trace) trace->push_back(trace_record(0, st, inst));
  for (std::size_t k = 1; k <= iterations; ++k) {
    st = iterate(st, inst);
    if (trace) trace->push_back(trace_record(k, st, inst));
  }
  return project(st, inst);
}

std::string format_admm_trace(const std::vector<AdmmTraceRecord>& trace) {
  std::string out;
  char buf[256];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf,
                  "{\"iteration\":%zu,\"g1\":%.17g,\"g3\":%.17g,\"g4\":%.17g,\"lagrangian\":%.17g,"
                  "\"objective\":%.17g}\n",
                  r.iteration, r.g1, r.g3, r.g4, r.lagrangian, r.objective);
    out += buf;
  }
  return out;
}

void write_admm_trace(const std::filesystem::path& file, const std::vector<AdmmTraceRecord>& trace) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << format_admm_trace(trace);
}

}  // namespace flowte
