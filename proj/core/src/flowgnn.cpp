#include "flowte/flowgnn.hpp"

#include <algorithm>

#include "flowte/error.hpp"

namespace flowte {

FlowGraph::FlowGraph(std::shared_ptr<const FlowLayout> layout, std::size_t num_edges,
                     std::size_t slots)
    : layout_(std::move(layout)), num_edges_(num_edges), slots_(slots) {
  if (layout_->max_paths > slots_) {
    throw SizeError("a demand has " + std::to_string(layout_->max_paths) +
                    " paths but the dense layer takes " + std::to_string(slots_));
  }
  if (layout_->edge_paths.size() != num_edges_) throw ValidationError("layout/topology edge mismatch");
}

FlowGraph build_flow_graph(const TeInstance& inst, std::size_t slots) {
  return FlowGraph(inst.layout_ptr(), inst.num_edges(), slots);
}

InitialEmbeddings init_embeddings(const FlowGraph& graph, const TeInstance& inst, double kappa) {
  if (!(kappa > 0.0)) throw ValidationError("normalization constant must be positive");
  InitialEmbeddings init;
  init.edge.resize(graph.num_edge_nodes());
  for (std::size_t e = 0; e < init.edge.size(); ++e) init.edge[e] = inst.capacity(e) / kappa;
  const FlowLayout& layout = graph.layout();
  init.path.resize(graph.num_path_nodes());
  for (std::size_t p = 0; p < init.path.size(); ++p) {
    init.path[p] = inst.volume(layout.path_demand[p]) / kappa;
  }
  return init;
}

GnnParameters GnnParameters::create(std::size_t num_layers, std::size_t slots, std::uint64_t seed) {
  if (num_layers == 0 || slots == 0) throw ValidationError("GNN needs at least one layer and slot");
  GnnParameters params;
  params.slots = slots;
  std::uint64_t stream = seed;
  for (std::size_t l = 1; l <= num_layers; ++l) {
    GnnLayer layer;
    layer.dim = l;
    layer.dense_dim = std::min(l + 1, num_layers);
    layer.edge_w = Tensor(l, 2 * l);
    layer.edge_b = Tensor(l, 1);
    layer.path_w = Tensor(l, 2 * l);
    layer.path_b = Tensor(l, 1);
    const std::size_t width = slots * layer.dense_dim;
    layer.dense_w = Tensor(width, width);
    layer.dense_b = Tensor(width, 1);
    init_uniform(layer.edge_w, 2 * l, stream);
    init_uniform(layer.path_w, 2 * l, stream);
    init_uniform(layer.dense_w, width, stream);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

std::vector<Tensor*> GnnParameters::tensors() {
  std::vector<Tensor*> out;
  for (GnnLayer& l : layers) {
    for (Tensor* t : {&l.edge_w, &l.edge_b, &l.path_w, &l.path_b, &l.dense_w, &l.dense_b}) {
      out.push_back(t);
    }
  }
  return out;
}

std::vector<const Tensor*> GnnParameters::tensors() const {
  std::vector<const Tensor*> out;
  for (const GnnLayer& l : layers) {
    for (const Tensor* t : {&l.edge_w, &l.edge_b, &l.path_w, &l.path_b, &l.dense_w, &l.dense_b}) {
      out.push_back(t);
    }
  }
  return out;
}

std::vector<std::string> GnnParameters::tensor_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "gnn." + std::to_string(i + 1) + ".";
    for (const char* n : {"edge_w", "edge_b", "path_w", "path_b", "dense_w", "dense_b"}) {
      names.push_back(prefix + n);
    }
  }
  return names;
}

GnnParameters GnnParameters::zeros_like() const {
  GnnParameters z = *this;
  for (Tensor* t : z.tensors()) t->zero();
  return z;
}

void accumulate(GnnParameters& acc, const GnnParameters& g, double weight) {
  auto a = acc.tensors();
  auto b = g.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k]->size(); ++i) a[k]->data[i] += weight * b[k]->data[i];
  }
}

namespace {

// y = W [u; v] + b for W of shape k x 2k.
void affine2(const Tensor& w, const Tensor& b, const double* u, const double* v, std::size_t k,
             double* out) {
  for (std::size_t r = 0; r < k; ++r) {
    double acc = b.data[r];
    const double* row = w.data.data() + r * 2 * k;
    for (std::size_t c = 0; c < k; ++c) acc += row[c] * u[c] + row[k + c] * v[c];
    out[r] = acc;
  }
}

void check_shapes(const FlowGraph& graph, const GnnParameters& params, const InitialEmbeddings& init) {
  if (params.layers.empty()) throw ValidationError("GNN has no layers");
  if (params.slots != graph.slots()) throw ValidationError("GNN slot count does not match graph");
  if (init.edge.size() != graph.num_edge_nodes() || init.path.size() != graph.num_path_nodes()) {
    throw ValidationError("initial embeddings do not match graph");
  }
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const GnnLayer& l = params.layers[i];
    const std::size_t k = i + 1;
    const std::size_t width = params.slots * l.dense_dim;
    if (l.dim != k || l.edge_w.rows != k || l.edge_w.cols != 2 * k || l.path_w.rows != k ||
        l.path_w.cols != 2 * k || l.edge_b.size() != k || l.path_b.size() != k ||
        l.dense_w.rows != width || l.dense_w.cols != width || l.dense_b.size() != width ||
        l.dense_dim < k || l.dense_dim > k + 1) {
      throw ValidationError("GNN layer " + std::to_string(k) + " has inconsistent shapes");
    }
  }
}

}  // namespace

GnnOutput gnn_forward(const FlowGraph& graph, const GnnParameters& params,
                      const InitialEmbeddings& init, GnnTape* tape, OpCounter* ops) {
  check_shapes(graph, params, init);
  const FlowLayout& layout = graph.layout();
  const std::size_t ne = graph.num_edge_nodes();
  const std::size_t np = graph.num_path_nodes();
  const std::size_t nd = graph.num_demands();
  const std::size_t slots = params.slots;

  std::vector<double> E = init.edge;
  std::vector<double> P = init.path;
  if (tape) tape->layers.assign(params.layers.size(), {});
  std::uint64_t madds = 0;

  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const GnnLayer& layer = params.layers[li];
    const std::size_t k = layer.dim;
    std::vector<double> mean(k), pre(k);

    std::vector<double> edge_mean(ne * k, 0.0), edge_pre(ne * k);
    std::vector<double> E1(ne * k);
    for (std::size_t e = 0; e < ne; ++e) {
      const auto& through = layout.edge_paths[e];
      double* m = edge_mean.data() + e * k;
      if (!through.empty()) {
        for (std::size_t p : through) {
          for (std::size_t c = 0; c < k; ++c) m[c] += P[p * k + c];
        }
        const double inv = 1.0 / static_cast<double>(through.size());
        for (std::size_t c = 0; c < k; ++c) m[c] *= inv;
        madds += through.size() * k;
      }
      affine2(layer.edge_w, layer.edge_b, E.data() + e * k, m, k, edge_pre.data() + e * k);
      for (std::size_t c = 0; c < k; ++c) {
        E1[e * k + c] = E[e * k + c] + leaky_relu(edge_pre[e * k + c]);
      }
    }
    madds += ne * 2 * k * k;

    std::vector<double> path_mean(np * k, 0.0), path_pre(np * k);
    std::vector<double> P1(np * k);
    for (std::size_t p = 0; p < np; ++p) {
      const auto edges = layout.path_edges(p);
      double* m = path_mean.data() + p * k;
      for (EdgeIndex e : edges) {
        for (std::size_t c = 0; c < k; ++c) m[c] += E1[e * k + c];
      }
      const double inv = 1.0 / static_cast<double>(edges.size());
      for (std::size_t c = 0; c < k; ++c) m[c] *= inv;
      madds += edges.size() * k;
      affine2(layer.path_w, layer.path_b, P.data() + p * k, m, k, path_pre.data() + p * k);
      for (std::size_t c = 0; c < k; ++c) {
        P1[p * k + c] = P[p * k + c] + leaky_relu(path_pre[p * k + c]);
      }
    }
    madds += np * 2 * k * k;

    const std::size_t k2 = layer.dense_dim;
    std::vector<double> E2(ne * k2), P2(np * k2);
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t c = 0; c < k; ++c) E2[e * k2 + c] = E1[e * k + c];
      if (k2 > k) E2[e * k2 + k] = init.edge[e];
    }
    for (std::size_t p = 0; p < np; ++p) {
      for (std::size_t c = 0; c < k; ++c) P2[p * k2 + c] = P1[p * k + c];
      if (k2 > k) P2[p * k2 + k] = init.path[p];
    }

    const std::size_t width = slots * k2;
    std::vector<double> dense_in(nd * width, 0.0), dense_pre(nd * width);
    for (std::size_t d = 0; d < nd; ++d) {
      const std::size_t first = layout.demand_first_path[d];
      const std::size_t count = layout.path_count(d);
      double* x = dense_in.data() + d * width;
      for (std::size_t j = 0; j < count; ++j) {
        std::copy_n(P2.data() + (first + j) * k2, k2, x + j * k2);
      }
      double* a = dense_pre.data() + d * width;
      for (std::size_t r = 0; r < width; ++r) {
        double acc = layer.dense_b.data[r];
        const double* row = layer.dense_w.data.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) acc += row[c] * x[c];
        a[r] = acc;
      }
      for (std::size_t j = 0; j < count; ++j) {
        for (std::size_t c = 0; c < k2; ++c) {
          const std::size_t i = j * k2 + c;
          P2[(first + j) * k2 + c] = x[i] + leaky_relu(a[i]);
        }
      }
    }
    madds += nd * width * width;

    if (tape) {
      GnnTape::Layer& t = tape->layers[li];
      t.edge_in = std::move(E);
      t.path_in = std::move(P);
      t.edge_mean = std::move(edge_mean);
      t.edge_pre = std::move(edge_pre);
      t.path_mean = std::move(path_mean);
      t.path_pre = std::move(path_pre);
      t.dense_in = std::move(dense_in);
      t.dense_pre = std::move(dense_pre);
    }
    E = std::move(E2);
    P = std::move(P2);
  }
  if (ops) ops->multiply_adds += madds;

  GnnOutput out;
  out.dim = params.output_dim();
  out.path = std::move(P);
  out.edge = std::move(E);
  return out;
}

GnnGradients gnn_backward(const FlowGraph& graph, const GnnParameters& params,
                          const InitialEmbeddings& init, const GnnTape& tape,
                          const std::vector<double>& output_grad) {
  check_shapes(graph, params, init);
  const FlowLayout& layout = graph.layout();
  const std::size_t ne = graph.num_edge_nodes();
  const std::size_t np = graph.num_path_nodes();
  const std::size_t nd = graph.num_demands();
  const std::size_t slots = params.slots;
  if (tape.layers.size() != params.layers.size()) throw ValidationError("tape does not match model");
  if (output_grad.size() != np * params.output_dim()) {
    throw ValidationError("output gradient has wrong size");
  }

  GnnGradients grads;
  grads.params = params.zeros_like();
  grads.inputs.edge.assign(ne, 0.0);
  grads.inputs.path.assign(np, 0.0);

  std::vector<double> dP = output_grad;
  std::vector<double> dE(ne * params.output_dim(), 0.0);

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const GnnLayer& layer = params.layers[li];
    GnnLayer& gl = grads.params.layers[li];
    const GnnTape::Layer& t = tape.layers[li];
    const std::size_t k = layer.dim;
    const std::size_t k2 = layer.dense_dim;
    const std::size_t width = slots * k2;

    // Dense layer: Y = X + act(W X + b), written back to existing slots only.
    std::vector<double> dP2(np * k2, 0.0);
    std::vector<double> dy(width), g(width);
    for (std::size_t d = 0; d < nd; ++d) {
      const std::size_t first = layout.demand_first_path[d];
      const std::size_t count = layout.path_count(d);
      if (count == 0) continue;
      std::fill(dy.begin(), dy.end(), 0.0);
      for (std::size_t j = 0; j < count; ++j) {
        std::copy_n(dP.data() + (first + j) * k2, k2, dy.data() + j * k2);
      }
      const double* x = t.dense_in.data() + d * width;
      const double* a = t.dense_pre.data() + d * width;
      for (std::size_t r = 0; r < width; ++r) g[r] = dy[r] * leaky_relu_grad(a[r]);
      for (std::size_t r = 0; r < width; ++r) {
        if (g[r] == 0.0) continue;
        double* grow = gl.dense_w.data.data() + r * width;
        for (std::size_t c = 0; c < width; ++c) grow[c] += g[r] * x[c];
        gl.dense_b.data[r] += g[r];
      }
      for (std::size_t j = 0; j < count; ++j) {
        for (std::size_t c = 0; c < k2; ++c) {
          const std::size_t i = j * k2 + c;
          double acc = dy[i];
          for (std::size_t r = 0; r < width; ++r) acc += layer.dense_w.data[r * width + i] * g[r];
          dP2[(first + j) * k2 + c] = acc;
        }
      }
    }

    // Undo the fill: the appended slot is an input.
    std::vector<double> dP1(np * k), dE1(ne * k);
    for (std::size_t p = 0; p < np; ++p) {
      for (std::size_t c = 0; c < k; ++c) dP1[p * k + c] = dP2[p * k2 + c];
      if (k2 > k) grads.inputs.path[p] += dP2[p * k2 + k];
    }
    for (std::size_t e = 0; e < ne; ++e) {
      for (std::size_t c = 0; c < k; ++c) dE1[e * k + c] = dE[e * k2 + c];
      if (k2 > k) grads.inputs.edge[e] += dE[e * k2 + k];
    }

    // Path pooling: P1 = P + act(Wp [P; mean_{e in p} E1] + bp).
    std::vector<double> dP0(np * k), gk(k), tk(2 * k);
    for (std::size_t p = 0; p < np; ++p) {
      const double* a = t.path_pre.data() + p * k;
      const double* u = t.path_in.data() + p * k;
      const double* m = t.path_mean.data() + p * k;
      for (std::size_t r = 0; r < k; ++r) gk[r] = dP1[p * k + r] * leaky_relu_grad(a[r]);
      std::fill(tk.begin(), tk.end(), 0.0);
      for (std::size_t r = 0; r < k; ++r) {
        double* grow = gl.path_w.data.data() + r * 2 * k;
        const double* wrow = layer.path_w.data.data() + r * 2 * k;
        for (std::size_t c = 0; c < k; ++c) {
          grow[c] += gk[r] * u[c];
          grow[k + c] += gk[r] * m[c];
        }
        for (std::size_t c = 0; c < 2 * k; ++c) tk[c] += wrow[c] * gk[r];
        gl.path_b.data[r] += gk[r];
      }
      for (std::size_t c = 0; c < k; ++c) dP0[p * k + c] = dP1[p * k + c] + tk[c];
      const auto edges = layout.path_edges(p);
      const double inv = 1.0 / static_cast<double>(edges.size());
      for (EdgeIndex e : edges) {
        for (std::size_t c = 0; c < k; ++c) dE1[e * k + c] += tk[k + c] * inv;
      }
    }

    // Edge pooling: E1 = E + act(We [E; mean_{p through e} P] + be).
    std::vector<double> dE0(ne * k);
    for (std::size_t e = 0; e < ne; ++e) {
      const double* a = t.edge_pre.data() + e * k;
      const double* u = t.edge_in.data() + e * k;
      const double* m = t.edge_mean.data() + e * k;
      for (std::size_t r = 0; r < k; ++r) gk[r] = dE1[e * k + r] * leaky_relu_grad(a[r]);
      std::fill(tk.begin(), tk.end(), 0.0);
      for (std::size_t r = 0; r < k; ++r) {
        double* grow = gl.edge_w.data.data() + r * 2 * k;
        const double* wrow = layer.edge_w.data.data() + r * 2 * k;
        for (std::size_t c = 0; c < k; ++c) {
          grow[c] += gk[r] * u[c];
          grow[k + c] += gk[r] * m[c];
        }
        for (std::size_t c = 0; c < 2 * k; ++c) tk[c] += wrow[c] * gk[r];
        gl.edge_b.data[r] += gk[r];
      }
      for (std::size_t c = 0; c < k; ++c) dE0[e * k + c] = dE1[e * k + c] + tk[c];
      const auto& through = layout.edge_paths[e];
      if (through.empty()) continue;
      const double inv = 1.0 / static_cast<double>(through.size());
      for (std::size_t p : through) {
        for (std::size_t c = 0; c < k; ++c) dP0[p * k + c] += tk[k + c] * inv;
      }
    }
    dP = std::move(dP0);
    dE = std::move(dE0);
  }
  for (std::size_t e = 0; e < ne; ++e) grads.inputs.edge[e] += dE[e];
  for (std::size_t p = 0; p < np; ++p) grads.inputs.path[p] += dP[p];
  return grads;
}

}  // namespace flowte
