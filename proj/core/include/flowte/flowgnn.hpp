#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "flowte/te_problem.hpp"
#include "flowte/tensor.hpp"

namespace flowte {

/// Bipartite graph of edge-nodes (one per topology edge) and path-nodes (one
/// per flat path of the layout). Edge-node e links path-node p iff e lies on p.
class FlowGraph {
 public:
  explicit FlowGraph(std::shared_ptr<const FlowLayout> layout, std::size_t num_edges,
                     std::size_t slots = 4);

  std::size_t num_edge_nodes() const { return num_edges_; }
  std::size_t num_path_nodes() const { return layout_->num_paths(); }
  std::size_t num_demands() const { return layout_->num_demands(); }
  /// Fixed per-demand arity of the dense layer; demands with more paths are rejected.
  std::size_t slots() const { return slots_; }
  std::size_t num_links() const { return layout_->hops.size(); }
  const FlowLayout& layout() const { return *layout_; }

 private:
  std::shared_ptr<const FlowLayout> layout_;
  std::size_t num_edges_;
  std::size_t slots_;
};

FlowGraph build_flow_graph(const TeInstance& inst, std::size_t slots = 4);

/// Dimension-1 inputs: c(e)/kappa per edge-node, d/kappa per path-node.
struct InitialEmbeddings {
  std::vector<double> edge;  // num_edge_nodes
  std::vector<double> path;  // num_path_nodes
};

InitialEmbeddings init_embeddings(const FlowGraph& graph, const TeInstance& inst, double kappa);

/// Layer l (1-based) pools at dimension l, then the new slot is filled from
/// the initial embeddings, then the per-demand dense layer runs on
/// slots * min(l + 1, L) inputs.
struct GnnLayer {
  std::size_t dim = 0;        // pooling dimension
  std::size_t dense_dim = 0;  // dimension after the fill
  Tensor edge_w, edge_b;      // dim x 2dim, dim x 1
  Tensor path_w, path_b;
  Tensor dense_w, dense_b;    // slots*dense_dim square, slots*dense_dim x 1

  bool operator==(const GnnLayer&) const = default;
};

struct GnnParameters {
  std::size_t slots = 4;
  std::vector<GnnLayer> layers;

  static GnnParameters create(std::size_t num_layers, std::size_t slots, std::uint64_t seed);
  std::size_t output_dim() const { return layers.empty() ? 1 : layers.back().dense_dim; }

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<std::string> tensor_names() const;
  GnnParameters zeros_like() const;
  bool operator==(const GnnParameters&) const = default;
};

/// Row-major embeddings: path-nodes x output_dim.
struct GnnOutput {
  std::size_t dim = 0;
  std::vector<double> path;
  std::vector<double> edge;
};

/// Intermediate values the backward pass needs.
struct GnnTape {
  struct Layer {
    std::vector<double> edge_in, path_in;      // at layer dim
    std::vector<double> edge_mean, edge_pre;   // pooled messages, pre-activation
    std::vector<double> path_mean, path_pre;
    std::vector<double> dense_in, dense_pre;   // per demand, slots*dense_dim
  };
  std::vector<Layer> layers;
};

/// Multiply-add counter for the constant-work property.
struct OpCounter {
  std::uint64_t multiply_adds = 0;
};

GnnOutput gnn_forward(const FlowGraph& graph, const GnnParameters& params,
                      const InitialEmbeddings& init, GnnTape* tape = nullptr,
                      OpCounter* ops = nullptr);

struct GnnGradients {
  GnnParameters params;
  InitialEmbeddings inputs;
};

/// Reverse-mode gradients of a scalar whose gradient w.r.t. the output path
/// embeddings is `output_grad` (path-nodes x output_dim, row-major).
GnnGradients gnn_backward(const FlowGraph& graph, const GnnParameters& params,
                          const InitialEmbeddings& init, const GnnTape& tape,
                          const std::vector<double>& output_grad);

/// Adds `g` into `acc` (same shapes).
void accumulate(GnnParameters& acc, const GnnParameters& g, double weight = 1.0);

}  // namespace flowte
