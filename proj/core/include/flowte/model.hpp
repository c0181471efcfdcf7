#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flowte/flowgnn.hpp"
#include "flowte/policy.hpp"
#include "flowte/te_problem.hpp"

namespace flowte {

struct ModelConfig {
  std::size_t layers = 6;
  std::size_t slots = 4;
  std::size_t hidden = 24;
  std::uint64_t seed = 1;
  double init_log_std = -0.6931471805599453;  // exploration std 0.5
};

/// FlowGNN plus the shared policy network, bound to one topology structure.
struct ModelParameters {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::uint64_t structure = 0;  // hash of node names and edge endpoints
  double kappa = 1.0;           // capacity normalization
  std::string objective = "total-flow";
  GnnParameters gnn;
  PolicyParameters policy;

  static ModelParameters create(const Topology& topo, const ModelConfig& config = {});

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<std::string> tensor_names() const;
  ModelParameters zeros_like() const;
  std::size_t parameter_count() const;
  bool operator==(const ModelParameters&) const = default;
};

/// Hash of node names and edge endpoints; capacities excluded so a model
/// stays valid under link failures.
std::uint64_t structure_hash(const Topology& topo);

/// Throws ValidationError unless `model` was built for this topology shape.
void check_model_matches(const ModelParameters& model, const Topology& topo);

/// Versioned JSON document with layer shapes and row-major weights.
std::string format_checkpoint(const ModelParameters& model);
ModelParameters parse_checkpoint(std::string_view document);
void save_checkpoint(const std::filesystem::path& file, const ModelParameters& model);
ModelParameters load_checkpoint(const std::filesystem::path& file);

/// Full forward pass over one instance, optionally keeping the GNN tape.
struct ModelPass {
  FlowGraph graph;
  InitialEmbeddings init;
  GnnTape tape;
  GnnOutput embeddings;
  std::vector<PolicyCache> demands;  // one per demand in layout order
};

ModelPass model_forward(const TeInstance& inst, const ModelParameters& model, bool keep_tape,
                        OpCounter* ops = nullptr);

/// Policy input of demand d: its path embeddings in path order, zero padded.
std::vector<double> demand_input(const ModelPass& pass, std::size_t d);

/// Gradients of a scalar given d/dlogits (demands x slots, row-major) and
/// d/dlog_var (slots), back through policy and FlowGNN.
ModelParameters model_backward(const ModelPass& pass, const ModelParameters& model,
                               const std::vector<double>& d_logits,
                               const std::vector<double>& d_log_var);

/// Mean-action allocation: no sampling, no iteration.
FlowAllocation allocate(const TeInstance& inst, const ModelParameters& model,
                        OpCounter* ops = nullptr);
FlowAllocation allocation_from_pass(const TeInstance& inst, const ModelPass& pass);

}  // namespace flowte
