#include "flowte/model.hpp"

#include <fstream>
#include <sstream>

#include "flowte/error.hpp"
#include "json.hpp"

namespace flowte {

namespace {
constexpr const char* kFormat = "flowte-model";
constexpr int kVersion = 1;
}  // namespace

std::uint64_t structure_hash(const Topology& topo) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& n : topo.nodes()) {
    for (char c : n) mix(static_cast<unsigned char>(c));
    mix(0xff);
  }
  for (const Edge& e : topo.edges()) {
    mix(e.src);
    mix(e.dst);
  }
  return h;
}

ModelParameters ModelParameters::create(const Topology& topo, const ModelConfig& config) {
  ModelParameters m;
  m.num_nodes = topo.num_nodes();
  m.num_edges = topo.num_edges();
  m.structure = structure_hash(topo);
  m.kappa = topo.max_capacity() > 0.0 ? topo.max_capacity() : 1.0;
  m.gnn = GnnParameters::create(config.layers, config.slots, config.seed);
  m.policy = PolicyParameters::create(config.slots * m.gnn.output_dim(), config.hidden, config.slots,
                                      config.seed, config.init_log_std);
  return m;
}

std::vector<Tensor*> ModelParameters::tensors() {
  auto out = gnn.tensors();
  for (Tensor* t : policy.tensors()) out.push_back(t);
  return out;
}

std::vector<const Tensor*> ModelParameters::tensors() const {
  auto out = gnn.tensors();
  for (const Tensor* t : policy.tensors()) out.push_back(t);
  return out;
}

std::vector<std::string> ModelParameters::tensor_names() const {
  auto out = gnn.tensor_names();
  for (auto& n : policy.tensor_names()) out.push_back(std::move(n));
  return out;
}

ModelParameters ModelParameters::zeros_like() const {
  ModelParameters z = *this;
  for (Tensor* t : z.tensors()) t->zero();
  return z;
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

void check_model_matches(const ModelParameters& model, const Topology& topo) {
  if (model.num_nodes != topo.num_nodes() || model.num_edges != topo.num_edges() ||
      model.structure != structure_hash(topo)) {
    throw ValidationError("model checkpoint was trained for a different topology");
  }
}

std::string format_checkpoint(const ModelParameters& model) {
  nlohmann::ordered_json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["num_nodes"] = model.num_nodes;
  doc["num_edges"] = model.num_edges;
  doc["structure"] = model.structure;
  doc["kappa"] = model.kappa;
  doc["objective"] = model.objective;
  doc["layers"] = model.gnn.layers.size();
  doc["slots"] = model.gnn.slots;
  doc["hidden"] = model.policy.w1.rows;
  auto tensors = model.tensors();
  auto names = model.tensor_names();
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    arr.push_back({{"name", names[i]},
                   {"shape", {tensors[i]->rows, tensors[i]->cols}},
                   {"data", tensors[i]->data}});
  }
  doc["tensors"] = std::move(arr);
  return doc.dump(1) + "\n";
}

ModelParameters parse_checkpoint(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw ValidationError("not a model checkpoint");
    if (doc.at("version").get<int>() != kVersion) {
      throw ValidationError("unsupported checkpoint version " + doc.at("version").dump());
    }
    ModelConfig cfg;
    cfg.layers = doc.at("layers").get<std::size_t>();
    cfg.slots = doc.at("slots").get<std::size_t>();
    cfg.hidden = doc.at("hidden").get<std::size_t>();
    ModelParameters m;
    m.num_nodes = doc.at("num_nodes").get<std::size_t>();
    m.num_edges = doc.at("num_edges").get<std::size_t>();
    m.structure = doc.at("structure").get<std::uint64_t>();
    m.kappa = doc.at("kappa").get<double>();
    m.objective = doc.at("objective").get<std::string>();
    m.gnn = GnnParameters::create(cfg.layers, cfg.slots, 0);
    m.policy = PolicyParameters::create(cfg.slots * m.gnn.output_dim(), cfg.hidden, cfg.slots, 0);
    auto tensors = m.tensors();
    auto names = m.tensor_names();
    const auto& arr = doc.at("tensors");
    if (arr.size() != tensors.size()) throw ValidationError("checkpoint has wrong tensor count");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& t = arr.at(i);
      if (t.at("name").get<std::string>() != names[i]) {
        throw ValidationError("checkpoint tensor " + std::to_string(i) + " should be " + names[i]);
      }
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2 || shape[0] != tensors[i]->rows || shape[1] != tensors[i]->cols) {
        throw ValidationError("checkpoint tensor " + names[i] + " has wrong shape");
      }
      auto data = t.at("data").get<std::vector<double>>();
      if (data.size() != tensors[i]->size()) {
        throw ValidationError("checkpoint tensor " + names[i] + " has wrong length");
      }
      tensors[i]->data = std::move(data);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& file, const ModelParameters& model) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << format_checkpoint(model);
}

ModelParameters load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

std::vector<double> demand_input(const ModelPass& pass, std::size_t d) {
  const FlowLayout& layout = pass.graph.layout();
  const std::size_t dim = pass.embeddings.dim;
  std::vector<double> x(pass.graph.slots() * dim, 0.0);
  const std::size_t first = layout.demand_first_path[d];
  for (std::size_t j = 0; j < layout.path_count(d); ++j) {
    std::copy_n(pass.embeddings.path.data() + (first + j) * dim, dim, x.data() + j * dim);
  }
  return x;
}

ModelPass model_forward(const TeInstance& inst, const ModelParameters& model, bool keep_tape,
                        OpCounter* ops) {
  check_model_matches(model, inst.topology());
  ModelPass pass{build_flow_graph(inst, model.gnn.slots), {}, {}, {}, {}};
  pass.init = init_embeddings(pass.graph, inst, model.kappa);
  pass.embeddings = gnn_forward(pass.graph, model.gnn, pass.init, keep_tape ? &pass.tape : nullptr, ops);
  const FlowLayout& layout = inst.layout();
  pass.demands.reserve(layout.num_demands());
  for (std::size_t d = 0; d < layout.num_demands(); ++d) {
    pass.demands.push_back(policy_logits(model.policy, demand_input(pass, d), layout.path_count(d)));
  }
  if (ops) {
    const auto& p = model.policy;
    ops->multiply_adds += layout.num_demands() * (p.w1.size() + p.w2.size());
  }
  return pass;
}

ModelParameters model_backward(const ModelPass& pass, const ModelParameters& model,
                               const std::vector<double>& d_logits,
                               const std::vector<double>& d_log_var) {
  const FlowLayout& layout = pass.graph.layout();
  const std::size_t slots = model.policy.slots();
  const std::size_t dim = pass.embeddings.dim;
  if (pass.tape.layers.empty()) throw ValidationError("forward pass was run without a tape");
  if (d_logits.size() != layout.num_demands() * slots) throw ValidationError("d_logits has wrong size");

  ModelParameters grads = model.zeros_like();
  std::vector<double> d_emb(pass.embeddings.path.size(), 0.0);
  const std::vector<double> none(slots, 0.0);
  for (std::size_t d = 0; d < layout.num_demands(); ++d) {
    if (layout.path_count(d) == 0) continue;  // no action, logits unused
    std::span<const double> dl(d_logits.data() + d * slots, slots);
    if (std::all_of(dl.begin(), dl.end(), [](double v) { return v == 0.0; })) continue;
    const auto d_in = policy_backward(model.policy, pass.demands[d], dl, none, grads.policy);
    const std::size_t first = layout.demand_first_path[d];
    for (std::size_t j = 0; j < layout.path_count(d); ++j) {
      for (std::size_t c = 0; c < dim; ++c) d_emb[(first + j) * dim + c] += d_in[j * dim + c];
    }
  }
  for (std::size_t j = 0; j < slots && j < d_log_var.size(); ++j) {
    grads.policy.log_var.data[j] += d_log_var[j];
  }
  GnnGradients g = gnn_backward(pass.graph, model.gnn, pass.init, pass.tape, d_emb);
  grads.gnn = std::move(g.params);
  return grads;
}

FlowAllocation allocation_from_pass(const TeInstance& inst, const ModelPass& pass) {
  const FlowLayout& layout = inst.layout();
  FlowAllocation alloc = FlowAllocation::zeros(inst);
  for (std::size_t d = 0; d < layout.num_demands(); ++d) {
    const auto ratios = masked_softmax(pass.demands[d].logits, layout.path_count(d));
    const std::size_t first = layout.demand_first_path[d];
    for (std::size_t j = 0; j < layout.path_count(d); ++j) alloc.split[first + j] = ratios[j];
  }
  return alloc;
}

FlowAllocation allocate(const TeInstance& inst, const ModelParameters& model, OpCounter* ops) {
  const ModelPass pass = model_forward(inst, model, false, ops);
  return allocation_from_pass(inst, pass);
}

}  // namespace flowte
