#include "flowte/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <utility>

#include "flowte/error.hpp"
#include "json.hpp"

namespace flowte {

namespace {
constexpr double kFailedLinkUtilization = 1e6;  // stands in for +inf inside rewards
}

RewardEvaluator::RewardEvaluator(const TeInstance& inst, const ObjectiveSpec& spec, double offset)
    : inst_(&inst), spec_(spec), offset_(offset) {
  const FlowLayout& layout = inst.layout();
  const double total = inst.total_demand();
  path_weight_.assign(layout.num_paths(), total > 0.0 ? 1.0 / total : 0.0);
  if (spec.kind == ObjectiveKind::DelayPenalizedFlow) {
    if (spec.delay_coefficients.size() != inst.num_edges()) {
      throw ValidationError("delay objective needs one coefficient per edge");
    }
    for (std::size_t p = 0; p < layout.num_paths(); ++p) {
      double penalty = 0.0;
      for (EdgeIndex e : layout.path_edges(p)) penalty += spec.delay_coefficients[e];
      path_weight_[p] *= 1.0 - penalty;
    }
  }
  set_joint(FlowAllocation::zeros(inst));
}

double RewardEvaluator::evaluate(std::span<const double> flows, std::span<const double> loads) const {
  const TeInstance& inst = *inst_;
  if (spec_.kind == ObjectiveKind::MaxLinkUtilization) {
    double mlu = 0.0;
    for (std::size_t e = 0; e < loads.size(); ++e) {
      const double c = inst.capacity(e);
      if (c > 0.0) mlu = std::max(mlu, loads[e] / c);
      else if (loads[e] > 0.0) mlu = std::max(mlu, kFailedLinkUtilization);
    }
    return offset_ - mlu;
  }
  if (spec_.kind == ObjectiveKind::TotalFlow && inst.total_demand() <= 0.0) return offset_ + 1.0;
  std::vector<double> ratio(loads.size(), 1.0);
  for (std::size_t e = 0; e < loads.size(); ++e) {
    const double c = inst.capacity(e);
    if (loads[e] > c) ratio[e] = c / loads[e];
  }
  const FlowLayout& layout = inst.layout();
  double value = 0.0;
  for (std::size_t p = 0; p < flows.size(); ++p) {
    if (flows[p] <= 0.0) continue;
    double phi = 1.0;
    for (EdgeIndex e : layout.path_edges(p)) phi = std::min(phi, ratio[e]);
    value += flows[p] * phi * path_weight_[p];
  }
  return offset_ + value;
}

double RewardEvaluator::reward(const FlowAllocation& alloc) const {
  const FlowLayout& layout = inst_->layout();
  std::vector<double> flows(layout.num_paths());
  for (std::size_t p = 0; p < flows.size(); ++p) {
    flows[p] = alloc.split[p] * inst_->volume(layout.path_demand[p]);
  }
  return evaluate(flows, link_loads(*inst_, alloc));
}

void RewardEvaluator::set_joint(const FlowAllocation& alloc) {
  const FlowLayout& layout = inst_->layout();
  flows_.resize(layout.num_paths());
  for (std::size_t p = 0; p < flows_.size(); ++p) {
    flows_[p] = alloc.split[p] * inst_->volume(layout.path_demand[p]);
  }
  loads_ = link_loads(*inst_, alloc);
  joint_reward_ = evaluate(flows_, loads_);
}

double RewardEvaluator::reward_with(std::size_t d, std::span<const double> ratios) const {
  const FlowLayout& layout = inst_->layout();
  std::vector<double> flows = flows_;
  std::vector<double> loads = loads_;
  const double vol = inst_->volume(d);
  const std::size_t first = layout.demand_first_path[d];
  for (std::size_t j = 0; j < layout.path_count(d); ++j) {
    const std::size_t p = first + j;
    const double next = ratios[j] * vol;
    const double delta = next - flows[p];
    flows[p] = next;
    for (EdgeIndex e : layout.path_edges(p)) loads[e] += delta;
  }
  return evaluate(flows, loads);
}

double coma_advantage(double joint_reward, std::span<const double> counterfactual_rewards) {
  if (counterfactual_rewards.empty()) throw ValidationError("need at least one counterfactual");
  const double mean = std::accumulate(counterfactual_rewards.begin(), counterfactual_rewards.end(), 0.0) /
                      static_cast<double>(counterfactual_rewards.size());
  return joint_reward - mean;
}

double coma_advantage(const RewardEvaluator& rewards, std::size_t d,
                      std::span<const std::vector<double>> counterfactuals) {
  std::vector<double> r;
  r.reserve(counterfactuals.size());
  for (const auto& a : counterfactuals) r.push_back(rewards.reward_with(d, a));
  return coma_advantage(rewards.joint_reward(), r);
}

double coma_advantage(const RewardEvaluator& rewards, std::size_t d, const PolicyCache& cache,
                      const PolicyParameters& policy, std::size_t samples, Rng& rng) {
  std::vector<double> r;
  r.reserve(samples);
  for (std::size_t m = 0; m < samples; ++m) {
    r.push_back(rewards.reward_with(d, sample_action(cache, policy, rng).ratios));
  }
  return coma_advantage(rewards.joint_reward(), r);
}

std::vector<std::size_t> active_agents(const TeInstance& inst) {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < inst.num_demands(); ++d) {
    if (inst.volume(d) > 0.0 && inst.layout().path_count(d) >= 2) out.push_back(d);
  }
  return out;
}

ModelParameters reinforce_gradient(const ModelPass& pass, const ModelParameters& model,
                                   std::span<const AgentSample> samples) {
  const std::size_t slots = model.policy.slots();
  std::vector<double> d_logits(pass.demands.size() * slots, 0.0);
  std::vector<double> d_log_var(slots, 0.0);
  const auto& log_var = model.policy.log_var.data;
  for (const AgentSample& s : samples) {
    if (s.advantage == 0.0) continue;
    const PolicyCache& c = pass.demands[s.demand];
    for (std::size_t j = 0; j < c.available; ++j) {
      const double inv_var = std::exp(-log_var[j]);
      const double diff = s.logits[j] - c.logits[j];
      d_logits[s.demand * slots + j] += s.advantage * diff * inv_var;
      d_log_var[j] += s.advantage * (-0.5 + 0.5 * diff * diff * inv_var);
    }
  }
  return model_backward(pass, model, d_logits, d_log_var);
}

namespace {

double squared_norm(const ModelParameters& g) {
  double n = 0.0;
  for (const Tensor* t : g.tensors()) {
    for (double v : t->data) n += v * v;
  }
  return n;
}

void add_scaled(ModelParameters& acc, const ModelParameters& g, double weight) {
  auto a = acc.tensors();
  auto b = g.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k]->size(); ++i) a[k]->data[i] += weight * b[k]->data[i];
  }
}

void apply_step(ModelParameters& model, Adam& optimizer, const ModelParameters& grads,
                StepDiagnostics& diag) {
  const double n2 = squared_norm(grads);
  if (!std::isfinite(n2)) {
    throw NumericalError("non-finite gradient (squared norm " + std::to_string(n2) + ")");
  }
  diag.gradient_norm = std::sqrt(n2);
  optimizer.step(model.tensors(), std::as_const(grads).tensors(), true);
}

}  // namespace

StepDiagnostics policy_gradient_step(ModelParameters& model, Adam& optimizer,
                                     std::span<const TeInstance> batch,
                                     const TrainingConfig& config, Rng& rng) {
  if (config.counterfactual_samples == 0) throw ValidationError("need M >= 1 counterfactual samples");
  StepDiagnostics diag;
  if (batch.empty()) return diag;
  ModelParameters grads = model.zeros_like();
  double abs_adv = 0.0;
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const TeInstance& inst : batch) {
    const ModelPass pass = model_forward(inst, model, true);
    FlowAllocation joint = allocation_from_pass(inst, pass);
    const auto agents = active_agents(inst);
    std::vector<AgentSample> samples;
    samples.reserve(agents.size());
    const FlowLayout& layout = inst.layout();
    for (std::size_t d : agents) {
      SampledAction a = sample_action(pass.demands[d], model.policy, rng);
      const std::size_t first = layout.demand_first_path[d];
      for (std::size_t j = 0; j < layout.path_count(d); ++j) joint.split[first + j] = a.ratios[j];
      samples.push_back({d, std::move(a.logits), 0.0});
    }
    RewardEvaluator rewards(inst, config.objective);
    rewards.set_joint(joint);
    diag.mean_reward += weight * rewards.joint_reward();
    for (AgentSample& s : samples) {
      s.advantage = coma_advantage(rewards, s.demand, pass.demands[s.demand], model.policy,
                                   config.counterfactual_samples, rng);
      abs_adv += std::abs(s.advantage);
    }
    diag.agents += samples.size();
    add_scaled(grads, reinforce_gradient(pass, model, samples), weight);
  }
  diag.mean_abs_advantage = diag.agents ? abs_adv / static_cast<double>(diag.agents) : 0.0;
  apply_step(model, optimizer, grads, diag);
  return diag;
}

ModelParameters surrogate_loss_gradient(const TeInstance& inst, const ModelPass& pass,
                                        const ModelParameters& model) {
  const std::size_t slots = model.policy.slots();
  const FlowLayout& layout = inst.layout();
  std::vector<double> d_logits(layout.num_demands() * slots, 0.0);
  const double total = inst.total_demand();
  if (total > 0.0) {
    const FlowAllocation alloc = allocation_from_pass(inst, pass);
    const auto g = surrogate_gradient(inst, alloc);
    for (std::size_t d = 0; d < layout.num_demands(); ++d) {
      const std::size_t count = layout.path_count(d);
      if (count < 2 || inst.volume(d) <= 0.0) continue;
      const std::size_t first = layout.demand_first_path[d];
      double mean = 0.0;
      for (std::size_t j = 0; j < count; ++j) mean += alloc.split[first + j] * g[first + j];
      for (std::size_t j = 0; j < count; ++j) {
        d_logits[d * slots + j] = alloc.split[first + j] * (g[first + j] - mean) / total;
      }
    }
  }
  return model_backward(pass, model, d_logits, {});
}

StepDiagnostics direct_loss_step(ModelParameters& model, Adam& optimizer,
                                 std::span<const TeInstance> batch) {
  StepDiagnostics diag;
  if (batch.empty()) return diag;
  ModelParameters grads = model.zeros_like();
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const TeInstance& inst : batch) {
    if (inst.total_demand() <= 0.0) continue;
    const ModelPass pass = model_forward(inst, model, true);
    diag.mean_reward += weight * surrogate_loss(inst, allocation_from_pass(inst, pass)) / inst.total_demand();
    diag.agents += active_agents(inst).size();
    add_scaled(grads, surrogate_loss_gradient(inst, pass, model), weight);
  }
  apply_step(model, optimizer, grads, diag);
  return diag;
}

double validation_score(const ModelParameters& model, std::span<const TeInstance> instances,
                        const ObjectiveSpec& objective) {
  if (instances.empty()) return 0.0;
  double acc = 0.0;
  for (const TeInstance& inst : instances) {
    const RewardEvaluator rewards(inst, objective);
    acc += rewards.reward(allocate(inst, model));
  }
  return acc / static_cast<double>(instances.size());
}

std::vector<TeInstance> make_instances(const TeInstance& prototype, const Trace& trace) {
  std::vector<TeInstance> out;
  out.reserve(trace.size());
  for (const DemandMatrix& m : trace) out.push_back(prototype.with_demands(m));
  return out;
}

namespace {

enum class Method { Reinforce, DirectLoss };

TrainingResult train(const TeInstance& prototype, const TraceSplit& split,
                     const TrainingConfig& config, Method method) {
  if (!(config.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  TrainingResult result;
  ModelParameters model = ModelParameters::create(prototype.topology(), config.model);
  model.objective = to_string(config.objective.kind);

  const std::vector<TeInstance> train_set = make_instances(prototype, split.train);
  Trace val_trace = split.validation;
  if (config.validation_intervals > 0 && val_trace.size() > config.validation_intervals) {
    Trace sub;
    for (std::size_t i = 0; i < config.validation_intervals; ++i) {
      sub.push_back(val_trace[i * val_trace.size() / config.validation_intervals]);
    }
    val_trace = std::move(sub);
  }
  const std::vector<TeInstance> val_set = make_instances(prototype, val_trace);

  Adam optimizer(model.tensors(), AdamOptions{config.learning_rate});
  Rng rng(config.seed);
  const std::size_t batch = std::max<std::size_t>(1, config.batch_intervals);

  double best = validation_score(model, val_set, config.objective);
  result.model = model;
  result.curve.push_back({0, validation_score(model, train_set, config.objective), best});

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs && !train_set.empty(); ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    if (config.epochs > 1) {
      const double f = static_cast<double>(epoch - 1) / static_cast<double>(config.epochs - 1);
      optimizer.set_learning_rate(config.learning_rate * (1.0 + f * (config.final_lr_fraction - 1.0)));
    }
    double reward = 0.0;
    std::size_t steps = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += batch) {
        std::vector<TeInstance> chunk;
        for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
          chunk.push_back(train_set[order[i]]);
        }
        const StepDiagnostics diag = method == Method::Reinforce
                                         ? policy_gradient_step(model, optimizer, chunk, config, rng)
                                         : direct_loss_step(model, optimizer, chunk);
        reward += diag.mean_reward;
        ++steps;
      }
    } catch (const NumericalError& e) {
      result.diverged = true;
      result.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    const double score = validation_score(model, val_set, config.objective);
    if (!std::isfinite(score)) {
      result.diverged = true;
      result.diagnostic = "epoch " + std::to_string(epoch) + ": validation metric is not finite";
      break;
    }
    result.curve.push_back({epoch, steps ? reward / static_cast<double>(steps) : 0.0, score});
    if (score > best) {
      best = score;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace

TrainingResult train_rl(const TeInstance& prototype, const TraceSplit& split,
                        const TrainingConfig& config) {
  return train(prototype, split, config, Method::Reinforce);
}

TrainingResult train_direct_loss(const TeInstance& prototype, const TraceSplit& split,
                                 const TrainingConfig& config) {
  return train(prototype, split, config, Method::DirectLoss);
}

std::string format_training_log(const std::vector<EpochRecord>& curve) {
  std::string out;
  for (const EpochRecord& r : curve) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_reward"] = r.train_reward;
    j["validation"] = r.validation;
    out += j.dump() + "\n";
  }
  return out;
}

void write_training_log(const std::filesystem::path& file, const std::vector<EpochRecord>& curve) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << format_training_log(curve);
}

}  // namespace flowte
