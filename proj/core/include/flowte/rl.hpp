#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowte/model.hpp"
#include "flowte/random.hpp"
#include "flowte/te_problem.hpp"
#include "flowte/traffic.hpp"

namespace flowte {

struct TrainingConfig {
  double learning_rate = 1e-4;
  std::size_t counterfactual_samples = 8;  // M
  std::size_t batch_intervals = 4;
  std::size_t epochs = 10;
  /// Learning rate decays linearly to this fraction of its start by the last epoch.
  double final_lr_fraction = 1.0;
  std::uint64_t seed = 1;
  ObjectiveSpec objective;
  ModelConfig model;
  /// Evaluate on at most this many validation intervals per epoch (0 = all).
  std::size_t validation_intervals = 0;
};

/// Reward of a joint action, to maximize: satisfied demand for total flow,
/// delay-penalized flow after dropping divided by total demand, or -MLU.
/// Precomputes the joint loads so replacing one agent's action is cheap.
class RewardEvaluator {
 public:
  RewardEvaluator(const TeInstance& inst, const ObjectiveSpec& spec, double offset = 0.0);

  double reward(const FlowAllocation& alloc) const;

  void set_joint(const FlowAllocation& alloc);
  double joint_reward() const { return joint_reward_; }
  /// Reward of the joint action with demand d's ratios replaced.
  double reward_with(std::size_t d, std::span<const double> ratios) const;

 private:
  double evaluate(std::span<const double> flows, std::span<const double> loads) const;

  const TeInstance* inst_;
  ObjectiveSpec spec_;
  double offset_;
  std::vector<double> path_weight_;  // value per unit of delivered path flow
  std::vector<double> flows_;        // joint path flows
  std::vector<double> loads_;
  double joint_reward_ = 0.0;
};

/// R - mean of the counterfactual rewards.
double coma_advantage(double joint_reward, std::span<const double> counterfactual_rewards);

/// Advantage of agent d against explicit counterfactual ratio vectors.
double coma_advantage(const RewardEvaluator& rewards, std::size_t d,
                      std::span<const std::vector<double>> counterfactuals);

/// Advantage of agent d with M counterfactual actions drawn from the policy.
double coma_advantage(const RewardEvaluator& rewards, std::size_t d, const PolicyCache& cache,
                      const PolicyParameters& policy, std::size_t samples, Rng& rng);

/// One agent's sampled logits and its advantage.
struct AgentSample {
  std::size_t demand = 0;
  std::vector<double> logits;
  double advantage = 0.0;
};

/// Gradient of sum_i A_i log pi(z_i | s) through policy and FlowGNN.
ModelParameters reinforce_gradient(const ModelPass& pass, const ModelParameters& model,
                                   std::span<const AgentSample> samples);

/// Demands that act: positive volume and at least two paths.
std::vector<std::size_t> active_agents(const TeInstance& inst);

struct StepDiagnostics {
  double mean_reward = 0.0;      // joint reward of the sampled actions
  double mean_abs_advantage = 0.0;
  double gradient_norm = 0.0;
  std::size_t agents = 0;
};

/// Samples joint actions on every instance of the batch, computes COMA
/// advantages, averages the policy gradient over the batch and takes one
/// Adam ascent step. Throws NumericalError on a non-finite gradient and
/// leaves `model` untouched in that case.
StepDiagnostics policy_gradient_step(ModelParameters& model, Adam& optimizer,
                                     std::span<const TeInstance> batch,
                                     const TrainingConfig& config, Rng& rng);

/// Gradient of surrogate_loss / total demand of the mean action.
ModelParameters surrogate_loss_gradient(const TeInstance& inst, const ModelPass& pass,
                                        const ModelParameters& model);

/// Surrogate-loss gradient step on the mean action (direct loss minimization).
StepDiagnostics direct_loss_step(ModelParameters& model, Adam& optimizer,
                                 std::span<const TeInstance> batch);

/// Mean, over instances, of the raw reward of the mean action.
double validation_score(const ModelParameters& model, std::span<const TeInstance> instances,
                        const ObjectiveSpec& objective);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_reward = 0.0;
  double validation = 0.0;
};

struct TrainingResult {
  ModelParameters model;
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string diagnostic;
};

/// Instances over one shared topology/path layout, one per matrix.
std::vector<TeInstance> make_instances(const TeInstance& prototype, const Trace& trace);

/// Trains on `train`, keeps the checkpoint with the best validation score
/// (epoch 0 = initial parameters). Deterministic given the seed.
TrainingResult train_rl(const TeInstance& prototype, const TraceSplit& split,
                        const TrainingConfig& config);
TrainingResult train_direct_loss(const TeInstance& prototype, const TraceSplit& split,
                                 const TrainingConfig& config);

/// Line-delimited {epoch, train_reward, validation} records.
void write_training_log(const std::filesystem::path& file, const std::vector<EpochRecord>& curve);
std::string format_training_log(const std::vector<EpochRecord>& curve);

}  // namespace flowte
