#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowte/random.hpp"
#include "flowte/tensor.hpp"

namespace flowte {

/// Shared per-demand policy: input (slots x embedding dim) -> hidden (leaky
/// ReLU) -> one logit per slot, plus a learned log-variance per slot used
/// for Gaussian exploration in logit space.
struct PolicyParameters {
  Tensor w1, b1;  // hidden x input, hidden x 1
  Tensor w2, b2;  // slots x hidden, slots x 1
  Tensor log_var; // slots x 1

  static PolicyParameters create(std::size_t input, std::size_t hidden, std::size_t slots,
                                 std::uint64_t seed, double init_log_std = std::log(0.5));
  std::size_t input_width() const { return w1.cols; }
  std::size_t slots() const { return w2.rows; }

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<std::string> tensor_names() const;
  PolicyParameters zeros_like() const;
  bool operator==(const PolicyParameters&) const = default;
};

/// Forward values of one demand, kept for the backward pass.
struct PolicyCache {
  std::vector<double> input;
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  std::vector<double> logits;  // the Gaussian mean
  std::size_t available = 0;   // leading slots that hold real paths
};

PolicyCache policy_logits(const PolicyParameters& params, std::span<const double> input,
                          std::size_t available);

/// Softmax over the first `available` entries; the rest are 0.
std::vector<double> masked_softmax(std::span<const double> logits, std::size_t available);

/// Mean action: masked softmax of the logits.
std::vector<double> policy_forward(const PolicyParameters& params, std::span<const double> input,
                                   std::size_t available);

struct SampledAction {
  std::vector<double> ratios;
  std::vector<double> logits;  // sampled z, available slots only meaningful
  double log_prob = 0.0;
};

/// z_j = mu_j + exp(log_var_j / 2) * eps_j for available slots.
SampledAction sample_action(const PolicyCache& cache, const PolicyParameters& params, Rng& rng);

/// Diagonal Gaussian log-density of z over the first `available` slots.
double gaussian_log_prob(std::span<const double> z, std::span<const double> mean,
                         std::span<const double> log_var, std::size_t available);

/// Accumulates into `grads` the gradient of a scalar with d/dlogits and
/// d/dlog_var given; returns d/dinput.
std::vector<double> policy_backward(const PolicyParameters& params, const PolicyCache& cache,
                                    std::span<const double> d_logits,
                                    std::span<const double> d_log_var, PolicyParameters& grads);

void accumulate(PolicyParameters& acc, const PolicyParameters& g, double weight = 1.0);

}  // namespace flowte
