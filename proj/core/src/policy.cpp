#include "flowte/policy.hpp"

#include <algorithm>
#include <cmath>

#include "flowte/error.hpp"

namespace flowte {

PolicyParameters PolicyParameters::create(std::size_t input, std::size_t hidden, std::size_t slots,
                                          std::uint64_t seed, double init_log_std) {
  PolicyParameters p;
  p.w1 = Tensor(hidden, input);
  p.b1 = Tensor(hidden, 1);
  p.w2 = Tensor(slots, hidden);
  p.b2 = Tensor(slots, 1);
  p.log_var = Tensor(slots, 1);
  std::uint64_t stream = seed ^ 0x5bd1e995ULL;
  init_uniform(p.w1, input, stream);
  init_uniform(p.w2, hidden, stream);
  for (double& v : p.log_var.data) v = 2.0 * init_log_std;
  return p;
}

std::vector<Tensor*> PolicyParameters::tensors() { return {&w1, &b1, &w2, &b2, &log_var}; }
std::vector<const Tensor*> PolicyParameters::tensors() const {
  return {&w1, &b1, &w2, &b2, &log_var};
}
std::vector<std::string> PolicyParameters::tensor_names() const {
  return {"policy.w1", "policy.b1", "policy.w2", "policy.b2", "policy.log_var"};
}

PolicyParameters PolicyParameters::zeros_like() const {
  PolicyParameters z = *this;
  for (Tensor* t : z.tensors()) t->zero();
  return z;
}

void accumulate(PolicyParameters& acc, const PolicyParameters& g, double weight) {
  auto a = acc.tensors();
  auto b = g.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k]->size(); ++i) a[k]->data[i] += weight * b[k]->data[i];
  }
}

PolicyCache policy_logits(const PolicyParameters& params, std::span<const double> input,
                          std::size_t available) {
  if (input.size() != params.input_width()) throw ValidationError("policy input has wrong width");
  if (available > params.slots()) throw ValidationError("more paths than policy slots");
  PolicyCache c;
  c.available = available;
  c.input.assign(input.begin(), input.end());
  const std::size_t h = params.w1.rows;
  c.hidden_pre.resize(h);
  c.hidden.resize(h);
  for (std::size_t r = 0; r < h; ++r) {
    double acc = params.b1.data[r];
    const double* row = params.w1.data.data() + r * params.w1.cols;
    for (std::size_t j = 0; j < input.size(); ++j) acc += row[j] * input[j];
    c.hidden_pre[r] = acc;
    c.hidden[r] = leaky_relu(acc);
  }
  c.logits.resize(params.slots());
  for (std::size_t r = 0; r < params.slots(); ++r) {
    double acc = params.b2.data[r];
    const double* row = params.w2.data.data() + r * h;
    for (std::size_t j = 0; j < h; ++j) acc += row[j] * c.hidden[j];
    c.logits[r] = acc;
  }
  return c;
}

std::vector<double> masked_softmax(std::span<const double> logits, std::size_t available) {
  std::vector<double> out(logits.size(), 0.0);
  if (available == 0) return out;
  const double mx = *std::max_element(logits.begin(), logits.begin() + static_cast<std::ptrdiff_t>(available));
  double sum = 0.0;
  for (std::size_t j = 0; j < available; ++j) {
    out[j] = std::exp(logits[j] - mx);
    sum += out[j];
  }
  for (std::size_t j = 0; j < available; ++j) out[j] /= sum;
  return out;
}

std::vector<double> policy_forward(const PolicyParameters& params, std::span<const double> input,
                                   std::size_t available) {
  const PolicyCache c = policy_logits(params, input, available);
  return masked_softmax(c.logits, available);
}

double gaussian_log_prob(std::span<const double> z, std::span<const double> mean,
                         std::span<const double> log_var, std::size_t available) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double lp = 0.0;
  for (std::size_t j = 0; j < available; ++j) {
    const double diff = z[j] - mean[j];
    lp -= 0.5 * (diff * diff * std::exp(-log_var[j]) + log_var[j] + kLog2Pi);
  }
  return lp;
}

SampledAction sample_action(const PolicyCache& cache, const PolicyParameters& params, Rng& rng) {
  SampledAction a;
  a.logits = cache.logits;
  for (std::size_t j = 0; j < cache.available; ++j) {
    a.logits[j] += std::exp(0.5 * params.log_var.data[j]) * rng.normal();
  }
  a.ratios = masked_softmax(a.logits, cache.available);
  a.log_prob = gaussian_log_prob(a.logits, cache.logits, params.log_var.data, cache.available);
  return a;
}

std::vector<double> policy_backward(const PolicyParameters& params, const PolicyCache& cache,
                                    std::span<const double> d_logits,
                                    std::span<const double> d_log_var, PolicyParameters& grads) {
  const std::size_t h = params.w1.rows;
  const std::size_t in = params.w1.cols;
  const std::size_t slots = params.slots();
  for (std::size_t j = 0; j < slots && j < d_log_var.size(); ++j) {
    grads.log_var.data[j] += d_log_var[j];
  }
  std::vector<double> d_hidden(h, 0.0);
  for (std::size_t r = 0; r < slots; ++r) {
    const double g = d_logits[r];
    if (g == 0.0) continue;
    grads.b2.data[r] += g;
    double* grow = grads.w2.data.data() + r * h;
    const double* wrow = params.w2.data.data() + r * h;
    for (std::size_t j = 0; j < h; ++j) {
      grow[j] += g * cache.hidden[j];
      d_hidden[j] += g * wrow[j];
    }
  }
  std::vector<double> d_input(in, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    const double g = d_hidden[r] * leaky_relu_grad(cache.hidden_pre[r]);
    if (g == 0.0) continue;
    grads.b1.data[r] += g;
    double* grow = grads.w1.data.data() + r * in;
    const double* wrow = params.w1.data.data() + r * in;
    for (std::size_t j = 0; j < in; ++j) {
      grow[j] += g * cache.input[j];
      d_input[j] += g * wrow[j];
    }
  }
  return d_input;
}

}  // namespace flowte
