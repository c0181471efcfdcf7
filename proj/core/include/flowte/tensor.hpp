#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace flowte {

/// Row-major dense matrix of doubles; vectors are n x 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
  void zero() { data.assign(data.size(), 0.0); }

  bool operator==(const Tensor&) const = default;
};

inline constexpr double kLeakySlope = 0.01;

inline double leaky_relu(double x) { return x > 0.0 ? x : kLeakySlope * x; }
inline double leaky_relu_grad(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

/// Fills with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from a splitmix64 stream.
void init_uniform(Tensor& t, std::size_t fan_in, std::uint64_t& stream);

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam over a fixed list of tensors. `ascend` flips the update direction.
class Adam {
 public:
  Adam(const std::vector<Tensor*>& params, AdamOptions options);

  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
            bool ascend);
  std::size_t steps() const { return t_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  AdamOptions options_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace flowte
