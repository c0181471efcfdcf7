#include "flowte/tensor.hpp"

#include "flowte/error.hpp"

namespace flowte {

void init_uniform(Tensor& t, std::size_t fan_in, std::uint64_t& stream) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (double& x : t.data) {
    std::uint64_t z = (stream += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    x = bound * (2.0 * u - 1.0);
  }
}

Adam::Adam(const std::vector<Tensor*>& params, AdamOptions options) : options_(options) {
  for (const Tensor* p : params) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                bool ascend) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ValidationError("optimizer parameter list changed shape");
  }
  ++t_;
  const double b1t = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double b2t = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  const double sign = ascend ? 1.0 : -1.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    const auto& g = grads[k]->data;
    auto& x = params[k]->data;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double mh = m[i] / b1t;
      const double vh = v[i] / b2t;
      x[i] += sign * options_.learning_rate * mh / (std::sqrt(vh) + options_.epsilon);
    }
  }
}

}  // namespace flowte
