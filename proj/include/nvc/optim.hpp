#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nvc/tensor.hpp"

namespace nvc {

/// A named trainable tensor plus its Adam moment accumulators.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  std::vector<T> adam_m;
  std::vector<T> adam_v;
  std::int64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v, bool trainable = true)
      : name(std::move(n)), value(std::move(v)) {
    if (trainable) {
      value.set_requires_grad();
      adam_m.assign(value.data().size(), T(0));
      adam_v.assign(value.data().size(), T(0));
    }
  }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update with bias correction. Gradients are left untouched;
/// the caller zeroes them between steps.
template <typename T>
void adam_step(std::vector<Parameter<T>*> params, const AdamConfig& cfg = {}) {
  for (Parameter<T>* p : params) {
    if (!p->value.requires_grad())
      throw error("adam_step: parameter '" + p->name + "' has no gradient");
    const auto& g = p->value.grad();
    auto& w = p->value.mutable_data();
    const std::int64_t t = ++p->step_count;
    const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(t))));
    const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(t))));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
    for (std::size_t i = 0; i < w.size(); ++i) {
      T m = p->adam_m[i] = b1 * p->adam_m[i] + (T(1) - b1) * g[i];
      T v = p->adam_v[i] = b2 * p->adam_v[i] + (T(1) - b2) * g[i] * g[i];
      w[i] -= lr * (m * c1) / (std::sqrt(v * c2) + eps);
    }
  }
}

template <typename T>
void zero_grads(std::vector<Parameter<T>*> params) {
  for (Parameter<T>* p : params) p->value.zero_grad();
}

}  // namespace nvc
