#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "stbeamsnet/tensor.hpp"

namespace stbn::nn {

template <typename T>
struct AdamConfig {
  T learning_rate = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

/// One adaptive-moment update with bias correction for a single buffer.
/// `step` is the 1-based update count shared by all parameters.
template <typename T>
void adam_step(T* values, const T* grads, T* m, T* v, std::size_t count, std::int64_t step,
               const AdamConfig<T>& cfg) {
  const T bc1 = T(1) - std::pow(cfg.beta1, static_cast<T>(step));
  const T bc2 = T(1) - std::pow(cfg.beta2, static_cast<T>(step));
  for (std::size_t i = 0; i < count; ++i) {
    m[i] = cfg.beta1 * m[i] + (T(1) - cfg.beta1) * grads[i];
    v[i] = cfg.beta2 * v[i] + (T(1) - cfg.beta2) * grads[i] * grads[i];
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

/// Adam over a fixed set of parameter tensors (registration order is the
/// deterministic update order).
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamConfig<T> cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto& p : params_) {
      p.ensure_grad();
      slots_.push_back(Slot{std::vector<T>(p.numel(), T(0)), std::vector<T>(p.numel(), T(0))});
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++step_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      adam_step(params_[i].data(), params_[i].grad(), slots_[i].m.data(), slots_[i].v.data(),
                params_[i].numel(), step_, cfg_);
    }
  }

  std::int64_t step_count() const { return step_; }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  std::vector<Tensor<T>> params_;
  std::vector<Slot> slots_;
  AdamConfig<T> cfg_;
  std::int64_t step_ = 0;
};

}  // namespace stbn::nn
