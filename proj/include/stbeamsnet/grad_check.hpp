#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "stbeamsnet/tensor.hpp"

namespace stbn::nn {

/// Central finite-difference check of reverse-mode gradients.
///
/// `fn` must evaluate the scalar loss from the *current* values of `inputs`
/// using the tape it is given. It is called once with a recording tape for the
/// analytic gradients and then twice per coordinate with a non-recording tape.
/// Returns max_i |g_ad_i - g_fd_i| / max(1, |g_fd_i|) over all coordinates.
template <typename T = double>
double finite_diff_check(const std::function<Tensor<T>(Tape<T>&)>& fn,
                         std::vector<Tensor<T>> inputs, double eps = 1e-5) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  std::vector<std::vector<T>> analytic;
  {
    Tape<T> tape;
    Tensor<T> loss = fn(tape);
    tape.backward(loss);
    for (auto& in : inputs) {
      analytic.emplace_back(in.grad(), in.grad() + in.numel());
    }
  }

  const auto probe = [&fn]() -> double {
    Tape<T> silent(false);
    Tensor<T> loss = fn(silent);
    return static_cast<double>(loss[0]);
  };

  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& in = inputs[t];
    for (std::size_t i = 0; i < in.numel(); ++i) {
      const T saved = in[i];
      in[i] = saved + static_cast<T>(eps);
      const double f_plus = probe();
      in[i] = saved - static_cast<T>(eps);
      const double f_minus = probe();
      in[i] = saved;
      const double g_fd = (f_plus - f_minus) / (2.0 * eps);
      const double g_ad = static_cast<double>(analytic[t][i]);
      worst = std::max(worst, std::abs(g_ad - g_fd) / std::max(1.0, std::abs(g_fd)));
    }
  }
  return worst;
}

}  // namespace stbn::nn
