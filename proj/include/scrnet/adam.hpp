#ifndef SCRNET_ADAM_HPP
#define SCRNET_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "scrnet/error.hpp"
#include "scrnet/tensor.hpp"

namespace scrnet {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter list. Shapes follow the parameters of
/// the first step.
template <typename T>
struct AdamState {
  AdamHyper hyper;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t t = 0;
};

/// One bias-corrected Adam update; gradients are cleared afterwards.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr) {
  if (state.m.empty()) {
    for (auto& p : params) {
      state.m.emplace_back(p.numel(), T(0));
      state.v.emplace_back(p.numel(), T(0));
    }
  }
  if (state.m.size() != params.size()) throw InvalidArgument("adam_step: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw InvalidArgument("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.m[i].size() != params[i].numel()) throw InvalidArgument("adam_step: parameter shape changed");
  }

  ++state.t;
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = params[i].values();
    const auto grad = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      m[j] = static_cast<T>(b1 * m[j] + (1.0 - b1) * g);
      v[j] = static_cast<T>(b2 * v[j] + (1.0 - b2) * g * g);
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      value[j] = static_cast<T>(value[j] - lr * m_hat / (std::sqrt(v_hat) + state.hyper.epsilon));
    }
    params[i].zero_grad();
  }
}

}  // namespace scrnet

#endif  // SCRNET_ADAM_HPP
