#pragma once

#include "smaug/numerics/tensor.hpp"

#include <cmath>
#include <vector>

namespace smaug {

/// RMSProp without momentum or weight decay:
///   v <- alpha * v + (1 - alpha) * g^2
///   p <- p - lr * g / (sqrt(v) + eps)
template <typename T>
struct RmsPropState {
  T learning_rate = T(5e-4);
  T alpha = T(0.99);
  T epsilon = T(1e-5);
  // Indexed by position in the parameter list passed to step().
  std::vector<Matrix<T>> square_avg;

  void step(ParameterList<T>& params) {
    if (square_avg.size() != params.items.size()) {
      square_avg.clear();
      for (auto& [_, p] : params.items)
        square_avg.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
    for (std::size_t i = 0; i < params.items.size(); ++i) {
      Tensor<T>* p = params.items[i].second;
      auto& v = square_avg[i];
      v.array() = alpha * v.array() + (T(1) - alpha) * p->grad.array().square();
      p->value.array() -= learning_rate * p->grad.array() / (v.array().sqrt() + epsilon);
      p->zero_grad();
    }
  }
};

/// Rescales gradients so their global norm is at most max_norm. Returns the
/// norm before clipping.
template <typename T>
T clip_grad_norm(ParameterList<T>& params, T max_norm) {
  const T norm = params.grad_norm();
  if (max_norm > T(0) && norm > max_norm) {
    const T s = max_norm / (norm + T(1e-6));
    for (auto& [_, p] : params.items) p->grad *= s;
  }
  return norm;
}

}  // namespace smaug
