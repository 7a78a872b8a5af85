#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pe/common.hpp"
#include "pe/tensor.hpp"

namespace pe {

enum class OptAlgorithm { adam, sgd_momentum };

// Moment/velocity buffers plus hyperparameters for the two optimizers the
// training loops use. Buffers are keyed by position: update() must always be
// called with the same parameter list in the same order.
template <typename T>
struct OptimizerState {
  OptAlgorithm algorithm = OptAlgorithm::adam;
  int64_t step_count = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  double momentum_coefficient = 0.949;
  double l2_coefficient = 0.0;  // informational; the L2 term lives in the loss
  std::vector<Tensor<T>> m;     // adam first moments / sgd velocity
  std::vector<Tensor<T>> v;     // adam second moments

  static OptimizerState adam_state(double lr) {
    OptimizerState s;
    s.algorithm = OptAlgorithm::adam;
    s.learning_rate = lr;
    return s;
  }
  static OptimizerState sgd_state(double lr, double mu) {
    OptimizerState s;
    s.algorithm = OptAlgorithm::sgd_momentum;
    s.learning_rate = lr;
    s.momentum_coefficient = mu;
    return s;
  }
};

template <typename T>
inline void optimizer_bind(OptimizerState<T>& st, const std::vector<Tensor<T>*>& params) {
  if (!st.m.empty()) {
    if (st.m.size() != params.size())
      throw StateError("optimizer state does not match parameter count");
    for (size_t i = 0; i < params.size(); ++i)
      if (!st.m[i].same_shape(*params[i]))
        throw StateError(strf("optimizer moment %zu shape mismatch", i));
    return;
  }
  for (Tensor<T>* p : params) {
    st.m.emplace_back(p->shape);
    if (st.algorithm == OptAlgorithm::adam) st.v.emplace_back(p->shape);
  }
}

// Standard Adam with bias correction (Kingma & Ba defaults).
template <typename T>
inline void adam_step(const std::vector<Tensor<T>*>& params, OptimizerState<T>& st) {
  if (st.algorithm != OptAlgorithm::adam) throw StateError("adam_step: wrong algorithm");
  optimizer_bind(st, params);
  st.step_count += 1;
  const double b1t = 1.0 - std::pow(st.beta1, double(st.step_count));
  const double b2t = 1.0 - std::pow(st.beta2, double(st.step_count));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = *params[pi];
    if (!p.has_grad()) throw StateError("adam_step: parameter has no gradient");
    for (size_t i = 0; i < p.data.size(); ++i) {
      const double g = double(p.grad[i]);
      st.m[pi].data[i] = T(st.beta1 * double(st.m[pi].data[i]) + (1.0 - st.beta1) * g);
      st.v[pi].data[i] = T(st.beta2 * double(st.v[pi].data[i]) + (1.0 - st.beta2) * g * g);
      const double mhat = double(st.m[pi].data[i]) / b1t;
      const double vhat = double(st.v[pi].data[i]) / b2t;
      p.data[i] -= T(st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon));
    }
  }
}

// v <- mu*v - lr*g;  w <- w + v
template <typename T>
inline void sgd_momentum_step(const std::vector<Tensor<T>*>& params, OptimizerState<T>& st) {
  if (st.algorithm != OptAlgorithm::sgd_momentum)
    throw StateError("sgd_momentum_step: wrong algorithm");
  optimizer_bind(st, params);
  st.step_count += 1;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = *params[pi];
    if (!p.has_grad()) throw StateError("sgd_momentum_step: parameter has no gradient");
    for (size_t i = 0; i < p.data.size(); ++i) {
      st.m[pi].data[i] = T(st.momentum_coefficient * double(st.m[pi].data[i]) -
                           st.learning_rate * double(p.grad[i]));
      p.data[i] += st.m[pi].data[i];
    }
  }
}

}  // namespace pe
