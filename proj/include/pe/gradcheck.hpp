#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pe/tensor.hpp"

namespace pe {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
  bool pass = false;
  double tolerance = 0.0;
};

// Central-difference verification of analytic gradients, double precision.
// `loss_fn` must rebuild the forward pass from the current parameter values
// and is expected to be deterministic (fix any rng it uses per call).
// Step h = 1e-4 * (|w|+1); relative error |a-n| / max(|a|,|n|,1e-8).
inline GradCheckReport finite_difference_check(
    const std::function<double()>& loss_fn,
    const std::function<void()>& backward_fn,
    const std::vector<std::pair<std::string, Tensor<double>*>>& params, double tolerance) {
  GradCheckReport rep;
  rep.tolerance = tolerance;

  for (auto& [name, p] : params) p->zero_grad();
  backward_fn();

  for (auto& [name, p] : params) {
    for (size_t i = 0; i < p->data.size(); ++i) {
      const double w = p->data[i];
      const double h = 1e-4 * (std::abs(w) + 1.0);
      p->data[i] = w + h;
      const double fp = loss_fn();
      p->data[i] = w - h;
      const double fm = loss_fn();
      p->data[i] = w;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad[i];
      const double rel =
          std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = name;
        rep.worst_index = int(i);
      }
    }
  }
  rep.pass = rep.max_rel_error < tolerance;
  return rep;
}

}  // namespace pe
