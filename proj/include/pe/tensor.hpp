#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pe/common.hpp"

namespace pe {

// Dense n-d array, row-major, with an optional same-shape gradient buffer.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until alloc_grad()

  Tensor() = default;

  explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
    for (int d : shape)
      if (d <= 0) throw DimensionError("tensor dimensions must be positive");
    data.assign(size_t(numel()), fill);
  }

  Tensor(std::vector<int> s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    if (int64_t(data.size()) != numel())
      throw DimensionError(strf("tensor data length %zu does not match shape product %lld",
                                data.size(), (long long)numel()));
  }

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  int dim(int i) const { return shape[size_t(i)]; }
  int ndim() const { return int(shape.size()); }

  void alloc_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
  bool has_grad() const { return grad.size() == data.size(); }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace pe
