#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "pe/common.hpp"
#include "pe/kernels.hpp"
#include "pe/rng.hpp"
#include "pe/tensor.hpp"

namespace pe {

template <typename T>
inline T sigmoid_stable(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  T e = std::exp(z);
  return e / (T(1) + e);
}

// target/state buffers for the anchor-grid loss; produced by encode_targets.
template <typename T>
struct AnchorTargets {
  int grid = 0;
  int anchors = 0;
  Tensor<T> values;            // S x S x (A*5): tx,ty,tw,th filled on positive slots
  std::vector<uint8_t> state;  // S*S*A: 0 = negative, 1 = positive, 2 = ignore
  int n_positive = 0;
};

// Reverse-mode tape. Nodes are created in forward order; backward() walks them
// in reverse, which is a valid topological order by construction. Parameters
// registered via param() receive accumulated gradients in their own grad
// buffer when backward() finishes.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int input(Tensor<T> v) { return push(std::move(v), {}, nullptr); }

  int param(Tensor<T>& p) {
    Tensor<T> v;
    v.shape = p.shape;
    v.data = p.data;
    return push(std::move(v), {}, &p);
  }

  const Tensor<T>& value(int id) const { return node(id).value; }
  const Tensor<T>& grad_of(int id) const { return node(id).grad; }
  size_t size() const { return nodes_.size(); }

  int conv2d(int x, int w, int b, int stride, int pad) {
    const Tensor<T>& in = node(x).value;
    const Tensor<T>& k = node(w).value;
    const Tensor<T>& bias = node(b).value;
    if (in.ndim() != 3 || k.ndim() != 4 || bias.ndim() != 1)
      throw DimensionError("conv2d expects HxWxC input, KxKxCxF kernels, F bias");
    const int H = in.dim(0), W = in.dim(1), C = in.dim(2);
    const int K = k.dim(0), F = k.dim(3);
    if (k.dim(1) != K) throw DimensionError("conv2d kernels must be square");
    if (K % 2 == 0 || K < 1) throw DimensionError("conv2d kernel size must be odd and >= 1");
    if (k.dim(2) != C) throw DimensionError(strf("conv2d channel mismatch: input %d kernels %d", C, k.dim(2)));
    if (bias.dim(0) != F) throw DimensionError("conv2d bias length must equal filter count");
    if (stride < 1) throw DimensionError("conv2d stride must be >= 1");
    if (pad < 0) throw DimensionError("conv2d padding must be >= 0");
    if (H + 2 * pad < K || W + 2 * pad < K)
      throw DimensionError("conv2d input too small for kernel");
    const int Ho = (H + 2 * pad - K) / stride + 1;
    const int Wo = (W + 2 * pad - K) / stride + 1;

    Tensor<T> out({Ho, Wo, F});
    kernels::conv2d_forward(in.data.data(), H, W, C, k.data.data(), K, F, bias.data.data(),
                            stride, pad, out.data.data(), Ho, Wo);
    check_finite(out, "conv2d");
    int id = push(std::move(out), {x, w, b}, nullptr);
    node(id).back = [x, w, b, stride, pad, H, W, C, K, F, Ho, Wo, id](Tape& t) {
      Node& n = t.node(id);
      Node& nx = t.node(x);
      Node& nw = t.node(w);
      Node& nb = t.node(b);
      kernels::conv2d_backward_input(n.grad.data.data(), Ho, Wo, F, nw.value.data.data(), K, C,
                                     stride, pad, nx.grad.data.data(), H, W);
      kernels::conv2d_backward_weights(nx.value.data.data(), H, W, C, n.grad.data.data(), Ho, Wo,
                                       F, K, stride, pad, nw.grad.data.data(),
                                       nb.grad.data.data());
    };
    return id;
  }

  int dense(int x, int w, int b) {
    const Tensor<T>& in = node(x).value;
    const Tensor<T>& wt = node(w).value;
    const Tensor<T>& bias = node(b).value;
    if (wt.ndim() != 2) throw DimensionError("dense weights must be MxN");
    const int M = wt.dim(0), N = wt.dim(1);
    if (int64_t(N) != in.numel())
      throw DimensionError(strf("dense input length %lld != weight columns %d",
                                (long long)in.numel(), N));
    if (bias.numel() != M) throw DimensionError("dense bias length must equal M");

    Tensor<T> out({M});
    kernels::dense_forward(in.data.data(), N, wt.data.data(), bias.data.data(), M,
                           out.data.data());
    check_finite(out, "dense");
    int id = push(std::move(out), {x, w, b}, nullptr);
    node(id).back = [x, w, b, M, N, id](Tape& t) {
      Node& n = t.node(id);
      kernels::dense_backward(t.node(x).value.data.data(), N, t.node(w).value.data.data(), M,
                              n.grad.data.data(), t.node(x).grad.data.data(),
                              t.node(w).grad.data.data(), t.node(b).grad.data.data());
    };
    return id;
  }

  int relu(int x) {
    const Tensor<T>& in = node(x).value;
    Tensor<T> out = in;
    for (T& v : out.data)
      if (v < T(0)) v = T(0);
    int id = push(std::move(out), {x}, nullptr);
    node(id).back = [x, id](Tape& t) {
      Node& n = t.node(id);
      Node& nx = t.node(x);
      for (size_t i = 0; i < n.grad.data.size(); ++i)
        if (nx.value.data[i] > T(0)) nx.grad.data[i] += n.grad.data[i];
    };
    return id;
  }

  int maxpool2(int x) {
    const Tensor<T>& in = node(x).value;
    if (in.ndim() != 3) throw DimensionError("maxpool2 expects HxWxC");
    const int H = in.dim(0), W = in.dim(1), C = in.dim(2);
    if (H % 2 != 0 || W % 2 != 0)
      throw DimensionError(strf("maxpool2 needs even dimensions, got %dx%d", H, W));
    const int Ho = H / 2, Wo = W / 2;
    Tensor<T> out({Ho, Wo, C});
    std::vector<int32_t> argmax(size_t(out.numel()));
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox)
        for (int c = 0; c < C; ++c) {
          T best = -std::numeric_limits<T>::infinity();
          int32_t best_i = 0;
          // ties keep the first cell in scan order
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              int32_t idx = ((2 * oy + dy) * W + (2 * ox + dx)) * C + c;
              if (in.data[size_t(idx)] > best) {
                best = in.data[size_t(idx)];
                best_i = idx;
              }
            }
          out.data[(size_t(oy) * Wo + ox) * C + c] = best;
          argmax[(size_t(oy) * Wo + ox) * C + c] = best_i;
        }
    int id = push(std::move(out), {x}, nullptr);
    node(id).back = [x, id, argmax = std::move(argmax)](Tape& t) {
      Node& n = t.node(id);
      Node& nx = t.node(x);
      for (size_t i = 0; i < argmax.size(); ++i) nx.grad.data[size_t(argmax[i])] += n.grad.data[i];
    };
    return id;
  }

  int global_avg_pool(int x) {
    const Tensor<T>& in = node(x).value;
    if (in.ndim() != 3) throw DimensionError("global_avg_pool expects HxWxC");
    const int H = in.dim(0), W = in.dim(1), C = in.dim(2);
    Tensor<T> out({C});
    for (int i = 0; i < H * W; ++i)
      for (int c = 0; c < C; ++c) out.data[size_t(c)] += in.data[size_t(i) * C + c];
    const T inv = T(1) / T(H * W);
    for (T& v : out.data) v *= inv;
    int id = push(std::move(out), {x}, nullptr);
    node(id).back = [x, id, H, W, C](Tape& t) {
      Node& n = t.node(id);
      Node& nx = t.node(x);
      const T inv = T(1) / T(H * W);
      for (int i = 0; i < H * W; ++i)
        for (int c = 0; c < C; ++c) nx.grad.data[size_t(i) * C + c] += n.grad.data[size_t(c)] * inv;
    };
    return id;
  }

  int softmax(int x) {
    const Tensor<T>& in = node(x).value;
    if (!in.all_finite()) throw NumericError("softmax: non-finite logits");
    Tensor<T> out = in;
    T mx = out.data[0];
    for (T v : out.data) mx = std::max(mx, v);
    T sum = T(0);
    for (T& v : out.data) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (T& v : out.data) v /= sum;
    int id = push(std::move(out), {x}, nullptr);
    node(id).back = [x, id](Tape& t) {
      Node& n = t.node(id);
      Node& nx = t.node(x);
      T dot = T(0);
      for (size_t i = 0; i < n.grad.data.size(); ++i) dot += n.grad.data[i] * n.value.data[i];
      for (size_t i = 0; i < n.grad.data.size(); ++i)
        nx.grad.data[i] += n.value.data[i] * (n.grad.data[i] - dot);
    };
    return id;
  }

  // inverted dropout: eval mode is the identity, train mode zeroes with
  // probability `ratio` and scales survivors by 1/(1-ratio)
  int dropout(int x, double ratio, bool train, Rng& rng) {
    if (ratio < 0.0 || ratio >= 1.0)
      throw ConfigError(strf("dropout ratio must be in [0,1), got %g", ratio));
    const Tensor<T>& in = node(x).value;
    if (!train || ratio == 0.0) {
      Tensor<T> out = in;
      int id = push(std::move(out), {x}, nullptr);
      node(id).back = [x, id](Tape& t) {
        Node& n = t.node(id);
        Node& nx = t.node(x);
        for (size_t i = 0; i < n.grad.data.size(); ++i) nx.grad.data[i] += n.grad.data[i];
      };
      return id;
    }
    const T scale = T(1.0 / (1.0 - ratio));
    std::vector<uint8_t> keep(in.data.size());
    Tensor<T> out = in;
    for (size_t i = 0; i < out.data.size(); ++i) {
      keep[i] = rng.uniform() >= ratio ? 1 : 0;
      out.data[i] = keep[i] ? out.data[i] * scale : T(0);
    }
    int id = push(std::move(out), {x}, nullptr);
    node(id).back = [x, id, scale, keep = std::move(keep)](Tape& t) {
      Node& n = t.node(id);
      Node& nx = t.node(x);
      for (size_t i = 0; i < n.grad.data.size(); ++i)
        if (keep[i]) nx.grad.data[i] += n.grad.data[i] * scale;
    };
    return id;
  }

  // -log(probs[target]) with the log clamped at probs >= 1e-12
  int cross_entropy(int probs, int target) {
    const Tensor<T>& p = node(probs).value;
    if (target < 0 || int64_t(target) >= p.numel())
      throw InputError(strf("cross_entropy: class %d out of range (C=%lld)", target,
                            (long long)p.numel()));
    const double clamp = 1e-12;
    double pt = std::max(double(p.data[size_t(target)]), clamp);
    Tensor<T> out({1});
    out.data[0] = T(-std::log(pt));
    check_finite(out, "cross_entropy");
    int id = push(std::move(out), {probs}, nullptr);
    node(id).back = [probs, target, id](Tape& t) {
      Node& n = t.node(id);
      Node& np = t.node(probs);
      double p_t = double(np.value.data[size_t(target)]);
      if (p_t > 1e-12)  // below the clamp the loss is locally constant
        np.grad.data[size_t(target)] += T(-1.0 / p_t) * n.grad.data[0];
    };
    return id;
  }

  // coeff * sum of squares over the given parameter nodes (weights only by
  // convention; callers decide what to pass)
  int l2_penalty(const std::vector<int>& weights, double coeff) {
    double s = 0.0;
    for (int w : weights)
      for (T v : node(w).value.data) s += double(v) * double(v);
    Tensor<T> out({1});
    out.data[0] = T(coeff * s);
    check_finite(out, "l2_penalty");
    int id = push(std::move(out), weights, nullptr);
    node(id).back = [weights, coeff, id](Tape& t) {
      Node& n = t.node(id);
      const T g = n.grad.data[0];
      for (int w : weights) {
        Node& nw = t.node(w);
        for (size_t i = 0; i < nw.value.data.size(); ++i)
          nw.grad.data[i] += T(2.0 * coeff) * nw.value.data[i] * g;
      }
    };
    return id;
  }

  int add(int a, int b) {
    const Tensor<T>& va = node(a).value;
    const Tensor<T>& vb = node(b).value;
    if (!va.same_shape(vb)) throw DimensionError("add: shape mismatch");
    Tensor<T> out = va;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
    check_finite(out, "add");
    int id = push(std::move(out), {a, b}, nullptr);
    node(id).back = [a, b, id](Tape& t) {
      Node& n = t.node(id);
      for (size_t i = 0; i < n.grad.data.size(); ++i) {
        t.node(a).grad.data[i] += n.grad.data[i];
        t.node(b).grad.data[i] += n.grad.data[i];
      }
    };
    return id;
  }

  // Composite one-stage detector loss over an S x S x (A*5) prediction grid:
  //   lambda_coord * sum_pos [(sig(tx)-tx')^2 + (sig(ty)-ty')^2 + (tw-tw')^2 + (th-th')^2]
  // + sum_pos BCE(obj, 1) + lambda_noobj * sum_neg BCE(obj, 0);  ignore slots skipped.
  int masked_anchor_loss(int pred, const AnchorTargets<T>& tgt, double lambda_coord,
                         double lambda_noobj) {
    const Tensor<T>& p = node(pred).value;
    const int S = tgt.grid, A = tgt.anchors;
    if (p.ndim() != 3 || p.dim(0) != S || p.dim(1) != S || p.dim(2) != A * 5)
      throw DimensionError("masked_anchor_loss: prediction grid does not match targets");
    if (int64_t(tgt.state.size()) != int64_t(S) * S * A)
      throw DimensionError("masked_anchor_loss: state mask size mismatch");

    double loss = 0.0;
    for (int cell = 0; cell < S * S; ++cell)
      for (int a = 0; a < A; ++a) {
        const uint8_t st = tgt.state[size_t(cell) * A + a];
        if (st == 2) continue;
        const size_t base = size_t(cell) * A * 5 + size_t(a) * 5;
        const double obj = double(p.data[base + 4]);
        if (st == 1) {
          for (int q = 0; q < 2; ++q) {  // tx, ty through sigmoid
            double u = sigmoid_stable(double(p.data[base + q]));
            double d = u - double(tgt.values.data[base + q]);
            loss += lambda_coord * d * d;
          }
          for (int q = 2; q < 4; ++q) {  // tw, th raw
            double d = double(p.data[base + q]) - double(tgt.values.data[base + q]);
            loss += lambda_coord * d * d;
          }
          loss += bce_logit(obj, 1.0);
        } else {
          loss += lambda_noobj * bce_logit(obj, 0.0);
        }
      }
    Tensor<T> out({1});
    out.data[0] = T(loss);
    check_finite(out, "masked_anchor_loss");
    int id = push(std::move(out), {pred}, nullptr);
    node(id).back = [pred, id, S, A, lambda_coord, lambda_noobj, values = tgt.values,
                     state = tgt.state](Tape& t) {
      Node& n = t.node(id);
      Node& np = t.node(pred);
      const T g = n.grad.data[0];
      for (int cell = 0; cell < S * S; ++cell)
        for (int a = 0; a < A; ++a) {
          const uint8_t st = state[size_t(cell) * A + a];
          if (st == 2) continue;
          const size_t base = size_t(cell) * A * 5 + size_t(a) * 5;
          const double obj = double(np.value.data[base + 4]);
          if (st == 1) {
            for (int q = 0; q < 2; ++q) {
              double u = sigmoid_stable(double(np.value.data[base + q]));
              double d = u - double(values.data[base + q]);
              np.grad.data[base + q] += T(lambda_coord * 2.0 * d * u * (1.0 - u)) * g;
            }
            for (int q = 2; q < 4; ++q) {
              double d = double(np.value.data[base + q]) - double(values.data[base + q]);
              np.grad.data[base + q] += T(lambda_coord * 2.0 * d) * g;
            }
            np.grad.data[base + 4] += T(sigmoid_stable(obj) - 1.0) * g;
          } else {
            np.grad.data[base + 4] += T(lambda_noobj * sigmoid_stable(obj)) * g;
          }
        }
    };
    return id;
  }

  void backward(int loss) {
    if (loss < 0 || size_t(loss) >= nodes_.size())
      throw StateError("backward: no recorded graph for this id");
    if (nodes_[size_t(loss)].value.numel() != 1)
      throw StateError("backward: loss must be a scalar");
    for (Node& n : nodes_) {
      n.grad = Tensor<T>(n.value.shape);
    }
    nodes_[size_t(loss)].grad.data[0] = T(1);
    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[size_t(id)];
      if (n.back) n.back(*this);
    }
    for (Node& n : nodes_) {
      if (!n.bound) continue;
      n.bound->alloc_grad();
      for (size_t i = 0; i < n.grad.data.size(); ++i) n.bound->grad[i] += n.grad.data[i];
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<int> parents;
    std::function<void(Tape&)> back;
    Tensor<T>* bound = nullptr;
  };

  Node& node(int id) { return nodes_.at(size_t(id)); }
  const Node& node(int id) const { return nodes_.at(size_t(id)); }

  int push(Tensor<T> v, std::vector<int> parents, Tensor<T>* bound) {
    Node n;
    n.value = std::move(v);
    n.parents = std::move(parents);
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  static double bce_logit(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }

  static void check_finite(const Tensor<T>& t, const char* op) {
    if (!t.all_finite()) throw NumericError(strf("%s produced non-finite values", op));
  }

  std::vector<Node> nodes_;
};

}  // namespace pe
