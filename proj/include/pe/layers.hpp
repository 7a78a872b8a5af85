#pragma once

#include <string>
#include <vector>

#include "pe/rng.hpp"
#include "pe/tape.hpp"
#include "pe/tensor.hpp"

namespace pe {

enum class LayerKind { conv2d, relu, maxpool2, global_avg_pool, dense, dropout, softmax };

struct LayerSpec {
  LayerKind kind;
  int channels = 0;  // conv2d output channels
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  int units = 0;      // dense
  double ratio = 0.0; // dropout

  static LayerSpec conv(int channels, int kernel = 3, int stride = 1, int pad = 1) {
    return {LayerKind::conv2d, channels, kernel, stride, pad, 0, 0.0};
  }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec maxpool2() { return {LayerKind::maxpool2}; }
  static LayerSpec global_avg_pool() { return {LayerKind::global_avg_pool}; }
  static LayerSpec dense(int units) { return {LayerKind::dense, 0, 0, 0, 0, units, 0.0}; }
  static LayerSpec dropout(double ratio) { return {LayerKind::dropout, 0, 0, 0, 0, 0, ratio}; }
  static LayerSpec softmax() { return {LayerKind::softmax}; }

  void validate() const {
    switch (kind) {
      case LayerKind::conv2d:
        if (channels < 1) throw ConfigError("conv2d needs output channels");
        if (kernel < 1 || kernel % 2 == 0) throw ConfigError("conv kernel must be odd and >= 1");
        if (stride < 1) throw ConfigError("conv stride must be >= 1");
        if (pad < 0) throw ConfigError("conv padding must be >= 0");
        break;
      case LayerKind::dense:
        if (units < 1) throw ConfigError("dense needs a unit count");
        break;
      case LayerKind::dropout:
        if (ratio < 0.0 || ratio >= 1.0) throw ConfigError("dropout ratio must be in [0,1)");
        break;
      default:
        break;
    }
  }
};

struct NamedParam {
  std::string name;
  Tensor<float> value;
  bool is_weight = false;  // L2 applies to weights, not biases
};

// An ordered layer stack owning its parameters. build() runs shape inference
// and He-uniform initialization; forward() records the pass on a tape.
class Sequential {
 public:
  Sequential() = default;
  Sequential(std::string prefix, std::vector<LayerSpec> specs)
      : prefix_(std::move(prefix)), specs_(std::move(specs)) {}

  void build(const std::vector<int>& input_shape, Rng& rng) {
    params_.clear();
    param_of_layer_.assign(specs_.size(), -1);
    std::vector<int> shape = input_shape;
    int conv_i = 0, dense_i = 0;
    for (size_t li = 0; li < specs_.size(); ++li) {
      const LayerSpec& s = specs_[li];
      s.validate();
      switch (s.kind) {
        case LayerKind::conv2d: {
          if (shape.size() != 3) throw ConfigError(prefix_ + ": conv2d needs HxWxC input");
          const int C = shape[2];
          param_of_layer_[li] = int(params_.size());
          params_.push_back({strf("%s.conv%d.weight", prefix_.c_str(), conv_i),
                             he_uniform({s.kernel, s.kernel, C, s.channels},
                                        s.kernel * s.kernel * C, rng),
                             true});
          params_.push_back({strf("%s.conv%d.bias", prefix_.c_str(), conv_i),
                             Tensor<float>({s.channels}), false});
          ++conv_i;
          shape = {(shape[0] + 2 * s.pad - s.kernel) / s.stride + 1,
                   (shape[1] + 2 * s.pad - s.kernel) / s.stride + 1, s.channels};
          if (shape[0] < 1 || shape[1] < 1) throw ConfigError(prefix_ + ": conv output collapsed");
          break;
        }
        case LayerKind::maxpool2:
          if (shape.size() != 3 || shape[0] % 2 || shape[1] % 2)
            throw ConfigError(strf("%s: maxpool2 needs even dims, got %dx%d", prefix_.c_str(),
                                   shape.size() == 3 ? shape[0] : -1,
                                   shape.size() == 3 ? shape[1] : -1));
          shape = {shape[0] / 2, shape[1] / 2, shape[2]};
          break;
        case LayerKind::global_avg_pool:
          if (shape.size() != 3) throw ConfigError(prefix_ + ": global_avg_pool needs HxWxC");
          shape = {shape[2]};
          break;
        case LayerKind::dense: {
          int n = 1;
          for (int d : shape) n *= d;
          param_of_layer_[li] = int(params_.size());
          params_.push_back({strf("%s.dense%d.weight", prefix_.c_str(), dense_i),
                             he_uniform({s.units, n}, n, rng), true});
          params_.push_back(
              {strf("%s.dense%d.bias", prefix_.c_str(), dense_i), Tensor<float>({s.units}), false});
          ++dense_i;
          shape = {s.units};
          break;
        }
        case LayerKind::relu:
        case LayerKind::dropout:
        case LayerKind::softmax:
          break;
      }
    }
    output_shape_ = shape;
    built_ = true;
  }

  // Records the stack on the tape. When trainable, parameters become bound
  // leaves (gradients accumulate into them); otherwise they enter as plain
  // inputs. weight_nodes collects the L2-eligible parameter node ids.
  int forward(Tape<float>& tape, int x, bool train, Rng& dropout_rng,
              std::vector<int>* weight_nodes = nullptr, bool trainable = true) {
    if (!built_) throw StateError(prefix_ + ": forward before build");
    int cur = x;
    for (size_t li = 0; li < specs_.size(); ++li) {
      const LayerSpec& s = specs_[li];
      switch (s.kind) {
        case LayerKind::conv2d: {
          const int pi = param_of_layer_[li];
          int w = trainable ? tape.param(params_[size_t(pi)].value)
                            : tape.input(params_[size_t(pi)].value);
          int b = trainable ? tape.param(params_[size_t(pi) + 1].value)
                            : tape.input(params_[size_t(pi) + 1].value);
          if (weight_nodes && trainable) weight_nodes->push_back(w);
          cur = tape.conv2d(cur, w, b, s.stride, s.pad);
          break;
        }
        case LayerKind::dense: {
          const int pi = param_of_layer_[li];
          int w = trainable ? tape.param(params_[size_t(pi)].value)
                            : tape.input(params_[size_t(pi)].value);
          int b = trainable ? tape.param(params_[size_t(pi) + 1].value)
                            : tape.input(params_[size_t(pi) + 1].value);
          if (weight_nodes && trainable) weight_nodes->push_back(w);
          cur = tape.dense(cur, w, b);
          break;
        }
        case LayerKind::relu: cur = tape.relu(cur); break;
        case LayerKind::maxpool2: cur = tape.maxpool2(cur); break;
        case LayerKind::global_avg_pool: cur = tape.global_avg_pool(cur); break;
        case LayerKind::dropout: cur = tape.dropout(cur, s.ratio, train, dropout_rng); break;
        case LayerKind::softmax: cur = tape.softmax(cur); break;
      }
    }
    return cur;
  }

  // evaluation-only pass without gradient bookkeeping overhead for callers
  Tensor<float> eval(const Tensor<float>& input) {
    Tape<float> tape;
    Rng dummy(0);
    int out = forward(tape, tape.input(input), false, dummy, nullptr, false);
    return tape.value(out);
  }

  std::vector<NamedParam>& params() { return params_; }
  const std::vector<NamedParam>& params() const { return params_; }
  const std::vector<int>& output_shape() const { return output_shape_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  bool built() const { return built_; }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  std::vector<Tensor<float>*> param_ptrs() {
    std::vector<Tensor<float>*> out;
    for (auto& p : params_) out.push_back(&p.value);
    return out;
  }

 private:
  static Tensor<float> he_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor<float> t(std::move(shape));
    const double limit = std::sqrt(6.0 / double(fan_in));
    for (float& v : t.data) v = float(rng.uniform(-limit, limit));
    return t;
  }

  std::string prefix_;
  std::vector<LayerSpec> specs_;
  std::vector<NamedParam> params_;
  std::vector<int> param_of_layer_;
  std::vector<int> output_shape_;
  bool built_ = false;
};

}  // namespace pe
