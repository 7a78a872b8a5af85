#pragma once

#include <map>
#include <string>
#include <vector>

#include "pe/optim.hpp"
#include "pe/tensor.hpp"

namespace pe {

// Self-describing binary container for parameters and (optionally) optimizer
// state. Layout after the magic line: metadata string map, named float32
// tensors, optimizer block. Little-endian throughout.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;  // order preserved
  bool has_optimizer = false;
  OptimizerState<float> optimizer;

  const Tensor<float>* find(const std::string& name) const {
    for (auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

inline constexpr const char* kCheckpointMagic = "PEPIPE-CKPT-v1\n";

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pe
