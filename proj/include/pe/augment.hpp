#pragma once

#include <array>
#include <vector>

#include "pe/boxes.hpp"
#include "pe/rng.hpp"
#include "pe/tensor.hpp"

namespace pe {

// training-time augmentation recipe: rotation 10 deg, shift 5%, zoom 30%,
// shear 20%, horizontal flip
struct AugmentConfig {
  double rotation_deg_max = 10.0;
  double shift_frac = 0.05;
  double zoom_frac = 0.30;
  double shear_frac = 0.20;
  double hflip_prob = 0.5;
  uint64_t seed = 0;

  void validate() const {
    if (rotation_deg_max < 0 || shift_frac < 0 || zoom_frac < 0 || shear_frac < 0)
      throw ConfigError("augment ranges must be >= 0");
    if (hflip_prob < 0 || hflip_prob > 1) throw ConfigError("hflip_prob must be in [0,1]");
  }
};

// 2x3 affine, row-major: p_out = [m00 m01; m10 m11] * p_in + [m02; m12]
struct AffineSample {
  std::array<double, 6> matrix{1, 0, 0, 0, 1, 0};
  bool flip = false;
};

// Random affine around the image center. Composition order is fixed:
// center -> rotate -> shear -> zoom -> shift. Draw order is fixed too, so a
// given rng state always yields the same transform.
AffineSample sample_affine(const AugmentConfig& config, int width, int height, Rng& rng);

// Inverse-mapped bilinear warp with nearest-edge fill.
Tensor<float> apply_affine(const Tensor<float>& image, const std::array<double, 6>& matrix);

Tensor<float> hflip_image(const Tensor<float>& image);

// mirror boxes for a horizontal flip; sizes are preserved exactly
std::vector<BoxLabel> flip_boxes(const std::vector<BoxLabel>& boxes);

// full classifier-side pipeline: flip (maybe) then affine
Tensor<float> augment_image(const Tensor<float>& image, const AugmentConfig& config, Rng& rng);

}  // namespace pe
