#include "pe/augment.hpp"

#include <cmath>

namespace pe {

AffineSample sample_affine(const AugmentConfig& config, int width, int height, Rng& rng) {
  config.validate();
  AffineSample out;

  const double deg = rng.uniform(-config.rotation_deg_max, config.rotation_deg_max);
  const double dx = rng.uniform(-config.shift_frac, config.shift_frac) * width;
  const double dy = rng.uniform(-config.shift_frac, config.shift_frac) * height;
  const double zoom = rng.uniform(1.0 - config.zoom_frac, 1.0 + config.zoom_frac);
  const double shear = rng.uniform(-config.shear_frac, config.shear_frac);
  out.flip = rng.bernoulli(config.hflip_prob);

  const double th = deg * M_PI / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  // A = zoom * shear_x * rotation
  const double a00 = zoom * (c + shear * s);
  const double a01 = zoom * (-s + shear * c);
  const double a10 = zoom * s;
  const double a11 = zoom * c;

  const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
  out.matrix = {a00, a01, cx + dx - (a00 * cx + a01 * cy),
                a10, a11, cy + dy - (a10 * cx + a11 * cy)};
  return out;
}

Tensor<float> apply_affine(const Tensor<float>& image, const std::array<double, 6>& m) {
  if (image.ndim() != 3 || image.dim(2) != 1) throw DimensionError("apply_affine expects HxWx1");
  const int H = image.dim(0), W = image.dim(1);

  const double det = m[0] * m[4] - m[1] * m[3];
  if (std::abs(det) < 1e-12) throw InputError("apply_affine: singular matrix");
  const double i00 = m[4] / det, i01 = -m[1] / det;
  const double i10 = -m[3] / det, i11 = m[0] / det;

  Tensor<float> out({H, W, 1});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double rx = x - m[2], ry = y - m[5];
      const double sx = i00 * rx + i01 * ry;
      const double sy = i10 * rx + i11 * ry;
      int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
      const double wx = sx - x0, wy = sy - y0;
      // nearest-edge fill: clamp all four taps into the image
      const int x0c = std::clamp(x0, 0, W - 1), x1c = std::clamp(x0 + 1, 0, W - 1);
      const int y0c = std::clamp(y0, 0, H - 1), y1c = std::clamp(y0 + 1, 0, H - 1);
      const double v = (1 - wy) * ((1 - wx) * image.data[size_t(y0c) * W + x0c] +
                                   wx * image.data[size_t(y0c) * W + x1c]) +
                       wy * ((1 - wx) * image.data[size_t(y1c) * W + x0c] +
                             wx * image.data[size_t(y1c) * W + x1c]);
      out.data[size_t(y) * W + x] = float(v);
    }
  return out;
}

Tensor<float> hflip_image(const Tensor<float>& image) {
  if (image.ndim() != 3 || image.dim(2) != 1) throw DimensionError("hflip_image expects HxWx1");
  const int H = image.dim(0), W = image.dim(1);
  Tensor<float> out({H, W, 1});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) out.data[size_t(y) * W + x] = image.data[size_t(y) * W + (W - 1 - x)];
  return out;
}

std::vector<BoxLabel> flip_boxes(const std::vector<BoxLabel>& boxes) {
  std::vector<BoxLabel> out;
  out.reserve(boxes.size());
  for (const BoxLabel& b : boxes) {
    validate_label(b);
    BoxLabel f = b;
    f.cx = 1.0 - b.cx;
    out.push_back(f);
  }
  return out;
}

Tensor<float> augment_image(const Tensor<float>& image, const AugmentConfig& config, Rng& rng) {
  AffineSample a = sample_affine(config, image.dim(1), image.dim(0), rng);
  if (a.flip) return apply_affine(hflip_image(image), a.matrix);
  return apply_affine(image, a.matrix);
}

}  // namespace pe
