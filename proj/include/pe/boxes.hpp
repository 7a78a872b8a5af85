#pragma once

#include <vector>

#include "pe/common.hpp"

namespace pe {

// axis-aligned pixel rectangle, corner form
struct Rect {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_max > x_min && y_max > y_min; }
};

// ground-truth box, normalized center/size form ("class cx cy w h" sidecars)
struct BoxLabel {
  int class_id = 0;
  double cx = 0, cy = 0, w = 0, h = 0;
};

struct Detection {
  Rect box;
  double confidence = 0;
};

inline Rect rect_from_label(const BoxLabel& b, int image_w, int image_h) {
  return Rect{(b.cx - b.w / 2) * image_w, (b.cy - b.h / 2) * image_h,
              (b.cx + b.w / 2) * image_w, (b.cy + b.h / 2) * image_h};
}

inline BoxLabel label_from_rect(const Rect& r, int image_w, int image_h, int class_id = 0) {
  BoxLabel b;
  b.class_id = class_id;
  b.cx = (r.x_min + r.x_max) / 2.0 / image_w;
  b.cy = (r.y_min + r.y_max) / 2.0 / image_h;
  b.w = r.width() / image_w;
  b.h = r.height() / image_h;
  return b;
}

inline void validate_label(const BoxLabel& b) {
  const double eps = 1e-6;
  if (!(b.w > 0 && b.w <= 1 + eps) || !(b.h > 0 && b.h <= 1 + eps))
    throw InputError(strf("box size out of range: w=%g h=%g", b.w, b.h));
  if (b.cx < -eps || b.cx > 1 + eps || b.cy < -eps || b.cy > 1 + eps)
    throw InputError(strf("box center out of range: cx=%g cy=%g", b.cx, b.cy));
  if (b.cx - b.w / 2 < -eps || b.cx + b.w / 2 > 1 + eps || b.cy - b.h / 2 < -eps ||
      b.cy + b.h / 2 > 1 + eps)
    throw InputError("decoded pixel box extends outside the image");
}

}  // namespace pe
