#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pe/tensor.hpp"

namespace pe {

// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
  int width = 0, height = 0, channels = 1;
  std::vector<uint8_t> pixels;

  ImageU8() = default;
  ImageU8(int w, int h, int c, uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(size_t(w) * h * c, fill) {}

  uint8_t& at(int x, int y, int c) { return pixels[(size_t(y) * width + x) * channels + c]; }
  uint8_t at(int x, int y, int c) const { return pixels[(size_t(y) * width + x) * channels + c]; }
};

struct Rgb {
  uint8_t r, g, b;
};

// PNG codec (8-bit only; 16-bit input raises UnsupportedFormatError).
ImageU8 read_png(const std::string& path);
void write_png(const ImageU8& img, const std::string& path);

// gray tensor in [0,1] <-> 8-bit; 3-channel input collapses by channel average
Tensor<float> tensor_from_image(const ImageU8& img);
ImageU8 image_from_tensor(const Tensor<float>& t);

Tensor<float> resize_bilinear(const Tensor<float>& img, int out_h, int out_w);

// Drawing (RGB images). Text uses an embedded 5x7 uppercase font.
void fill_rect(ImageU8& img, int x0, int y0, int x1, int y1, Rgb color);
void draw_rect(ImageU8& img, int x0, int y0, int x1, int y1, Rgb color, int thickness = 1);
void draw_line(ImageU8& img, int x0, int y0, int x1, int y1, Rgb color);
void draw_text(ImageU8& img, int x, int y, const std::string& text, Rgb color, int scale = 1);
int text_width(const std::string& text, int scale = 1);

ImageU8 gray_to_rgb(const ImageU8& gray);

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  Rgb color;
};

// Minimal line plot with axes, ticks and a legend; used for the metrics panel.
ImageU8 render_line_plot(const std::vector<PlotSeries>& series, const std::string& title,
                         const std::string& x_label, int width = 640, int height = 420);

}  // namespace pe
