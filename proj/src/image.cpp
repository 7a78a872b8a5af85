#include "pe/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>

#include "pe/common.hpp"

namespace pe {

namespace {

struct FileCloser {
  FILE* f;
  ~FileCloser() {
    if (f) fclose(f);
  }
};

}  // namespace

ImageU8 read_png(const std::string& path) {
  FILE* f = fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open PNG: " + path);
  FileCloser closer{f};

  uint8_t sig[8];
  if (fread(sig, 1, 8, f) != 8 || png_sig_cmp(sig, 0, 8))
    throw DecodeError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("corrupt PNG: " + path);
  }
  png_init_io(png, f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnsupportedFormatError("16-bit PNG not supported: " + path);
  }
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  ImageU8 img;
  img.width = int(png_get_image_width(png, info));
  img.height = int(png_get_image_height(png, info));
  img.channels = int(png_get_channels(png, info));
  if (img.channels != 1 && img.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw UnsupportedFormatError(strf("PNG with %d channels not supported", img.channels));
  }
  img.pixels.resize(size_t(img.width) * img.height * img.channels);
  std::vector<png_bytep> rows(size_t(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[size_t(y)] = img.pixels.data() + size_t(y) * img.width * img.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const ImageU8& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw IoError("write_png: only 1- or 3-channel images");
  FILE* f = fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open PNG for writing: " + path);
  FileCloser closer{f};

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path);
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // pinned settings keep encodes byte-identical across runs
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_write_info(png, info);
  std::vector<png_bytep> rows(size_t(img.height));
  for (int y = 0; y < img.height; ++y)
    rows[size_t(y)] =
        const_cast<png_bytep>(img.pixels.data() + size_t(y) * img.width * img.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor<float> tensor_from_image(const ImageU8& img) {
  Tensor<float> t({img.height, img.width, 1});
  const float inv = 1.0f / 255.0f;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (img.channels == 1) {
        t.data[size_t(y) * img.width + x] = float(img.at(x, y, 0)) * inv;
      } else {
        float s = (float(img.at(x, y, 0)) + float(img.at(x, y, 1)) + float(img.at(x, y, 2))) / 3.0f;
        t.data[size_t(y) * img.width + x] = s * inv;
      }
    }
  return t;
}

ImageU8 image_from_tensor(const Tensor<float>& t) {
  if (t.ndim() != 3 || t.dim(2) != 1) throw DimensionError("image_from_tensor expects HxWx1");
  ImageU8 img(t.dim(1), t.dim(0), 1);
  for (size_t i = 0; i < t.data.size(); ++i) {
    float v = std::clamp(t.data[i], 0.0f, 1.0f);
    img.pixels[i] = uint8_t(std::lround(v * 255.0f));
  }
  return img;
}

Tensor<float> resize_bilinear(const Tensor<float>& img, int out_h, int out_w) {
  if (img.ndim() != 3 || img.dim(2) != 1) throw DimensionError("resize_bilinear expects HxWx1");
  const int H = img.dim(0), W = img.dim(1);
  if (H == out_h && W == out_w) return img;
  Tensor<float> out({out_h, out_w, 1});
  const double sy = double(H) / out_h, sx = double(W) / out_w;
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      double fy = (y + 0.5) * sy - 0.5, fx = (x + 0.5) * sx - 0.5;
      int y0 = int(std::floor(fy)), x0 = int(std::floor(fx));
      double wy = fy - y0, wx = fx - x0;
      int y1 = std::clamp(y0 + 1, 0, H - 1), x1 = std::clamp(x0 + 1, 0, W - 1);
      y0 = std::clamp(y0, 0, H - 1);
      x0 = std::clamp(x0, 0, W - 1);
      double v = (1 - wy) * ((1 - wx) * img.data[size_t(y0) * W + x0] +
                             wx * img.data[size_t(y0) * W + x1]) +
                 wy * ((1 - wx) * img.data[size_t(y1) * W + x0] +
                       wx * img.data[size_t(y1) * W + x1]);
      out.data[size_t(y) * out_w + x] = float(v);
    }
  return out;
}

namespace {

// 5x7 uppercase bitmap font; one byte per row, low 5 bits used.
const std::map<char, std::array<uint8_t, 7>>& font_table() {
  static const std::map<char, std::array<uint8_t, 7>> table = {
      {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
      {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
      {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
      {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
      {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
      {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
      {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
      {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
      {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
      {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
      {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
      {'D', {0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c}},
      {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
      {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
      {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
      {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
      {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
      {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
      {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
      {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
      {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
      {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
      {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
      {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
      {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0a}},
      {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
      {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
      {',', {0x00, 0x00, 0x00, 0x00, 0x06, 0x04, 0x08}},
      {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
      {'=', {0x00, 0x00, 0x1f, 0x00, 0x1f, 0x00, 0x00}},
      {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
      {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
      {'/', {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}},
      {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
      {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
      {'[', {0x0e, 0x08, 0x08, 0x08, 0x08, 0x08, 0x0e}},
      {']', {0x0e, 0x02, 0x02, 0x02, 0x02, 0x02, 0x0e}},
      {'>', {0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08}},
      {'<', {0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02}},
  };
  return table;
}

void set_px(ImageU8& img, int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  if (img.channels == 3) {
    img.at(x, y, 0) = c.r;
    img.at(x, y, 1) = c.g;
    img.at(x, y, 2) = c.b;
  } else {
    img.at(x, y, 0) = uint8_t((int(c.r) + c.g + c.b) / 3);
  }
}

}  // namespace

void fill_rect(ImageU8& img, int x0, int y0, int x1, int y1, Rgb color) {
  for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x) set_px(img, x, y, color);
}

void draw_rect(ImageU8& img, int x0, int y0, int x1, int y1, Rgb color, int thickness) {
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0; x <= x1; ++x) {
      set_px(img, x, y0 + t, color);
      set_px(img, x, y1 - t, color);
    }
    for (int y = y0; y <= y1; ++y) {
      set_px(img, x0 + t, y, color);
      set_px(img, x1 - t, y, color);
    }
  }
}

void draw_line(ImageU8& img, int x0, int y0, int x1, int y1, Rgb color) {
  int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set_px(img, x0, y0, color);
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_text(ImageU8& img, int x, int y, const std::string& text, Rgb color, int scale) {
  const auto& table = font_table();
  int cx = x;
  for (char raw : text) {
    char ch = char(std::toupper(static_cast<unsigned char>(raw)));
    auto it = table.find(ch);
    if (it == table.end()) it = table.find(' ');
    for (int row = 0; row < 7; ++row)
      for (int col = 0; col < 5; ++col)
        if (it->second[size_t(row)] & (1 << (4 - col)))
          for (int sy = 0; sy < scale; ++sy)
            for (int sx = 0; sx < scale; ++sx)
              set_px(img, cx + col * scale + sx, y + row * scale + sy, color);
    cx += 6 * scale;
  }
}

int text_width(const std::string& text, int scale) { return int(text.size()) * 6 * scale; }

ImageU8 gray_to_rgb(const ImageU8& gray) {
  ImageU8 out(gray.width, gray.height, 3);
  for (int y = 0; y < gray.height; ++y)
    for (int x = 0; x < gray.width; ++x) {
      uint8_t v = gray.channels == 1 ? gray.at(x, y, 0) : gray.at(x, y, 0);
      out.at(x, y, 0) = out.at(x, y, 1) = out.at(x, y, 2) = v;
    }
  return out;
}

ImageU8 render_line_plot(const std::vector<PlotSeries>& series, const std::string& title,
                         const std::string& x_label, int width, int height) {
  ImageU8 img(width, height, 3, 255);
  const Rgb axis{40, 40, 40}, grid{210, 210, 210};
  const int left = 56, right = width - 16, top = 34, bottom = height - 44;

  double xmin = 1e300, xmax = -1e300;
  for (const auto& s : series)
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
  if (xmin >= xmax) {
    xmin = 0;
    xmax = 1;
  }
  const double ymin = 0.0, ymax = 1.0;  // all plotted metrics live in [0,1]

  auto px = [&](double v) { return left + int(std::lround((v - xmin) / (xmax - xmin) * (right - left))); };
  auto py = [&](double v) {
    double c = std::clamp(v, ymin, ymax);
    return bottom - int(std::lround((c - ymin) / (ymax - ymin) * (bottom - top)));
  };

  for (int i = 0; i <= 10; ++i) {
    double v = ymin + (ymax - ymin) * i / 10.0;
    int y = py(v);
    draw_line(img, left, y, right, y, grid);
    draw_text(img, 8, y - 3, strf("%.1f", v), axis);
  }
  for (int i = 0; i <= 10; ++i) {
    double v = xmin + (xmax - xmin) * i / 10.0;
    int x = px(v);
    draw_line(img, x, bottom, x, bottom + 4, axis);
    if (i % 2 == 0) draw_text(img, x - 9, bottom + 8, strf("%.2f", v), axis);
  }
  draw_line(img, left, top, left, bottom, axis);
  draw_line(img, left, bottom, right, bottom, axis);
  draw_text(img, left, 10, title, axis);
  draw_text(img, (left + right) / 2 - text_width(x_label) / 2, height - 14, x_label, axis);

  int legend_x = left + 8;
  for (const auto& s : series) {
    for (size_t i = 1; i < s.x.size(); ++i)
      draw_line(img, px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), s.color);
    for (size_t i = 0; i < s.x.size(); ++i)
      fill_rect(img, px(s.x[i]) - 1, py(s.y[i]) - 1, px(s.x[i]) + 1, py(s.y[i]) + 1, s.color);
    fill_rect(img, legend_x, top - 12, legend_x + 10, top - 4, s.color);
    draw_text(img, legend_x + 14, top - 12, s.label, axis);
    legend_x += 14 + text_width(s.label) + 16;
  }
  return img;
}

}  // namespace pe
