#include "pe/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "pe/image.hpp"
#include "pe/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;

namespace pe {

namespace {

struct Vec2 {
  double x, y;
};

double dist2_to_segment(double px, double py, Vec2 a, Vec2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
  return dx * dx + dy * dy;
}

struct Vessel {
  std::vector<Vec2> points;
  double sigma;
  double amplitude;
};

Vessel walk_vessel(int size, Rng& rng) {
  Vessel v;
  v.sigma = rng.uniform(0.018, 0.034) * size;
  v.amplitude = rng.uniform(0.50, 0.75);

  // start on a random border, heading inward with jitter
  const int edge = rng.uniform_int(4);
  const double pos = rng.uniform(0.1, 0.9) * size;
  double x, y, angle;
  switch (edge) {
    case 0: x = pos; y = 0; angle = M_PI / 2; break;
    case 1: x = pos; y = size - 1; angle = -M_PI / 2; break;
    case 2: x = 0; y = pos; angle = 0; break;
    default: x = size - 1; y = pos; angle = M_PI; break;
  }
  angle += rng.uniform(-0.5, 0.5);

  const double step = std::max(1.5, size / 32.0);
  const int n_steps = int(std::ceil(1.8 * size / step));
  v.points.push_back({x, y});
  for (int i = 0; i < n_steps; ++i) {
    angle += rng.uniform(-0.25, 0.25);
    x += step * std::cos(angle);
    y += step * std::sin(angle);
    v.points.push_back({x, y});
  }
  return v;
}

void render_ridge(const Vessel& v, int size, std::vector<float>& ridge) {
  const double reach = 3.0 * v.sigma;
  const double inv2s2 = 1.0 / (2.0 * v.sigma * v.sigma);
  for (size_t i = 1; i < v.points.size(); ++i) {
    const Vec2 a = v.points[i - 1], b = v.points[i];
    const int x0 = std::max(0, int(std::floor(std::min(a.x, b.x) - reach)));
    const int x1 = std::min(size - 1, int(std::ceil(std::max(a.x, b.x) + reach)));
    const int y0 = std::max(0, int(std::floor(std::min(a.y, b.y) - reach)));
    const int y1 = std::min(size - 1, int(std::ceil(std::max(a.y, b.y) + reach)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double d2 = dist2_to_segment(x, y, a, b);
        const float val = float(v.amplitude * std::exp(-d2 * inv2s2));
        float& r = ridge[size_t(y) * size + x];
        if (val > r) r = val;  // max-blend keeps crossings from blowing out
      }
  }
}

int sample_lesion_count(const PhantomConfig& cfg, Rng& rng) {
  int k = cfg.lesions_min;
  while (k < cfg.lesions_max && rng.uniform() < cfg.lesion_continuation) ++k;
  return k;
}

std::string bucket_label(int vessel_count) {
  if (vessel_count <= 2) return "vc-low";
  if (vessel_count <= 4) return "vc-mid";
  return "vc-high";
}

double box_iou(const Rect& a, const Rect& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace

PhantomImage generate_image(const PhantomConfig& config, int index) {
  config.validate();
  const int S = config.image_size;
  const bool positive = !config.pretext && index < config.n_positive;
  Rng rng(mix_seed(config.seed, uint64_t(index) + 1));

  PhantomImage out;
  out.pixels = Tensor<float>({S, S, 1});
  std::vector<float>& pix = out.pixels.data;

  // background: dim base + coarse blob field
  const int G = 6;
  std::vector<double> coarse(size_t(G) * G);
  for (double& v : coarse) v = rng.uniform(0.0, 0.22);
  const double base = 0.05 + rng.uniform(0.0, 0.03);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double gy = double(y) / (S - 1) * (G - 1), gx = double(x) / (S - 1) * (G - 1);
      const int gy0 = std::min(int(gy), G - 2), gx0 = std::min(int(gx), G - 2);
      const double fy = gy - gy0, fx = gx - gx0;
      const double v = (1 - fy) * ((1 - fx) * coarse[size_t(gy0) * G + gx0] +
                                   fx * coarse[size_t(gy0) * G + gx0 + 1]) +
                       fy * ((1 - fx) * coarse[size_t(gy0 + 1) * G + gx0] +
                             fx * coarse[size_t(gy0 + 1) * G + gx0 + 1]);
      pix[size_t(y) * S + x] = float(base + v);
    }

  // vessels
  const int nv = config.pretext ? rng.uniform_int(1, 7)
                                : rng.uniform_int(config.vessel_min, config.vessel_max);
  std::vector<Vessel> vessels;
  std::vector<float> ridge(size_t(S) * S, 0.0f);
  for (int i = 0; i < nv; ++i) {
    vessels.push_back(walk_vessel(S, rng));
    render_ridge(vessels.back(), S, ridge);
  }
  for (size_t i = 0; i < pix.size(); ++i) pix[i] += ridge[i];

  // lesions: dark ellipses seated on a vessel ridge
  if (positive) {
    const int want = sample_lesion_count(config, rng);
    std::vector<Rect> placed;
    for (int li = 0; li < want; ++li) {
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        const Vessel& v = vessels[size_t(rng.uniform_int(int(vessels.size())))];
        const size_t seg = size_t(rng.uniform_int(int(v.points.size()) - 1));
        const double t = rng.uniform();
        const double cx = v.points[seg].x + t * (v.points[seg + 1].x - v.points[seg].x);
        const double cy = v.points[seg].y + t * (v.points[seg + 1].y - v.points[seg].y);
        const int ix = int(std::lround(cx)), iy = int(std::lround(cy));
        if (ix < 0 || iy < 0 || ix >= S || iy >= S) continue;
        if (ridge[size_t(iy) * S + ix] < 0.40f) continue;  // must sit on a bright ridge

        double a = rng.uniform(config.lesion_diam_frac_min, config.lesion_diam_frac_max) * S / 2;
        double b = rng.uniform(config.lesion_diam_frac_min, config.lesion_diam_frac_max) * S / 2;
        if (b > a) std::swap(a, b);
        const double phi = rng.uniform(0.0, M_PI);
        const double cphi = std::cos(phi), sphi = std::sin(phi);
        const double hx = std::max(1.0, std::sqrt(a * a * cphi * cphi + b * b * sphi * sphi));
        const double hy = std::max(1.0, std::sqrt(a * a * sphi * sphi + b * b * cphi * cphi));
        Rect box{cx - hx, cy - hy, cx + hx, cy + hy};
        if (box.x_min < 0 || box.y_min < 0 || box.x_max > S - 1 || box.y_max > S - 1) continue;
        bool overlaps = false;
        for (const Rect& p : placed)
          if (box_iou(box, p) > 0.2) overlaps = true;
        if (overlaps) continue;

        const double dip = rng.uniform(0.35, 0.55);
        const int px0 = int(std::floor(box.x_min)), px1 = int(std::ceil(box.x_max));
        const int py0 = int(std::floor(box.y_min)), py1 = int(std::ceil(box.y_max));
        for (int y = py0; y <= py1; ++y)
          for (int x = px0; x <= px1; ++x) {
            if (x < 0 || y < 0 || x >= S || y >= S) continue;
            const double dx = x - cx, dy = y - cy;
            const double u = (dx * cphi + dy * sphi) / a;
            const double w = (-dx * sphi + dy * cphi) / b;
            const double e2 = u * u + w * w;
            if (e2 <= 1.0) {
              float& p = pix[size_t(y) * S + x];
              p = std::max(0.01f, p - float(dip * (1.0 - e2)));
            }
          }
        placed.push_back(box);
        out.boxes.push_back(label_from_rect(box, S, S));
        ok = true;
      }
      if (!ok)
        throw GenerationError(
            strf("phantom %d: could not place lesion %d on any vessel after 100 attempts", index,
                 li));
    }
  }

  // pixel noise last, then clamp
  for (float& p : pix) {
    p += float(config.noise_amplitude * (rng.uniform() * 2.0 - 1.0));
    p = std::clamp(p, 0.0f, 1.0f);
  }

  out.class_label = config.pretext ? bucket_label(nv) : (positive ? "yes" : "no");
  return out;
}

GenResult generate_dataset(const PhantomConfig& config, const std::string& out_dir) {
  config.validate();
  const int n = config.n_positive + config.n_negative;
  if (n <= 0) throw ConfigError("generate_dataset: empty dataset requested");

  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "labels");

  std::vector<PhantomImage> results(size_t(n));
  const int nw = kernels::workers();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw) if (nw > 1)
#endif
  for (int i = 0; i < n; ++i) results[size_t(i)] = generate_image(config, i);

  GenResult gen;
  gen.classification.root = out_dir;
  gen.classification.kind = "classification";
  gen.classification.split = "all";
  gen.classification.image_size = config.image_size;
  gen.detection.root = out_dir;
  gen.detection.kind = "detection";
  gen.detection.split = "all";
  gen.detection.image_size = config.image_size;

  for (int i = 0; i < n; ++i) {
    const PhantomImage& ph = results[size_t(i)];
    const std::string stem = strf("img_%06d", i);
    const std::string img_rel = "images/" + stem + ".png";
    const std::string ann_rel = "labels/" + stem + ".txt";
    write_png(image_from_tensor(ph.pixels), (fs::path(out_dir) / img_rel).string());
    write_annotation(ph.boxes, (fs::path(out_dir) / ann_rel).string());

    const std::string cls_rel = "classes/" + ph.class_label + "/" + stem + ".png";
    fs::create_directories(fs::path(out_dir) / "classes" / ph.class_label);
    fs::copy_file(fs::path(out_dir) / img_rel, fs::path(out_dir) / cls_rel,
                  fs::copy_options::overwrite_existing);

    gen.classification.entries.push_back({cls_rel, "", ph.class_label});
    if (!ph.boxes.empty()) gen.detection.entries.push_back({img_rel, ann_rel, ""});
  }

  DatasetStats st = dataset_stats(gen.detection);
  for (const auto& e : gen.classification.entries) st.per_class[e.class_label]++;
  st.n_images = n;
  {
    std::ofstream os(fs::path(out_dir) / "stats.txt");
    os << stats_text(st);
    std::ofstream kv(fs::path(out_dir) / "stats.kv");
    kv << stats_kv(st);
  }
  return gen;
}

DatasetStats dataset_stats(const Manifest& manifest) {
  DatasetStats s;
  s.n_images = int(manifest.entries.size());
  int64_t total = 0;
  bool first = true;
  for (const auto& e : manifest.entries) {
    if (!e.class_label.empty()) s.per_class[e.class_label]++;
    if (e.annotation_path.empty()) continue;
    fs::path ann = fs::path(manifest.root) / e.annotation_path;
    if (!fs::exists(ann)) throw InputError("dataset_stats: missing annotation " + ann.string());
    const int k = int(parse_annotation(ann.string()).size());
    s.box_histogram[k]++;
    total += k;
    if (first) {
      s.min_boxes = s.max_boxes = k;
      first = false;
    } else {
      s.min_boxes = std::min(s.min_boxes, k);
      s.max_boxes = std::max(s.max_boxes, k);
    }
  }
  s.n_boxes = int(total);
  int annotated = 0;
  for (auto& [k, c] : s.box_histogram) annotated += c;
  s.mean_boxes_per_image = annotated > 0 ? double(total) / annotated : 0.0;
  return s;
}

std::string stats_text(const DatasetStats& s) {
  std::string out;
  out += strf("images: %d\n", s.n_images);
  for (auto& [label, count] : s.per_class) out += strf("class %s: %d\n", label.c_str(), count);
  out += strf("boxes: %d\n", s.n_boxes);
  out += strf("mean boxes/image: %.4f\n", s.mean_boxes_per_image);
  out += strf("min boxes: %d  max boxes: %d\n", s.min_boxes, s.max_boxes);
  out += "histogram (boxes -> images):\n";
  for (auto& [k, c] : s.box_histogram) out += strf("  %d -> %d\n", k, c);
  return out;
}

std::string stats_kv(const DatasetStats& s) {
  std::string out;
  out += strf("images=%d\n", s.n_images);
  for (auto& [label, count] : s.per_class) out += strf("class.%s=%d\n", label.c_str(), count);
  out += strf("boxes=%d\n", s.n_boxes);
  out += strf("mean_boxes_per_image=%.6f\n", s.mean_boxes_per_image);
  out += strf("min_boxes=%d\n", s.min_boxes);
  out += strf("max_boxes=%d\n", s.max_boxes);
  for (auto& [k, c] : s.box_histogram) out += strf("hist.%d=%d\n", k, c);
  return out;
}

}  // namespace pe
