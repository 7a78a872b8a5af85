#pragma once

#include <map>
#include <string>
#include <vector>

#include "pe/boxes.hpp"
#include "pe/dataset.hpp"
#include "pe/rng.hpp"
#include "pe/tensor.hpp"

namespace pe {

// Synthetic CTPA-like phantom: bright curvilinear ridges ("vessels") over a
// dim blobby background, with dark elliptical filling defects ("lesions") as
// the positive-class signal. (seed, index) fully determines an image.
struct PhantomConfig {
  int image_size = 64;
  int n_positive = 0;
  int n_negative = 0;
  int lesions_min = 1, lesions_max = 8;
  double lesion_continuation = 0.55;  // geometric tail; mean count ~= 2.15
  double lesion_diam_frac_min = 0.04, lesion_diam_frac_max = 0.15;
  int vessel_min = 2, vessel_max = 5;
  double noise_amplitude = 0.02;
  uint64_t seed = 7;
  bool pretext = false;  // vessel-count bucket labels, no lesions

  void validate() const {
    if (image_size < 16) throw ConfigError("phantom image_size must be >= 16");
    if (lesions_min < 1 || lesions_max < lesions_min)
      throw ConfigError("phantom lesion count range invalid");
    if (lesion_diam_frac_min <= 0 || lesion_diam_frac_max >= 1 ||
        lesion_diam_frac_max < lesion_diam_frac_min)
      throw ConfigError("phantom lesion diameter fractions must be in (0,1)");
    if (vessel_min < 1 || vessel_max < vessel_min)
      throw ConfigError("phantom vessel count range invalid");
    if (noise_amplitude < 0) throw ConfigError("phantom noise_amplitude must be >= 0");
  }
};

struct PhantomImage {
  Tensor<float> pixels;  // HxWx1 in [0,1]
  std::vector<BoxLabel> boxes;
  std::string class_label;  // yes / no, or vc-low / vc-mid / vc-high for pretext
};

PhantomImage generate_image(const PhantomConfig& config, int index);

struct GenResult {
  Manifest classification;  // all images with class labels
  Manifest detection;       // positive images with annotation sidecars
};

// Writes images/, labels/, classes/<label>/ plus stats.txt and stats.kv under
// out_dir. Generation is parallel across indices; file writes are ordered.
GenResult generate_dataset(const PhantomConfig& config, const std::string& out_dir);

struct DatasetStats {
  int n_images = 0;
  std::map<std::string, int> per_class;
  int n_boxes = 0;
  std::map<int, int> box_histogram;  // boxes-per-image -> image count
  double mean_boxes_per_image = 0.0;
  int min_boxes = 0, max_boxes = 0;
};

// Box statistics over a detection manifest (annotation files are read).
DatasetStats dataset_stats(const Manifest& manifest);

std::string stats_text(const DatasetStats& s);
std::string stats_kv(const DatasetStats& s);

}  // namespace pe
