#pragma once

#include <string>
#include <vector>

#include "pe/boxes.hpp"
#include "pe/tensor.hpp"

namespace pe {

// One dataset entry. Detection entries carry an annotation sidecar path,
// classification entries carry a class label; paths are relative to root.
struct ManifestEntry {
  std::string image_path;
  std::string annotation_path;  // detection manifests
  std::string class_label;      // classification manifests
};

struct Manifest {
  std::string root;
  std::string split;  // train / val / test
  std::string kind;   // "detection" or "classification"
  int image_size = 0;
  std::vector<ManifestEntry> entries;
};

// 8-bit PNG -> HxWx1 tensor in [0,1]; 3-channel collapses by channel average.
Tensor<float> load_png_gray(const std::string& path);

// darknet-style sidecar: one "class_id cx cy w h" line per box
std::vector<BoxLabel> parse_annotation(const std::string& path);
std::vector<BoxLabel> parse_annotation_text(const std::string& text, const std::string& origin);
void write_annotation(const std::vector<BoxLabel>& boxes, const std::string& path);

void write_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

// fail-fast check: every referenced file must exist
void validate_manifest(const Manifest& m);

// Seed-deterministic shuffle split; classification manifests are stratified
// per class. fractions must sum to 1.
std::pair<Manifest, Manifest> split_dataset(const Manifest& m, double train_frac,
                                            double val_frac, uint64_t seed);

std::vector<std::string> class_names(const Manifest& m);  // sorted unique labels

}  // namespace pe
