#include "pe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pe/image.hpp"
#include "pe/rng.hpp"

namespace fs = std::filesystem;

namespace pe {

Tensor<float> load_png_gray(const std::string& path) { return tensor_from_image(read_png(path)); }

std::vector<BoxLabel> parse_annotation_text(const std::string& text, const std::string& origin) {
  std::vector<BoxLabel> boxes;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    // strip trailing CR and skip blank lines
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    BoxLabel b;
    std::string extra;
    if (!(ls >> b.class_id >> b.cx >> b.cy >> b.w >> b.h) || (ls >> extra))
      throw ParseError(strf("%s:%d: expected 'class_id cx cy w h'", origin.c_str(), line_no));
    try {
      validate_label(b);
    } catch (const InputError& e) {
      throw InputError(strf("%s:%d: %s", origin.c_str(), line_no, e.what()));
    }
    boxes.push_back(b);
  }
  return boxes;
}

std::vector<BoxLabel> parse_annotation(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open annotation: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_annotation_text(buf.str(), path);
}

void write_annotation(const std::vector<BoxLabel>& boxes, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open annotation for writing: " + path);
  for (const BoxLabel& b : boxes) {
    validate_label(b);
    os << strf("%d %.6f %.6f %.6f %.6f\n", b.class_id, b.cx, b.cy, b.w, b.h);
  }
  if (!os) throw IoError("annotation write failed: " + path);
}

void write_manifest(const Manifest& m, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open manifest for writing: " + path);
  os << "split=" << m.split << "\n";
  os << "kind=" << m.kind << "\n";
  os << "image_size=" << m.image_size << "\n";
  for (const auto& e : m.entries) {
    if (m.kind == "detection")
      os << e.image_path << " " << e.annotation_path << "\n";
    else
      os << e.image_path << " " << e.class_label << "\n";
  }
  if (!os) throw IoError("manifest write failed: " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path);
  Manifest m;
  m.root = fs::path(path).parent_path().string();
  std::string line;
  int line_no = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++line_no;
    while (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("split=", 0) == 0) {
      m.split = line.substr(6);
    } else if (line.rfind("kind=", 0) == 0) {
      m.kind = line.substr(5);
    } else if (line.rfind("image_size=", 0) == 0) {
      m.image_size = std::stoi(line.substr(11));
    } else {
      auto sp = line.find(' ');
      if (sp == std::string::npos)
        throw ParseError(strf("%s:%d: expected '<image> <annotation|class>'", path.c_str(), line_no));
      ManifestEntry e;
      e.image_path = line.substr(0, sp);
      std::string second = line.substr(sp + 1);
      if (m.kind == "detection")
        e.annotation_path = second;
      else
        e.class_label = second;
      if (!seen.insert(e.image_path).second)
        throw ParseError(strf("%s:%d: duplicate image path %s", path.c_str(), line_no,
                              e.image_path.c_str()));
      m.entries.push_back(std::move(e));
    }
  }
  if (m.kind != "detection" && m.kind != "classification")
    throw ParseError("manifest missing kind= header: " + path);
  return m;
}

void validate_manifest(const Manifest& m) {
  for (const auto& e : m.entries) {
    fs::path img = fs::path(m.root) / e.image_path;
    if (!fs::exists(img)) throw InputError("manifest references missing image: " + img.string());
    if (m.kind == "detection") {
      fs::path ann = fs::path(m.root) / e.annotation_path;
      if (!fs::exists(ann))
        throw InputError("manifest references missing annotation: " + ann.string());
    } else if (e.class_label.empty()) {
      throw InputError("classification manifest entry without class label: " + e.image_path);
    }
  }
}

std::pair<Manifest, Manifest> split_dataset(const Manifest& m, double train_frac, double val_frac,
                                            uint64_t seed) {
  if (m.entries.empty()) throw InputError("split_dataset: empty manifest");
  if (std::abs(train_frac + val_frac - 1.0) > 1e-9)
    throw InputError("split_dataset: fractions must sum to 1");

  Manifest train = m, val = m;
  train.entries.clear();
  val.entries.clear();
  train.split = "train";
  val.split = "val";

  // group by class for stratification; detection manifests form one group
  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < m.entries.size(); ++i)
    groups[m.kind == "classification" ? m.entries[i].class_label : std::string()].push_back(i);

  Rng rng(mix_seed(seed, 0x5117));
  std::vector<size_t> train_idx, val_idx;
  for (auto& [label, idx] : groups) {
    rng.shuffle(idx);
    size_t n_train = size_t(std::lround(double(idx.size()) * train_frac));
    n_train = std::min(n_train, idx.size());
    for (size_t i = 0; i < idx.size(); ++i)
      (i < n_train ? train_idx : val_idx).push_back(idx[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  for (size_t i : train_idx) train.entries.push_back(m.entries[i]);
  for (size_t i : val_idx) val.entries.push_back(m.entries[i]);
  return {std::move(train), std::move(val)};
}

std::vector<std::string> class_names(const Manifest& m) {
  std::set<std::string> names;
  for (const auto& e : m.entries)
    if (!e.class_label.empty()) names.insert(e.class_label);
  return {names.begin(), names.end()};
}

}  // namespace pe
