#include "pe/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "pe/common.hpp"

namespace pe {

namespace {

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t get_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

std::string get_str(std::istream& is) {
  uint32_t n = get_u32(is);
  if (n > (1u << 20)) throw ParseError("checkpoint: string field too large");
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  return s;
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor<float>& t) {
  put_str(os, name);
  put_u32(os, uint32_t(t.shape.size()));
  for (int d : t.shape) put_u32(os, uint32_t(d));
  os.write(reinterpret_cast<const char*>(t.data.data()),
           std::streamsize(t.data.size() * sizeof(float)));
}

std::pair<std::string, Tensor<float>> get_tensor(std::istream& is) {
  std::string name = get_str(is);
  uint32_t nd = get_u32(is);
  if (nd > 8) throw ParseError("checkpoint: tensor rank too large");
  std::vector<int> shape(nd);
  for (uint32_t i = 0; i < nd; ++i) shape[i] = int(get_u32(is));
  Tensor<float> t(shape);
  is.read(reinterpret_cast<char*>(t.data.data()),
          std::streamsize(t.data.size() * sizeof(float)));
  if (!is) throw ParseError("checkpoint: truncated tensor payload");
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, std::streamsize(std::strlen(kCheckpointMagic)));

  put_u32(os, uint32_t(ckpt.meta.size()));
  for (auto& [k, v] : ckpt.meta) {  // std::map iterates sorted, stable bytes
    put_str(os, k);
    put_str(os, v);
  }
  put_u32(os, uint32_t(ckpt.tensors.size()));
  for (auto& [name, t] : ckpt.tensors) put_tensor(os, name, t);

  os.put(ckpt.has_optimizer ? 1 : 0);
  if (ckpt.has_optimizer) {
    const auto& st = ckpt.optimizer;
    os.put(st.algorithm == OptAlgorithm::adam ? 0 : 1);
    put_u64(os, uint64_t(st.step_count));
    put_f64(os, st.learning_rate);
    put_f64(os, st.beta1);
    put_f64(os, st.beta2);
    put_f64(os, st.epsilon);
    put_f64(os, st.momentum_coefficient);
    put_f64(os, st.l2_coefficient);
    put_u32(os, uint32_t(st.m.size()));
    for (size_t i = 0; i < st.m.size(); ++i) put_tensor(os, strf("m.%zu", i), st.m[i]);
    put_u32(os, uint32_t(st.v.size()));
    for (size_t i = 0; i < st.v.size(); ++i) put_tensor(os, strf("v.%zu", i), st.v[i]);
  }
  if (!os) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  std::string magic(std::strlen(kCheckpointMagic), '\0');
  is.read(magic.data(), std::streamsize(magic.size()));
  if (magic != kCheckpointMagic) throw ParseError("not a PEPIPE-CKPT-v1 file: " + path);

  Checkpoint ckpt;
  uint32_t nmeta = get_u32(is);
  for (uint32_t i = 0; i < nmeta; ++i) {
    std::string k = get_str(is);
    ckpt.meta[k] = get_str(is);
  }
  uint32_t ntensor = get_u32(is);
  for (uint32_t i = 0; i < ntensor; ++i) ckpt.tensors.push_back(get_tensor(is));

  int has_opt = is.get();
  if (has_opt == 1) {
    ckpt.has_optimizer = true;
    auto& st = ckpt.optimizer;
    st.algorithm = is.get() == 0 ? OptAlgorithm::adam : OptAlgorithm::sgd_momentum;
    st.step_count = int64_t(get_u64(is));
    st.learning_rate = get_f64(is);
    st.beta1 = get_f64(is);
    st.beta2 = get_f64(is);
    st.epsilon = get_f64(is);
    st.momentum_coefficient = get_f64(is);
    st.l2_coefficient = get_f64(is);
    uint32_t nm = get_u32(is);
    for (uint32_t i = 0; i < nm; ++i) st.m.push_back(get_tensor(is).second);
    uint32_t nv = get_u32(is);
    for (uint32_t i = 0; i < nv; ++i) st.v.push_back(get_tensor(is).second);
  }
  if (!is && !is.eof()) throw ParseError("checkpoint: truncated file: " + path);
  return ckpt;
}

}  // namespace pe
