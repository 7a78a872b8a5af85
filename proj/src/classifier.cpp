#include "pe/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pe/image.hpp"
#include "pe/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;

namespace pe {

ClassifierModel build_classifier(const ClassifierConfig& config) {
  if (config.input_size < 16 || config.input_size % 16 != 0)
    throw ConfigError(strf("classifier input size %d not divisible by the four pooling stages",
                           config.input_size));
  if (config.n_classes < 2) throw ConfigError("classifier needs at least 2 classes");

  ClassifierModel m;
  m.config = config;
  m.backbone = Sequential(
      "backbone",
      {LayerSpec::conv(8), LayerSpec::relu(), LayerSpec::maxpool2(),
       LayerSpec::conv(16), LayerSpec::relu(), LayerSpec::maxpool2(),
       LayerSpec::conv(32), LayerSpec::relu(), LayerSpec::maxpool2(),
       LayerSpec::conv(64), LayerSpec::relu(), LayerSpec::maxpool2(),
       LayerSpec::global_avg_pool()});
  m.head = Sequential("head", {LayerSpec::dense(512), LayerSpec::dropout(config.dropout_ratio),
                               LayerSpec::dense(config.n_classes), LayerSpec::softmax()});

  Rng rng(mix_seed(config.seed, 0xC1A55));
  m.backbone.build({config.input_size, config.input_size, 1}, rng);
  m.head.build(m.backbone.output_shape(), rng);
  return m;
}

std::vector<LabeledImage> load_classification_set(const Manifest& manifest,
                                                  const std::vector<std::string>& classes) {
  validate_manifest(manifest);
  std::vector<LabeledImage> out(manifest.entries.size());
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    auto it = std::find(classes.begin(), classes.end(), e.class_label);
    if (it == classes.end())
      throw InputError("manifest class not known to the model: " + e.class_label);
    out[i].label = int(it - classes.begin());
    Tensor<float> img = load_png_gray((fs::path(manifest.root) / e.image_path).string());
    if (manifest.image_size > 0 &&
        (img.dim(0) != manifest.image_size || img.dim(1) != manifest.image_size))
      img = resize_bilinear(img, manifest.image_size, manifest.image_size);
    out[i].image = std::move(img);
  }
  return out;
}

namespace {

// forward pass for one sample; returns the scalar loss node
int record_loss(ClassifierModel& model, Tape<float>& tape, const Tensor<float>& image, int label,
                bool train, Rng& dropout_rng, std::vector<int>& weight_nodes) {
  int feat;
  if (model.config.frozen_backbone) {
    feat = tape.input(model.backbone.eval(image));
  } else {
    int x = tape.input(image);
    feat = model.backbone.forward(tape, x, train, dropout_rng, &weight_nodes, true);
  }
  int probs = model.head.forward(tape, feat, train, dropout_rng, &weight_nodes, true);
  int ce = tape.cross_entropy(probs, label);
  if (model.config.l2 > 0.0 && !weight_nodes.empty()) {
    int l2 = tape.l2_penalty(weight_nodes, model.config.l2);
    return tape.add(ce, l2);
  }
  return ce;
}

std::vector<Tensor<float>*> trainable_params(ClassifierModel& model) {
  std::vector<Tensor<float>*> params;
  if (!model.config.frozen_backbone)
    for (auto* p : model.backbone.param_ptrs()) params.push_back(p);
  for (auto* p : model.head.param_ptrs()) params.push_back(p);
  return params;
}

}  // namespace

double evaluate_accuracy(ClassifierModel& model, const std::vector<LabeledImage>& set) {
  if (set.empty()) throw InputError("evaluate_accuracy: empty set");
  std::vector<uint8_t> correct(set.size(), 0);
  const int nw = kernels::workers();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nw) if (nw > 1)
#endif
  for (int i = 0; i < int(set.size()); ++i) {
    const std::vector<double> probs = classify_probs(model, set[size_t(i)].image);
    const int pred =
        int(std::max_element(probs.begin(), probs.end()) - probs.begin());
    correct[size_t(i)] = pred == set[size_t(i)].label ? 1 : 0;
  }
  int64_t n = 0;
  for (uint8_t c : correct) n += c;
  return double(n) / double(set.size());
}

TrainRunLog train_classifier(ClassifierModel& model, const std::vector<LabeledImage>& train_set,
                             const std::vector<LabeledImage>& val_set,
                             const AugmentConfig& augment_cfg, Checkpoint* best) {
  if (train_set.empty()) throw InputError("train_classifier: empty training set");
  const ClassifierConfig& cfg = model.config;

  TrainRunLog log;
  log.model_name = cfg.model_name;
  log.param_count = model.param_count();
  log.seed = cfg.seed;

  OptimizerState<float> opt = OptimizerState<float>::adam_state(cfg.learning_rate);
  opt.l2_coefficient = cfg.l2;
  std::vector<Tensor<float>*> params = trainable_params(model);

  Rng shuffle_rng(mix_seed(cfg.seed, 0x5AFFE));
  Rng sample_root(mix_seed(cfg.seed, 0xD20));
  double best_acc = -1.0;

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t(0));

  uint64_t sample_counter = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int64_t loss_n = 0;

    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + size_t(cfg.batch_size));
      for (Tensor<float>* p : params) {
        p->alloc_grad();
        p->zero_grad();
      }
      for (size_t bi = start; bi < stop; ++bi) {
        const LabeledImage& sample = train_set[order[bi]];
        Rng rng_s = sample_root.derive(sample_counter++);
        Tensor<float> img =
            cfg.augment ? augment_image(sample.image, augment_cfg, rng_s) : sample.image;
        Tape<float> tape;
        std::vector<int> weight_nodes;
        int loss;
        try {
          loss = record_loss(model, tape, img, sample.label, true, rng_s, weight_nodes);
          tape.backward(loss);
        } catch (const NumericError& e) {
          throw TrainingError(strf("epoch %d: %s", epoch, e.what()));
        }
        loss_sum += double(tape.value(loss).data[0]);
        ++loss_n;
      }
      const float inv = 1.0f / float(stop - start);
      for (Tensor<float>* p : params)
        for (float& g : p->grad) g *= inv;
      adam_step(params, opt);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_n ? loss_sum / double(loss_n) : 0.0;
    rec.val_accuracy = val_set.empty() ? 0.0 : evaluate_accuracy(model, val_set);
    log.epochs.push_back(rec);

    if (best && rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      *best = classifier_checkpoint(model);
      best->meta["best_epoch"] = strf("%d", epoch);
      best->meta["best_val_accuracy"] = strf("%.6f", rec.val_accuracy);
    }
  }
  if (best && cfg.epochs == 0) *best = classifier_checkpoint(model);
  return log;
}

TrainRunLog pretrain_pretext(ClassifierModel& model, const Manifest& train, const Manifest& val,
                             const AugmentConfig& augment_cfg, Checkpoint* best) {
  auto train_set = load_classification_set(train, model.classes);
  auto val_set = load_classification_set(val, model.classes);
  return train_classifier(model, train_set, val_set, augment_cfg, best);
}

TrainRunLog finetune(ClassifierModel& model, const std::string& pretrained_ckpt,
                     const Manifest& train, const Manifest& val, const AugmentConfig& augment_cfg,
                     Checkpoint* best) {
  if (!pretrained_ckpt.empty()) {
    Checkpoint ckpt = load_checkpoint(pretrained_ckpt);
    load_backbone_weights(model, ckpt);
  }
  auto train_set = load_classification_set(train, model.classes);
  auto val_set = load_classification_set(val, model.classes);
  return train_classifier(model, train_set, val_set, augment_cfg, best);
}

std::vector<double> classify_probs(ClassifierModel& model, const Tensor<float>& image) {
  Tensor<float> img = image;
  if (img.dim(0) != model.config.input_size || img.dim(1) != model.config.input_size)
    img = resize_bilinear(img, model.config.input_size, model.config.input_size);
  Tape<float> tape;
  Rng dummy(0);
  int x = tape.input(img);
  int feat = model.backbone.forward(tape, x, false, dummy, nullptr, false);
  int probs = model.head.forward(tape, feat, false, dummy, nullptr, false);
  const Tensor<float>& p = tape.value(probs);
  return std::vector<double>(p.data.begin(), p.data.end());
}

ClassifierOutput classify_image(ClassifierModel& model, const Tensor<float>& image) {
  const std::vector<double> probs = classify_probs(model, image);
  if (probs.size() != 2) throw StateError("classify_image: model is not a 2-class classifier");
  // class order is sorted label order: no=0, yes=1
  ClassifierOutput out;
  out.p_no = probs[0];
  out.p_yes = probs[1];
  return out;
}

Checkpoint classifier_checkpoint(const ClassifierModel& model) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "classifier";
  ckpt.meta["input_size"] = strf("%d", model.config.input_size);
  ckpt.meta["n_classes"] = strf("%d", model.config.n_classes);
  ckpt.meta["model_name"] = model.config.model_name;
  std::string classes;
  for (const auto& c : model.classes) classes += (classes.empty() ? "" : ",") + c;
  ckpt.meta["classes"] = classes;
  for (const auto& p : model.backbone.params()) ckpt.tensors.push_back({p.name, p.value});
  for (const auto& p : model.head.params()) ckpt.tensors.push_back({p.name, p.value});
  return ckpt;
}

ClassifierModel classifier_from_checkpoint(const Checkpoint& ckpt) {
  auto it = ckpt.meta.find("kind");
  if (it == ckpt.meta.end() || it->second != "classifier")
    throw InputError("checkpoint is not a classifier checkpoint");
  ClassifierConfig cfg;
  cfg.input_size = std::stoi(ckpt.meta.at("input_size"));
  cfg.n_classes = std::stoi(ckpt.meta.at("n_classes"));
  if (auto m = ckpt.meta.find("model_name"); m != ckpt.meta.end()) cfg.model_name = m->second;
  ClassifierModel model = build_classifier(cfg);
  if (auto c = ckpt.meta.find("classes"); c != ckpt.meta.end()) {
    model.classes.clear();
    std::istringstream is(c->second);
    std::string tok;
    while (std::getline(is, tok, ',')) model.classes.push_back(tok);
  }
  auto restore = [&](Sequential& seq) {
    for (auto& p : seq.params()) {
      const Tensor<float>* t = ckpt.find(p.name);
      if (!t) throw InputError("checkpoint missing tensor: " + p.name);
      if (t->shape != p.value.shape)
        throw InputError("checkpoint tensor shape mismatch: " + p.name);
      p.value = *t;
    }
  };
  restore(model.backbone);
  restore(model.head);
  return model;
}

void load_backbone_weights(ClassifierModel& model, const Checkpoint& ckpt) {
  for (auto& p : model.backbone.params()) {
    const Tensor<float>* t = ckpt.find(p.name);
    if (!t) throw InputError("pretrained checkpoint missing backbone tensor: " + p.name);
    if (t->shape != p.value.shape)
      throw InputError("pretrained checkpoint incompatible with backbone shape: " + p.name);
    p.value = *t;
  }
}

void write_runlog_csv(const TrainRunLog& log, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write run log: " + path);
  os << "# model=" << log.model_name << "\n";
  os << "# params=" << log.param_count << "\n";
  os << "# seed=" << log.seed << "\n";
  os << "epoch,train_loss,val_accuracy\n";
  for (const EpochRecord& r : log.epochs)
    os << strf("%d,%.6f,%.6f\n", r.epoch, r.train_loss, r.val_accuracy);
}

TrainRunLog read_runlog_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open run log: " + path);
  TrainRunLog log;
  log.model_name = fs::path(path).stem().string();
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    while (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(std::remove(key.begin(), key.end(), ' '), key.end());
      std::string val = line.substr(eq + 1);
      if (key == "model") log.model_name = val;
      if (key == "params") log.param_count = std::stoll(val);
      if (key == "seed") log.seed = std::stoull(val);
      continue;
    }
    if (line.rfind("epoch,", 0) == 0) continue;
    EpochRecord r;
    if (sscanf(line.c_str(), "%d,%lf,%lf", &r.epoch, &r.train_loss, &r.val_accuracy) != 3)
      throw ParseError(strf("%s:%d: bad run-log row", path.c_str(), line_no));
    log.epochs.push_back(r);
  }
  return log;
}

std::vector<RankRow> rank_models(const std::vector<TrainRunLog>& logs, int window) {
  if (window < 1) throw InputError("rank_models: window must be >= 1");
  std::vector<RankRow> rows;
  for (const TrainRunLog& log : logs) {
    if (int(log.epochs.size()) < window)
      throw InputError(strf("rank_models: log '%s' has %zu epochs, needs >= %d",
                            log.model_name.c_str(), log.epochs.size(), window));
    double s = 0;
    for (size_t i = log.epochs.size() - size_t(window); i < log.epochs.size(); ++i)
      s += log.epochs[i].val_accuracy;
    rows.push_back({0, log.model_name, log.param_count, s / window});
  }
  std::sort(rows.begin(), rows.end(), [](const RankRow& a, const RankRow& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.param_count != b.param_count) return a.param_count < b.param_count;
    return a.model < b.model;
  });
  for (size_t i = 0; i < rows.size(); ++i) rows[i].rank = int(i) + 1;
  return rows;
}

std::string rank_table_text(const std::vector<RankRow>& rows) {
  std::string out = strf("%-5s %-24s %14s %10s\n", "rank", "model", "params", "score");
  for (const RankRow& r : rows)
    out += strf("%-5d %-24s %14lld %10.4f\n", r.rank, r.model.c_str(),
                (long long)r.param_count, r.score);
  return out;
}

void write_rank_csv(const std::vector<RankRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write rank csv: " + path);
  os << "rank,model,param_count,score\n";
  for (const RankRow& r : rows)
    os << strf("%d,%s,%lld,%.6f\n", r.rank, r.model.c_str(), (long long)r.param_count, r.score);
}

}  // namespace pe
