#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pe/augment.hpp"
#include "pe/checkpoint.hpp"
#include "pe/dataset.hpp"
#include "pe/layers.hpp"

namespace pe {

struct ClassifierConfig {
  int input_size = 64;  // 64 or 224 (any multiple of 16)
  int n_classes = 2;
  double learning_rate = 1e-4;
  double dropout_ratio = 0.4;
  double l2 = 0.005;
  int batch_size = 16;
  int epochs = 40;
  bool frozen_backbone = false;
  bool augment = true;
  uint64_t seed = 7;
  std::string model_name = "pepipe-cnn";
};

// Figure-style transfer stack: compact conv backbone (feature extractor) plus
// a replaceable dense head ending in softmax.
struct ClassifierModel {
  Sequential backbone;  // conv blocks 8/16/32/64 + global average pool
  Sequential head;      // dense 512 -> dropout -> dense C -> softmax
  ClassifierConfig config;
  std::vector<std::string> classes;  // index -> label, sorted

  int64_t param_count() const { return backbone.param_count() + head.param_count(); }
};

struct ClassifierOutput {
  double p_yes = 0, p_no = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_accuracy = 0;
};

struct TrainRunLog {
  std::string model_name;
  int64_t param_count = 0;
  uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
};

ClassifierModel build_classifier(const ClassifierConfig& config);

struct LabeledImage {
  Tensor<float> image;
  int label = 0;
};

// loads and validates every entry up front (fail-fast), resizing on mismatch
std::vector<LabeledImage> load_classification_set(const Manifest& manifest,
                                                  const std::vector<std::string>& classes);

// Adam + cross-entropy + L2 loop; per-epoch validation accuracy; the best
// validation checkpoint (earliest on ties) lands in *best when given.
TrainRunLog train_classifier(ClassifierModel& model, const std::vector<LabeledImage>& train_set,
                             const std::vector<LabeledImage>& val_set,
                             const AugmentConfig& augment, Checkpoint* best = nullptr);

// pretext stage: same trainer on the vessel-count bucket task
TrainRunLog pretrain_pretext(ClassifierModel& model, const Manifest& train,
                             const Manifest& val, const AugmentConfig& augment,
                             Checkpoint* best = nullptr);

// fine-tuning: restore backbone weights from a pretext checkpoint (head is
// discarded), then train on the yes/no task
TrainRunLog finetune(ClassifierModel& model, const std::string& pretrained_ckpt,
                     const Manifest& train, const Manifest& val, const AugmentConfig& augment,
                     Checkpoint* best = nullptr);

ClassifierOutput classify_image(ClassifierModel& model, const Tensor<float>& image);
std::vector<double> classify_probs(ClassifierModel& model, const Tensor<float>& image);

double evaluate_accuracy(ClassifierModel& model, const std::vector<LabeledImage>& set);

Checkpoint classifier_checkpoint(const ClassifierModel& model);
ClassifierModel classifier_from_checkpoint(const Checkpoint& ckpt);
void load_backbone_weights(ClassifierModel& model, const Checkpoint& ckpt);

void write_runlog_csv(const TrainRunLog& log, const std::string& path);
TrainRunLog read_runlog_csv(const std::string& path);

struct RankRow {
  int rank = 0;
  std::string model;
  int64_t param_count = 0;
  double score = 0;
};

// score = mean validation accuracy over the final `window` epochs; descending,
// ties by fewer parameters then by name
std::vector<RankRow> rank_models(const std::vector<TrainRunLog>& logs, int window = 20);

std::string rank_table_text(const std::vector<RankRow>& rows);
void write_rank_csv(const std::vector<RankRow>& rows, const std::string& path);

}  // namespace pe
