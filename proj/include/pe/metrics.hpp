#pragma once

#include <string>
#include <vector>

#include "pe/boxes.hpp"

namespace pe {

double iou(const Rect& a, const Rect& b);

// per-detection verdicts for one image, detections in descending confidence
struct MatchResult {
  struct PerDetection {
    bool is_tp = false;
    int gt_index = -1;   // matched GT for TPs
    double iou = 0.0;
  };
  std::vector<PerDetection> detections;
  std::vector<bool> gt_matched;
};

// Greedy matching: walk detections by descending confidence (stable on ties),
// each takes the highest-IoU still-unmatched GT if that IoU >= threshold.
MatchResult match_detections(const std::vector<Detection>& detections,
                             const std::vector<Rect>& gt, double iou_threshold);

// All-point interpolated AP (precision-envelope integration) over a whole
// evaluation set; detections/gt are per-image lists with shared indexing.
double average_precision(const std::vector<std::vector<Detection>>& detections,
                         const std::vector<std::vector<Rect>>& gt, double iou_threshold);

struct Prf {
  double precision = 0, recall = 0, f1 = 0;
  int tp = 0, fp = 0, fn = 0;
};

Prf f1_at(const std::vector<std::vector<Detection>>& detections,
          const std::vector<std::vector<Rect>>& gt, double iou_threshold,
          double conf_threshold);

// Mean best-IoU of above-threshold detections against any GT in their image;
// returns 0 and sets *empty when nothing clears the confidence threshold.
double avg_iou(const std::vector<std::vector<Detection>>& detections,
               const std::vector<std::vector<Rect>>& gt, double conf_threshold,
               bool* empty = nullptr);

struct MetricsRow {
  double iou_threshold = 0, ap = 0, f1 = 0, avg_iou = 0, precision = 0, recall = 0;
};

struct PrPoint {
  double recall = 0, precision = 0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<std::vector<PrPoint>> pr_curves;  // one per row
  double conf_threshold = 0.25;
};

std::vector<double> default_iou_thresholds();  // 0.10 .. 0.90 step 0.10

MetricsReport threshold_sweep(const std::vector<std::vector<Detection>>& detections,
                              const std::vector<std::vector<Rect>>& gt,
                              const std::vector<double>& thresholds,
                              double conf_threshold = 0.25);

// PR points of the global confidence sweep at one IoU threshold.
std::vector<PrPoint> pr_curve(const std::vector<std::vector<Detection>>& detections,
                              const std::vector<std::vector<Rect>>& gt, double iou_threshold);

// argmax of validation AP; ties resolve to the earliest iteration
int select_checkpoint(const std::vector<std::pair<int, double>>& val_ap_log);

void write_metrics_csv(const MetricsReport& report, const std::string& path);
void write_pr_csv(const MetricsReport& report, const std::string& path);

}  // namespace pe
