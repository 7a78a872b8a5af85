#include "pe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace pe {

double iou(const Rect& a, const Rect& b) {
  if (!a.valid() || !b.valid()) throw InputError("iou: degenerate rectangle");
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

namespace {

// stable descending-confidence order; equal confidences keep input order
std::vector<size_t> confidence_order(const std::vector<Detection>& dets) {
  std::vector<size_t> order(dets.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

}  // namespace

MatchResult match_detections(const std::vector<Detection>& detections,
                             const std::vector<Rect>& gt, double iou_threshold) {
  MatchResult res;
  res.detections.resize(detections.size());
  res.gt_matched.assign(gt.size(), false);

  for (size_t oi : confidence_order(detections)) {
    double best_iou = 0.0;
    int best_gt = -1;
    for (size_t gi = 0; gi < gt.size(); ++gi) {
      if (res.gt_matched[gi]) continue;
      const double v = iou(detections[oi].box, gt[gi]);
      if (v > best_iou) {  // ties keep the lower GT index
        best_iou = v;
        best_gt = int(gi);
      }
    }
    if (best_gt >= 0 && best_iou >= iou_threshold) {
      res.detections[oi] = {true, best_gt, best_iou};
      res.gt_matched[size_t(best_gt)] = true;
    } else {
      res.detections[oi] = {false, -1, best_iou};
    }
  }
  return res;
}

namespace {

struct RankedFlag {
  double confidence;
  size_t image;
  size_t index;  // within-image insertion index, the documented tiebreak
  bool is_tp;
};

// Global confidence-ranked TP/FP flags. Greedy matching per image in global
// confidence order; later (lower-confidence) detections never change the
// verdict of earlier ones, so cumulative counts equal per-cutoff reruns.
std::vector<RankedFlag> ranked_flags(const std::vector<std::vector<Detection>>& detections,
                                     const std::vector<std::vector<Rect>>& gt,
                                     double iou_threshold) {
  if (detections.size() != gt.size())
    throw InputError("detections and gt must cover the same image list");
  std::vector<RankedFlag> flags;
  for (size_t img = 0; img < detections.size(); ++img)
    for (size_t i = 0; i < detections[img].size(); ++i)
      flags.push_back({detections[img][i].confidence, img, i, false});
  std::stable_sort(flags.begin(), flags.end(), [](const RankedFlag& a, const RankedFlag& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });

  std::vector<std::vector<bool>> taken(gt.size());
  for (size_t i = 0; i < gt.size(); ++i) taken[i].assign(gt[i].size(), false);
  for (RankedFlag& f : flags) {
    const Rect& box = detections[f.image][f.index].box;
    double best = 0.0;
    int best_gt = -1;
    for (size_t gi = 0; gi < gt[f.image].size(); ++gi) {
      if (taken[f.image][gi]) continue;
      const double v = iou(box, gt[f.image][gi]);
      if (v > best) {
        best = v;
        best_gt = int(gi);
      }
    }
    if (best_gt >= 0 && best >= iou_threshold) {
      f.is_tp = true;
      taken[f.image][size_t(best_gt)] = true;
    }
  }
  return flags;
}

int64_t total_gt(const std::vector<std::vector<Rect>>& gt) {
  int64_t n = 0;
  for (const auto& g : gt) n += int64_t(g.size());
  return n;
}

}  // namespace

double average_precision(const std::vector<std::vector<Detection>>& detections,
                         const std::vector<std::vector<Rect>>& gt, double iou_threshold) {
  const int64_t n_gt = total_gt(gt);
  if (n_gt == 0) throw InputError("average_precision: no ground-truth boxes");
  const auto flags = ranked_flags(detections, gt, iou_threshold);
  if (flags.empty()) return 0.0;

  std::vector<double> precision(flags.size()), recall(flags.size());
  int64_t tp = 0;
  for (size_t i = 0; i < flags.size(); ++i) {
    if (flags[i].is_tp) ++tp;
    precision[i] = double(tp) / double(i + 1);
    recall[i] = double(tp) / double(n_gt);
  }
  // precision envelope (right-to-left running max), integrate over recall
  for (size_t i = flags.size() - 1; i > 0; --i)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (size_t i = 0; i < flags.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

std::vector<PrPoint> pr_curve(const std::vector<std::vector<Detection>>& detections,
                              const std::vector<std::vector<Rect>>& gt, double iou_threshold) {
  const int64_t n_gt = total_gt(gt);
  if (n_gt == 0) throw InputError("pr_curve: no ground-truth boxes");
  const auto flags = ranked_flags(detections, gt, iou_threshold);
  std::vector<PrPoint> pts;
  int64_t tp = 0;
  for (size_t i = 0; i < flags.size(); ++i) {
    if (flags[i].is_tp) ++tp;
    pts.push_back({double(tp) / double(n_gt), double(tp) / double(i + 1)});
  }
  return pts;
}

Prf f1_at(const std::vector<std::vector<Detection>>& detections,
          const std::vector<std::vector<Rect>>& gt, double iou_threshold, double conf_threshold) {
  const int64_t n_gt = total_gt(gt);
  if (n_gt == 0) throw InputError("f1_at: no ground-truth boxes");
  Prf out;
  for (size_t img = 0; img < detections.size(); ++img) {
    std::vector<Detection> kept;
    for (const Detection& d : detections[img])
      if (d.confidence >= conf_threshold) kept.push_back(d);
    const MatchResult m = match_detections(kept, gt[img], iou_threshold);
    for (const auto& d : m.detections) d.is_tp ? ++out.tp : ++out.fp;
  }
  out.fn = int(n_gt) - out.tp;
  if (out.tp == 0) return out;  // all-zero by definition
  out.precision = double(out.tp) / double(out.tp + out.fp);
  out.recall = double(out.tp) / double(n_gt);
  out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

double avg_iou(const std::vector<std::vector<Detection>>& detections,
               const std::vector<std::vector<Rect>>& gt, double conf_threshold, bool* empty) {
  double sum = 0.0;
  int64_t n = 0;
  for (size_t img = 0; img < detections.size(); ++img)
    for (const Detection& d : detections[img]) {
      if (d.confidence < conf_threshold) continue;
      double best = 0.0;  // image without GT contributes 0
      for (const Rect& g : gt[img]) best = std::max(best, iou(d.box, g));
      sum += best;
      ++n;
    }
  if (empty) *empty = (n == 0);
  return n > 0 ? sum / double(n) : 0.0;
}

std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 9; ++i) t.push_back(i / 10.0);
  return t;
}

MetricsReport threshold_sweep(const std::vector<std::vector<Detection>>& detections,
                              const std::vector<std::vector<Rect>>& gt,
                              const std::vector<double>& thresholds, double conf_threshold) {
  for (size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] <= 0 || thresholds[i] >= 1)
      throw InputError("threshold_sweep: thresholds must lie in (0,1)");
    if (i > 0 && thresholds[i] <= thresholds[i - 1])
      throw InputError("threshold_sweep: thresholds must be strictly increasing");
  }
  MetricsReport rep;
  rep.conf_threshold = conf_threshold;
  const double a_iou = avg_iou(detections, gt, conf_threshold);
  for (double thr : thresholds) {
    MetricsRow row;
    row.iou_threshold = thr;
    row.ap = average_precision(detections, gt, thr);
    const Prf prf = f1_at(detections, gt, thr, conf_threshold);
    row.f1 = prf.f1;
    row.precision = prf.precision;
    row.recall = prf.recall;
    row.avg_iou = a_iou;
    rep.rows.push_back(row);
    rep.pr_curves.push_back(pr_curve(detections, gt, thr));
  }
  return rep;
}

int select_checkpoint(const std::vector<std::pair<int, double>>& val_ap_log) {
  if (val_ap_log.empty()) throw InputError("select_checkpoint: empty log");
  size_t best = 0;
  for (size_t i = 1; i < val_ap_log.size(); ++i)
    if (val_ap_log[i].second > val_ap_log[best].second) best = i;
  return val_ap_log[best].first;
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write metrics csv: " + path);
  os << "threshold,ap,f1,avg_iou,precision,recall\n";
  for (const MetricsRow& r : report.rows)
    os << strf("%.2f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.iou_threshold, r.ap, r.f1, r.avg_iou,
               r.precision, r.recall);
}

void write_pr_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write pr csv: " + path);
  os << "threshold,recall,precision\n";
  for (size_t i = 0; i < report.rows.size(); ++i)
    for (const PrPoint& p : report.pr_curves[i])
      os << strf("%.2f,%.6f,%.6f\n", report.rows[i].iou_threshold, p.recall, p.precision);
}

}  // namespace pe
