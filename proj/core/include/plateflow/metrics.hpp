#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plateflow/detect.hpp"

namespace plateflow {

/// Ground-truth object: class label plus box.
struct LabeledBox {
  std::string label;
  BoundingBox box;
};

struct MatchedPair {
  std::string label;
  int det_index = 0;  // index into the per-class confidence-ranked order
  int gt_index = 0;
  double iou = 0.0;
};

struct ClassCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long n_gt = 0;
  // Detections in descending confidence order with their TP/FP outcome.
  std::vector<double> ranked_confidence;
  std::vector<bool> ranked_is_tp;
};

struct MatchResult {
  std::map<std::string, ClassCounts> per_class;
  std::vector<MatchedPair> pairs;

  long tp() const;
  long fp() const;
  long fn() const;
};

/// Greedy per-class matching in descending confidence order. A detection is a
/// TP iff its best-IoU unmatched ground truth reaches the threshold (IoU ties
/// break toward the lower ground-truth index); each ground truth matches at
/// most once; unmatched ground truths are FNs.
MatchResult match_detections(std::span<const Detection> detections,
                             std::span<const LabeledBox> ground_truth, double iou_threshold);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  bool precision_defined = true;  // false when TP+FP == 0
  bool recall_defined = true;     // false when TP+FN == 0
};

PrecisionRecall precision_recall(const MatchResult& m);

/// Area under the precision-recall curve with all-point interpolation
/// (precision envelope made monotone non-increasing, integrated over recall).
/// `ranked_is_tp` must be in descending confidence order; n_gt >= 1.
double average_precision(const std::vector<bool>& ranked_is_tp, long n_gt);

/// Arithmetic mean; throws on an empty span.
double mean_ap(std::span<const double> per_class_ap);

/// Unit-cost insert/delete/substitute edit distance.
int levenshtein(const std::string& a, const std::string& b);

/// (|a|+|b| - wdist) / (|a|+|b|) with substitution cost 2 and unit
/// insert/delete. Both strings empty gives 1.0.
double levenshtein_ratio(const std::string& a, const std::string& b);

/// Mean levenshtein distance over (predicted, target) pairs.
double average_levenshtein(std::span<const std::pair<std::string, std::string>> pairs);

struct ClassEval {
  std::string label;
  long n_gt = 0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double ap = 0.0;
  std::vector<bool> ranked_is_tp;  // confidence-ranked outcomes, for PR curves
};

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// Raw per-rank PR points (before envelope interpolation).
std::vector<PrPoint> pr_curve(const std::vector<bool>& ranked_is_tp, long n_gt);

struct LevenshteinStats {
  std::size_t n_pairs = 0;
  double mean_distance = 0.0;  // ALD
  double mean_ratio = 0.0;
  double exact_match_rate = 0.0;
};

struct EvalReport {
  std::vector<ClassEval> per_class;  // classes with at least one ground truth
  double map = 0.0;
  PrecisionRecall totals;
  bool has_detection_eval = false;
  LevenshteinStats lev;
  bool has_lev = false;
};

struct ImageEvalInput {
  std::vector<Detection> detections;
  std::vector<LabeledBox> ground_truth;
};

/// Pools matches across images (per-class confidence ranking is global) and
/// computes AP per class plus micro-averaged precision/recall. mAP averages
/// only classes with ground truth.
EvalReport evaluate_detections(std::span<const ImageEvalInput> images, double iou_threshold);

void add_levenshtein_stats(EvalReport& report,
                           std::span<const std::pair<std::string, std::string>> pairs);

void write_eval_report_json(const EvalReport& report, const std::string& path);
void write_eval_report_csv(const EvalReport& report, const std::string& path);

/// Pairs CSV with header image_id,predicted,target.
void write_pairs_csv(std::span<const std::tuple<std::string, std::string, std::string>> rows,
                     const std::string& path);
std::vector<std::tuple<std::string, std::string, std::string>> load_pairs_csv(
    const std::string& path);

}  // namespace plateflow
