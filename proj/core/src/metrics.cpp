#include "plateflow/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "plateflow/errors.hpp"
#include "plateflow/text.hpp"

namespace plateflow {

long MatchResult::tp() const {
  return std::accumulate(per_class.begin(), per_class.end(), 0L,
                         [](long acc, const auto& kv) { return acc + kv.second.tp; });
}
long MatchResult::fp() const {
  return std::accumulate(per_class.begin(), per_class.end(), 0L,
                         [](long acc, const auto& kv) { return acc + kv.second.fp; });
}
long MatchResult::fn() const {
  return std::accumulate(per_class.begin(), per_class.end(), 0L,
                         [](long acc, const auto& kv) { return acc + kv.second.fn; });
}

MatchResult match_detections(std::span<const Detection> detections,
                             std::span<const LabeledBox> ground_truth, double iou_threshold) {
  MatchResult result;

  std::set<std::string> labels;
  for (const auto& d : detections) labels.insert(d.label);
  for (const auto& g : ground_truth) labels.insert(g.label);

  for (const auto& label : labels) {
    auto& cls = result.per_class[label];

    std::vector<int> det_order;
    for (int i = 0; i < static_cast<int>(detections.size()); ++i)
      if (detections[static_cast<std::size_t>(i)].label == label) det_order.push_back(i);
    std::stable_sort(det_order.begin(), det_order.end(), [&](int a, int b) {
      return detections[static_cast<std::size_t>(a)].confidence >
             detections[static_cast<std::size_t>(b)].confidence;
    });

    std::vector<int> gt_idx;
    for (int i = 0; i < static_cast<int>(ground_truth.size()); ++i)
      if (ground_truth[static_cast<std::size_t>(i)].label == label) gt_idx.push_back(i);
    std::vector<bool> gt_used(gt_idx.size(), false);
    cls.n_gt = static_cast<long>(gt_idx.size());

    for (std::size_t rank = 0; rank < det_order.size(); ++rank) {
      const auto& det = detections[static_cast<std::size_t>(det_order[rank])];
      int best = -1;
      double best_iou = 0.0;
      for (std::size_t g = 0; g < gt_idx.size(); ++g) {
        if (gt_used[g]) continue;
        const double v = iou(det.box, ground_truth[static_cast<std::size_t>(gt_idx[g])].box);
        if (v > best_iou) {  // strict: IoU ties keep the lower ground-truth index
          best_iou = v;
          best = static_cast<int>(g);
        }
      }
      const bool is_tp = best >= 0 && best_iou >= iou_threshold;
      if (is_tp) {
        gt_used[static_cast<std::size_t>(best)] = true;
        ++cls.tp;
        result.pairs.push_back({label, static_cast<int>(rank), gt_idx[static_cast<std::size_t>(best)], best_iou});
      } else {
        ++cls.fp;
      }
      cls.ranked_confidence.push_back(det.confidence);
      cls.ranked_is_tp.push_back(is_tp);
    }
    cls.fn = cls.n_gt - cls.tp;
  }
  return result;
}

PrecisionRecall precision_recall(const MatchResult& m) {
  const long tp = m.tp();
  const long fp = m.fp();
  const long fn = m.fn();
  PrecisionRecall pr;
  if (tp + fp == 0) {
    pr.precision = 0.0;
    pr.precision_defined = false;
  } else {
    pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    pr.recall = 0.0;
    pr.recall_defined = false;
  } else {
    pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  return pr;
}

double average_precision(const std::vector<bool>& ranked_is_tp, long n_gt) {
  if (n_gt < 1) throw DataError("average_precision: needs at least one ground truth");
  const std::size_t n = ranked_is_tp.size();
  if (n == 0) return 0.0;

  std::vector<double> precision(n);
  std::vector<double> recall(n);
  long tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += ranked_is_tp[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  // Monotone non-increasing precision envelope.
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

std::vector<PrPoint> pr_curve(const std::vector<bool>& ranked_is_tp, long n_gt) {
  if (n_gt < 1) throw DataError("pr_curve: needs at least one ground truth");
  std::vector<PrPoint> points;
  long tp = 0;
  for (std::size_t i = 0; i < ranked_is_tp.size(); ++i) {
    tp += ranked_is_tp[i] ? 1 : 0;
    points.push_back({static_cast<double>(tp) / static_cast<double>(n_gt),
                      static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  return points;
}

double mean_ap(std::span<const double> per_class_ap) {
  if (per_class_ap.empty()) throw DataError("mean_ap: no classes");
  double sum = 0.0;
  for (double v : per_class_ap) sum += v;
  return sum / static_cast<double>(per_class_ap.size());
}

int levenshtein(const std::string& a, const std::string& b) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  std::vector<int> prev(n + 1);
  std::vector<int> cur(n + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

double levenshtein_ratio(const std::string& a, const std::string& b) {
  const std::size_t lensum = a.size() + b.size();
  if (lensum == 0) return 1.0;
  // Weighted distance: substitution costs 2, insert/delete cost 1.
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  std::vector<int> prev(n + 1);
  std::vector<int> cur(n + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= n; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 2);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return (static_cast<double>(lensum) - prev[n]) / static_cast<double>(lensum);
}

double average_levenshtein(std::span<const std::pair<std::string, std::string>> pairs) {
  if (pairs.empty()) throw DataError("average_levenshtein: empty set");
  double sum = 0.0;
  for (const auto& [pred, target] : pairs) sum += levenshtein(pred, target);
  return sum / static_cast<double>(pairs.size());
}

EvalReport evaluate_detections(std::span<const ImageEvalInput> images, double iou_threshold) {
  // Per-image matching; per-class ranking pooled globally by confidence.
  struct Pooled {
    long n_gt = 0;
    long tp = 0, fp = 0, fn = 0;
    std::vector<std::pair<double, bool>> ranked;  // (confidence, is_tp)
  };
  std::map<std::string, Pooled> pooled;

  for (const auto& img : images) {
    const MatchResult m = match_detections(img.detections, img.ground_truth, iou_threshold);
    for (const auto& [label, cls] : m.per_class) {
      auto& p = pooled[label];
      p.n_gt += cls.n_gt;
      p.tp += cls.tp;
      p.fp += cls.fp;
      p.fn += cls.fn;
      for (std::size_t i = 0; i < cls.ranked_is_tp.size(); ++i)
        p.ranked.emplace_back(cls.ranked_confidence[i], cls.ranked_is_tp[i]);
    }
  }

  EvalReport report;
  report.has_detection_eval = true;
  long tot_tp = 0, tot_fp = 0, tot_fn = 0;
  std::vector<double> aps;
  for (auto& [label, p] : pooled) {
    tot_tp += p.tp;
    tot_fp += p.fp;
    tot_fn += p.fn;
    if (p.n_gt == 0) continue;  // classes without ground truth are excluded from mAP
    std::stable_sort(p.ranked.begin(), p.ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<bool> flags;
    flags.reserve(p.ranked.size());
    for (const auto& [conf, is_tp] : p.ranked) flags.push_back(is_tp);

    ClassEval ce;
    ce.label = label;
    ce.n_gt = p.n_gt;
    ce.tp = p.tp;
    ce.fp = p.fp;
    ce.fn = p.fn;
    ce.precision = (p.tp + p.fp) ? static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp) : 0.0;
    ce.recall = static_cast<double>(p.tp) / static_cast<double>(p.n_gt);
    ce.ap = average_precision(flags, p.n_gt);
    ce.ranked_is_tp = std::move(flags);
    aps.push_back(ce.ap);
    report.per_class.push_back(std::move(ce));
  }
  report.map = aps.empty() ? 0.0 : mean_ap(aps);
  if (tot_tp + tot_fp == 0) {
    report.totals.precision = 0.0;
    report.totals.precision_defined = false;
  } else {
    report.totals.precision = static_cast<double>(tot_tp) / static_cast<double>(tot_tp + tot_fp);
  }
  if (tot_tp + tot_fn == 0) {
    report.totals.recall = 0.0;
    report.totals.recall_defined = false;
  } else {
    report.totals.recall = static_cast<double>(tot_tp) / static_cast<double>(tot_tp + tot_fn);
  }
  return report;
}

void add_levenshtein_stats(EvalReport& report,
                           std::span<const std::pair<std::string, std::string>> pairs) {
  if (pairs.empty()) throw DataError("add_levenshtein_stats: empty pair set");
  LevenshteinStats stats;
  stats.n_pairs = pairs.size();
  double dist = 0.0, ratio = 0.0, exact = 0.0;
  for (const auto& [pred, target] : pairs) {
    dist += levenshtein(pred, target);
    ratio += levenshtein_ratio(pred, target);
    exact += (pred == target) ? 1.0 : 0.0;
  }
  stats.mean_distance = dist / static_cast<double>(pairs.size());
  stats.mean_ratio = ratio / static_cast<double>(pairs.size());
  stats.exact_match_rate = exact / static_cast<double>(pairs.size());
  report.lev = stats;
  report.has_lev = true;
}

void write_eval_report_json(const EvalReport& report, const std::string& path) {
  nlohmann::ordered_json j;
  j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& c : report.per_class) {
    nlohmann::ordered_json e;
    e["label"] = c.label;
    e["n_gt"] = c.n_gt;
    e["tp"] = c.tp;
    e["fp"] = c.fp;
    e["fn"] = c.fn;
    e["precision"] = c.precision;
    e["recall"] = c.recall;
    e["ap"] = c.ap;
    j["per_class"].push_back(std::move(e));
  }
  if (report.has_detection_eval) {
    j["map"] = report.map;
    j["precision"] = report.totals.precision;
    j["recall"] = report.totals.recall;
  }
  if (report.has_lev) {
    j["levenshtein"] = {{"n_pairs", report.lev.n_pairs},
                        {"mean_distance", report.lev.mean_distance},
                        {"mean_ratio", report.lev.mean_ratio},
                        {"exact_match_rate", report.lev.exact_match_rate}};
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write eval report: " + path);
  out << j.dump(2) << '\n';
}

void write_eval_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write eval report: " + path);
  out << "label,n_gt,tp,fp,fn,precision,recall,ap,ald,lev_ratio,exact_match\n";
  for (const auto& c : report.per_class) {
    out << c.label << ',' << c.n_gt << ',' << c.tp << ',' << c.fp << ',' << c.fn << ','
        << format_double(c.precision) << ',' << format_double(c.recall) << ','
        << format_double(c.ap) << ",,,\n";
  }
  out << "ALL,,,,," << format_double(report.totals.precision) << ','
      << format_double(report.totals.recall) << ',' << format_double(report.map) << ',';
  if (report.has_lev) {
    out << format_double(report.lev.mean_distance) << ',' << format_double(report.lev.mean_ratio)
        << ',' << format_double(report.lev.exact_match_rate);
  } else {
    out << ",,";
  }
  out << '\n';
}

void write_pairs_csv(std::span<const std::tuple<std::string, std::string, std::string>> rows,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write pairs csv: " + path);
  out << "image_id,predicted,target\n";
  for (const auto& [id, pred, target] : rows) out << id << ',' << pred << ',' << target << '\n';
}

std::vector<std::tuple<std::string, std::string, std::string>> load_pairs_csv(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open pairs csv: " + path);
  std::vector<std::tuple<std::string, std::string, std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      first = false;
      if (line != "image_id,predicted,target")
        throw DataError("pairs csv missing expected header: " + path);
      continue;
    }
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 3) throw DataError("pairs csv row needs 3 columns: '" + line + "'");
    rows.emplace_back(cols[0], cols[1], cols[2]);
  }
  return rows;
}

}  // namespace plateflow
