#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ovp/box.hpp"
#include "ovp/data.hpp"
#include "ovp/error.hpp"
#include "ovp/inference.hpp"

namespace ovp {

// Greedy one-to-one matching for a single class. Detections must already be
// sorted by descending score (ties: lower image id, then input order); each
// detection claims the unmatched ground truth box with the highest IoU at or
// above the threshold (equal IoU resolves to the lower ground-truth index).
inline std::vector<uint8_t> match_detections(std::span<const Detection> dets,
                                             std::span<const GroundTruthBox> gts, double iou_threshold) {
  std::vector<uint8_t> tp(dets.size(), 0);
  std::vector<uint8_t> used(gts.size(), 0);
  for (size_t di = 0; di < dets.size(); ++di) {
    double best_iou = -1.0;
    size_t best_gt = gts.size();
    for (size_t gi = 0; gi < gts.size(); ++gi) {
      if (used[gi] || gts[gi].image_id != dets[di].image_id) continue;
      double v = iou(dets[di].box, gts[gi].box);
      if (v > best_iou) {
        best_iou = v;
        best_gt = gi;
      }
    }
    if (best_gt != gts.size() && best_iou >= iou_threshold) {
      used[best_gt] = 1;
      tp[di] = 1;
    }
  }
  return tp;
}

// Area under the precision-recall curve using the monotone precision
// envelope over all operating points. Zero ground truth yields 0 by
// convention; such classes are excluded from aggregates.
inline double average_precision(std::span<const uint8_t> tp_flags, size_t n_gt) {
  if (n_gt == 0) return 0.0;
  size_t n = tp_flags.size();
  std::vector<double> precision(n);
  size_t tp = 0;
  for (size_t i = 0; i < n; ++i) {
    if (tp_flags[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // envelope: precision at each rank becomes the max over later ranks
  for (size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double ap = 0.0;
  for (size_t i = 0; i < n; ++i)
    if (tp_flags[i]) ap += precision[i];
  return ap / static_cast<double>(n_gt);
}

struct EvalReport {
  std::map<uint32_t, double> per_class_ap;
  std::map<uint32_t, size_t> gt_count;
  std::map<uint32_t, size_t> det_count;
  double ap_novel = 0.0;
  double ap_base = 0.0;
  double ap_all = 0.0;
};

// Per-class AP50 over the test split plus the novel/base/all aggregates,
// which average over classes that own at least one ground-truth box.
inline EvalReport evaluate_dataset(const Dataset& d, std::span<const Detection> detections,
                                   double iou_threshold = 0.5) {
  for (const auto& det : detections) {
    if (!d.find_image(det.image_id)) fail(Errc::DanglingReference, "detection references unknown image");
    if (!d.find_class(det.class_id)) fail(Errc::DanglingReference, "detection references unknown class");
  }

  EvalReport report;
  double sum_novel = 0.0, sum_base = 0.0;
  size_t n_novel = 0, n_base = 0;

  for (const auto& cls : d.classes) {
    std::vector<GroundTruthBox> gts;
    for (const auto& g : d.gt_test)
      if (g.class_id == cls.id) gts.push_back(g);

    std::vector<Detection> dets;
    for (const auto& det : detections)
      if (det.class_id == cls.id) dets.push_back(det);
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.image_id < b.image_id;
    });

    auto flags = match_detections(dets, gts, iou_threshold);
    double ap = average_precision(flags, gts.size());
    report.per_class_ap[cls.id] = ap;
    report.gt_count[cls.id] = gts.size();
    report.det_count[cls.id] = dets.size();

    if (!gts.empty()) {
      if (cls.novel) {
        sum_novel += ap;
        ++n_novel;
      } else {
        sum_base += ap;
        ++n_base;
      }
    }
  }

  report.ap_novel = n_novel ? sum_novel / static_cast<double>(n_novel) : 0.0;
  report.ap_base = n_base ? sum_base / static_cast<double>(n_base) : 0.0;
  size_t n_all = n_novel + n_base;
  report.ap_all = n_all ? (sum_novel + sum_base) / static_cast<double>(n_all) : 0.0;
  return report;
}

inline std::string report_table(const EvalReport& report, const Dataset& d) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "class                 gt    det    AP50\n";
  for (const auto& [id, ap] : report.per_class_ap) {
    const ClassInfo* info = d.find_class(id);
    std::string name = info ? info->name : std::to_string(id);
    os << name;
    for (size_t i = name.size(); i < 20; ++i) os << ' ';
    os << ' ' << report.gt_count.at(id) << "    " << report.det_count.at(id) << "    " << ap << '\n';
  }
  os << "\nAP_novel  AP_base   AP\n";
  os << report.ap_novel << "    " << report.ap_base << "    " << report.ap_all << '\n';
  return os.str();
}

}  // namespace ovp
