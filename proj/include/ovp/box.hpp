#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "ovp/error.hpp"

namespace ovp {

// Axis-aligned box, corner convention: (x1,y1) top-left, (x2,y2) bottom-right.
// Construction rejects negative extents and non-finite coordinates, so every
// live BoxXYXY is valid. Zero-area boxes are allowed.
struct BoxXYXY {
  float x1 = 0.0f;
  float y1 = 0.0f;
  float x2 = 0.0f;
  float y2 = 0.0f;

  BoxXYXY() = default;

  BoxXYXY(float x1_, float y1_, float x2_, float y2_) : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
    if (!(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2)))
      fail(Errc::InvalidData, "box coordinates must be finite");
    if (x2 < x1 || y2 < y1) fail(Errc::InvalidData, "box has negative extent");
  }

  double width() const { return static_cast<double>(x2) - x1; }
  double height() const { return static_cast<double>(y2) - y1; }
  double area() const { return width() * height(); }

  bool operator==(const BoxXYXY&) const = default;
};

// Intersection over union; 0 when the union has zero area.
inline double iou(const BoxXYXY& a, const BoxXYXY& b) {
  double ix = std::max(0.0, static_cast<double>(std::min(a.x2, b.x2)) - std::max(a.x1, b.x1));
  double iy = std::max(0.0, static_cast<double>(std::min(a.y2, b.y2)) - std::max(a.y1, b.y1));
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

struct ScoredBox {
  BoxXYXY box;
  double score = 0.0;
};

// Greedy class-wise NMS. Returns kept candidate indices in descending score
// order; equal scores break toward the lower input index. A candidate is
// suppressed when its IoU with an already-kept box exceeds the threshold.
inline std::vector<size_t> nms(std::span<const ScoredBox> candidates, double iou_threshold) {
  std::vector<size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (candidates[a].score != candidates[b].score) return candidates[a].score > candidates[b].score;
    return a < b;
  });

  std::vector<size_t> kept;
  for (size_t idx : order) {
    bool suppressed = false;
    for (size_t k : kept) {
      if (iou(candidates[idx].box, candidates[k].box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

}  // namespace ovp
