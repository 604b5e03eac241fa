#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ovp/box.hpp"
#include "ovp/data.hpp"
#include "ovp/error.hpp"
#include "ovp/head.hpp"
#include "ovp/retrieval.hpp"

namespace ovp {

struct FusionParams {
  double beta = 0.8;
  double kappa = 0.01;
  double score_threshold = 0.05;
  double nms_iou = 0.5;
  int max_detections = 100;
  bool multiply_objectness = true;  // off only in the ablation harness
};

inline void validate(const FusionParams& p) {
  if (!(p.beta >= 0.0 && p.beta <= 1.0)) fail(Errc::RangeError, "beta must lie in [0,1]");
  if (!(p.kappa > 0.0)) fail(Errc::RangeError, "kappa must be positive");
  if (!(p.score_threshold >= 0.0)) fail(Errc::RangeError, "score_threshold must be non-negative");
  if (!(p.nms_iou >= 0.0 && p.nms_iou <= 1.0)) fail(Errc::RangeError, "nms_iou must lie in [0,1]");
  if (p.max_detections <= 0) fail(Errc::RangeError, "max_detections must be positive");
}

struct Detection {
  uint32_t image_id = 0;
  BoxXYXY box;
  uint32_t class_id = 0;
  double score = 0.0;
};

// Softmax over classes of cos(f_dis, e_text_c) / kappa.
inline std::vector<double> distillation_scores(std::span<const double> f_dis,
                                               std::span<const ClassEmbedding> all_text, double kappa) {
  if (!(kappa > 0.0)) fail(Errc::RangeError, "kappa must be positive");
  std::vector<double> logits(all_text.size());
  for (size_t c = 0; c < all_text.size(); ++c)
    logits[c] = cosine_similarity(f_dis, std::span<const float>(all_text[c].e_text)) / kappa;

  double max_logit = -std::numeric_limits<double>::infinity();
  for (double v : logits) max_logit = std::max(max_logit, v);
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - max_logit);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return logits;
}

namespace detail {

// pow with 0^0 == 1 so beta in {0,1} degenerates exactly.
inline double pow_or_one(double x, double e) { return e == 0.0 ? 1.0 : std::pow(x, e); }

}  // namespace detail

// Final per-class score: base classes o * s_cls, novel classes
// o * s_cls^beta * s_dis^(1-beta).
inline double fuse_scores(double o, double s_cls, double s_dis, bool novel_class, double beta) {
  if (!novel_class) return o * s_cls;
  return o * detail::pow_or_one(s_cls, beta) * detail::pow_or_one(s_dis, 1.0 - beta);
}

namespace detail {

struct HeadClassView {
  std::vector<ClassEmbedding> texts;  // aligned with head.class_ids
  std::vector<uint8_t> novel;
};

inline HeadClassView class_view(const Dataset& d, const LinearHead& head) {
  HeadClassView view;
  view.texts.reserve(head.class_ids.size());
  view.novel.reserve(head.class_ids.size());
  for (uint32_t id : head.class_ids) {
    const ClassInfo* info = d.find_class(id);
    const ClassEmbedding* text = d.find_text(id);
    if (!info || !text) fail(Errc::DanglingReference, "head class " + std::to_string(id) + " unknown to dataset");
    view.texts.push_back(*text);
    view.novel.push_back(info->novel ? 1 : 0);
  }
  return view;
}

struct Candidate {
  size_t proposal_index;
  double score;
};

// Threshold, class-wise NMS, global top-N with deterministic tie-breaks.
inline std::vector<Detection> finalize_detections(const Dataset& d, uint32_t image_id,
                                                  std::vector<std::vector<Candidate>>& per_class,
                                                  std::span<const uint32_t> class_ids, const FusionParams& fusion) {
  struct Survivor {
    size_t proposal_index;
    uint32_t class_id;
    double score;
  };
  std::vector<Survivor> survivors;
  for (size_t ci = 0; ci < per_class.size(); ++ci) {
    auto& cands = per_class[ci];
    if (cands.empty()) continue;
    std::vector<ScoredBox> boxes;
    boxes.reserve(cands.size());
    for (const auto& c : cands) boxes.push_back({d.proposals[c.proposal_index].box, c.score});
    for (size_t kept : nms(boxes, fusion.nms_iou))
      survivors.push_back({cands[kept].proposal_index, class_ids[ci], cands[kept].score});
  }

  std::sort(survivors.begin(), survivors.end(), [](const Survivor& a, const Survivor& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.proposal_index != b.proposal_index) return a.proposal_index < b.proposal_index;
    return a.class_id < b.class_id;
  });
  if (survivors.size() > static_cast<size_t>(fusion.max_detections))
    survivors.resize(static_cast<size_t>(fusion.max_detections));

  std::vector<Detection> out;
  out.reserve(survivors.size());
  for (const auto& s : survivors)
    out.push_back({image_id, d.proposals[s.proposal_index].box, s.class_id, s.score});
  return out;
}

inline std::vector<size_t> proposals_of_image(const Dataset& d, uint32_t image_id) {
  std::vector<size_t> out;
  for (size_t i = 0; i < d.proposals.size(); ++i)
    if (d.proposals[i].image_id == image_id) out.push_back(i);
  return out;
}

}  // namespace detail

// Full per-image inference: unified sigmoid scores, distillation softmax,
// score fusion with objectness, threshold, class-wise NMS, top-N cap.
// Proposal boxes are emitted unchanged; there is no box refinement.
inline std::vector<Detection> detect_image(const Dataset& d, uint32_t image_id, const LinearHead& unified,
                                           const LinearProjector& projector, const FusionParams& fusion) {
  validate(fusion);
  validate(unified);
  validate(projector);
  if (unified.d_cls != d.d_cls) fail(Errc::DimensionMismatch, "head feature dimension does not match dataset");
  if (projector.d_cls != d.d_cls || projector.d_emb != d.d_emb)
    fail(Errc::DimensionMismatch, "projector dimensions do not match dataset");
  if (!d.find_image(image_id)) fail(Errc::DanglingReference, "unknown image " + std::to_string(image_id));

  detail::HeadClassView view = detail::class_view(d, unified);
  std::vector<std::vector<detail::Candidate>> per_class(unified.num_classes());

  for (size_t pi : detail::proposals_of_image(d, image_id)) {
    const ProposalRecord& p = d.proposals[pi];
    std::vector<double> s_cls = sigmoid_scores(unified, p.f_cls);
    std::vector<double> f_dis = project(projector, p.f_cls);
    std::vector<double> s_dis = distillation_scores(f_dis, view.texts, fusion.kappa);
    double o = fusion.multiply_objectness ? static_cast<double>(p.objectness) : 1.0;
    for (size_t ci = 0; ci < unified.num_classes(); ++ci) {
      double s = fuse_scores(o, s_cls[ci], s_dis[ci], view.novel[ci] != 0, fusion.beta);
      if (s >= fusion.score_threshold) per_class[ci].push_back({pi, s});
    }
  }
  return detail::finalize_detections(d, image_id, per_class, unified.class_ids, fusion);
}

// Similarity-only scoring: every class is ranked by o * s_dis with no
// classifier involved. Kept as the comparison arm for ablations.
inline std::vector<Detection> baseline_similarity_detect(const Dataset& d, uint32_t image_id,
                                                         const LinearProjector& projector,
                                                         const FusionParams& fusion) {
  validate(fusion);
  validate(projector);
  if (projector.d_cls != d.d_cls || projector.d_emb != d.d_emb)
    fail(Errc::DimensionMismatch, "projector dimensions do not match dataset");
  if (!d.find_image(image_id)) fail(Errc::DanglingReference, "unknown image " + std::to_string(image_id));

  std::vector<uint32_t> class_ids;
  std::vector<ClassEmbedding> texts;
  for (const auto& c : d.classes) {
    const ClassEmbedding* text = d.find_text(c.id);
    if (!text) fail(Errc::DanglingReference, "class " + std::to_string(c.id) + " has no text embedding");
    class_ids.push_back(c.id);
    texts.push_back(*text);
  }

  std::vector<std::vector<detail::Candidate>> per_class(class_ids.size());
  for (size_t pi : detail::proposals_of_image(d, image_id)) {
    const ProposalRecord& p = d.proposals[pi];
    std::vector<double> f_dis = project(projector, p.f_cls);
    std::vector<double> s_dis = distillation_scores(f_dis, texts, fusion.kappa);
    double o = fusion.multiply_objectness ? static_cast<double>(p.objectness) : 1.0;
    for (size_t ci = 0; ci < class_ids.size(); ++ci) {
      double s = o * s_dis[ci];
      if (s >= fusion.score_threshold) per_class[ci].push_back({pi, s});
    }
  }
  return detail::finalize_detections(d, image_id, per_class, class_ids, fusion);
}

// Detections over the whole test split, grouped by image in id order.
template <class DetectFn>
inline std::vector<Detection> detect_split(const Dataset& d, Split split, DetectFn&& fn) {
  std::vector<uint32_t> ids;
  for (const auto& im : d.images)
    if (im.split == split) ids.push_back(im.id);
  std::sort(ids.begin(), ids.end());
  std::vector<Detection> out;
  for (uint32_t id : ids) {
    auto dets = fn(id);
    out.insert(out.end(), dets.begin(), dets.end());
  }
  return out;
}

}  // namespace ovp
