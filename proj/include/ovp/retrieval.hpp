#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ovp/box.hpp"
#include "ovp/data.hpp"
#include "ovp/error.hpp"
#include "ovp/rng.hpp"
#include "ovp/train.hpp"

namespace ovp {

// Cosine of two vectors via L2-normalized copies; either vector having zero
// norm yields -1 so degenerate embeddings sort behind everything real.
template <class A, class B>
inline double cosine_similarity(std::span<const A> a, std::span<const B> b) {
  if (a.size() != b.size()) fail(Errc::DimensionMismatch, "cosine of vectors with different lengths");
  double na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (na == 0.0 || nb == 0.0) return -1.0;
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  double dot = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    dot += (static_cast<double>(a[i]) / na) * (static_cast<double>(b[i]) / nb);
  return dot;
}

// Train-split proposals with objectness strictly greater than tau, ascending.
// Objectness is stored as f32, so the comparison happens in f32: a proposal
// at exactly tau stays out even when tau is not representable.
inline std::vector<size_t> filter_proposals(const Dataset& d, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) fail(Errc::RangeError, "tau must lie in [0,1]");
  float tau_f = static_cast<float>(tau);
  std::vector<size_t> out;
  for (size_t i = 0; i < d.proposals.size(); ++i) {
    if (d.proposal_split(d.proposals[i]) != Split::Train) continue;
    if (d.proposals[i].objectness > tau_f) out.push_back(i);
  }
  return out;
}

struct PseudoLabel {
  size_t proposal_index = 0;
  uint32_t class_id = 0;
  double similarity = 0.0;
};

// Retrieved pseudo ground truth: per novel class the K most text-similar
// filtered proposals, each block sorted by similarity descending with ties
// broken toward the lower proposal index.
struct PseudoLabelSet {
  std::vector<PseudoLabel> entries;

  std::vector<const PseudoLabel*> of_class(uint32_t class_id) const {
    std::vector<const PseudoLabel*> out;
    for (const auto& e : entries)
      if (e.class_id == class_id) out.push_back(&e);
    return out;
  }
};

// Exact top-K cosine retrieval over the filtered pool. One proposal may be
// retrieved by several classes; each class block is independent.
inline PseudoLabelSet retrieve_topk(const Dataset& d, std::span<const size_t> filtered,
                                    std::span<const ClassEmbedding> novel_classes, int k) {
  if (k < 1) fail(Errc::RangeError, "k must be at least 1");
  for (size_t idx : filtered)
    if (idx >= d.proposals.size()) fail(Errc::DanglingReference, "filtered index out of range");

  PseudoLabelSet out;
  struct Entry {
    double sim;
    size_t index;
  };
  // Min-heap keyed so the worst kept candidate sits on top; "worse" is lower
  // similarity, then higher proposal index.
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.sim != b.sim) return a.sim < b.sim;
    return a.index > b.index;
  };
  auto heap_cmp = [&](const Entry& a, const Entry& b) { return worse(b, a); };

  for (const auto& cls : novel_classes) {
    if (cls.e_text.size() != d.d_emb)
      fail(Errc::DimensionMismatch, "text embedding length does not match dataset d_emb");
    std::vector<Entry> heap;
    heap.reserve(static_cast<size_t>(k) + 1);
    for (size_t idx : filtered) {
      double sim = cosine_similarity(std::span<const float>(cls.e_text),
                                     std::span<const float>(d.proposals[idx].e_img));
      Entry e{sim, idx};
      if (heap.size() < static_cast<size_t>(k)) {
        heap.push_back(e);
        std::push_heap(heap.begin(), heap.end(), heap_cmp);
      } else if (worse(heap.front(), e)) {
        std::pop_heap(heap.begin(), heap.end(), heap_cmp);
        heap.back() = e;
        std::push_heap(heap.begin(), heap.end(), heap_cmp);
      }
    }
    std::sort(heap.begin(), heap.end(), [&](const Entry& a, const Entry& b) { return worse(b, a); });
    for (const Entry& e : heap) out.entries.push_back({e.index, cls.class_id, e.sim});
  }
  return out;
}

// Faster R-CNN style per-image sampling parameters.
struct SamplingConfig {
  double iou_positive_threshold = 0.5;
  int samples_per_image = 512;
  double positive_fraction = 0.25;
  uint64_t seed = 0;
};

inline void validate(const SamplingConfig& c) {
  if (!(c.iou_positive_threshold > 0.0 && c.iou_positive_threshold < 1.0))
    fail(Errc::RangeError, "iou_positive_threshold must lie in (0,1)");
  if (!(c.positive_fraction > 0.0 && c.positive_fraction <= 1.0))
    fail(Errc::RangeError, "positive_fraction must lie in (0,1]");
  if (c.samples_per_image <= 0) fail(Errc::RangeError, "samples_per_image must be positive");
}

namespace detail {

struct GroundBox {
  BoxXYXY box;
  uint32_t class_id;
};

// Shared positive/negative assignment: a train proposal becomes a positive of
// the class whose ground box it overlaps best with IoU strictly above the
// threshold (ties toward the lower class id); everything else in the image is
// a negative. Then per-image subsampling caps positives at
// positive_fraction * samples_per_image and fills the rest with negatives.
inline std::vector<TrainSample> assign_and_sample(const Dataset& d,
                                                  const std::unordered_map<uint32_t, std::vector<GroundBox>>& ground,
                                                  const SamplingConfig& cfg) {
  validate(cfg);

  std::unordered_map<uint32_t, std::vector<size_t>> props_of_image;
  for (size_t i = 0; i < d.proposals.size(); ++i) props_of_image[d.proposals[i].image_id].push_back(i);

  std::vector<TrainSample> out;
  int max_pos = static_cast<int>(cfg.samples_per_image * cfg.positive_fraction);

  for (const auto& im : d.images) {
    if (im.split != Split::Train) continue;
    auto props_it = props_of_image.find(im.id);
    if (props_it == props_of_image.end()) continue;

    auto ground_it = ground.find(im.id);
    const std::vector<GroundBox>* boxes = ground_it == ground.end() ? nullptr : &ground_it->second;

    std::vector<TrainSample> positives;
    std::vector<TrainSample> negatives;
    for (size_t pi : props_it->second) {
      double best_iou = 0.0;
      uint32_t best_class = kNoClass;
      if (boxes) {
        for (const auto& g : *boxes) {
          double v = iou(d.proposals[pi].box, g.box);
          if (v > best_iou || (v == best_iou && best_class != kNoClass && g.class_id < best_class)) {
            best_iou = v;
            best_class = g.class_id;
          }
        }
      }
      if (best_iou > cfg.iou_positive_threshold)
        positives.push_back({pi, best_class});
      else
        negatives.push_back({pi, std::nullopt});
    }

    Rng img_rng(derive_seed(cfg.seed, "sample_image_" + std::to_string(im.id)));
    auto take = [&](std::vector<TrainSample>& pool, size_t want) {
      if (pool.size() > want) {
        shuffle(pool, img_rng);
        pool.resize(want);
        std::sort(pool.begin(), pool.end(),
                  [](const TrainSample& a, const TrainSample& b) { return a.proposal_index < b.proposal_index; });
      }
    };
    take(positives, static_cast<size_t>(max_pos));
    size_t room = static_cast<size_t>(cfg.samples_per_image) - positives.size();
    take(negatives, room);

    out.insert(out.end(), positives.begin(), positives.end());
    out.insert(out.end(), negatives.begin(), negatives.end());
  }
  return out;
}

}  // namespace detail

// Positive/negative samples against retrieved pseudo ground truth; the
// pseudo boxes themselves overlap themselves fully, so each retrieved
// proposal is a positive of its own class.
inline std::vector<TrainSample> sample_pos_neg(const Dataset& d, const PseudoLabelSet& pseudo,
                                               const SamplingConfig& cfg) {
  if (pseudo.entries.empty()) fail(Errc::EmptyPseudoLabelSet, "no pseudo labels to sample against");
  std::unordered_map<uint32_t, std::vector<detail::GroundBox>> ground;
  for (const auto& e : pseudo.entries) {
    if (e.proposal_index >= d.proposals.size())
      fail(Errc::DanglingReference, "pseudo label references unknown proposal");
    const auto& p = d.proposals[e.proposal_index];
    ground[p.image_id].push_back({p.box, e.class_id});
  }
  return detail::assign_and_sample(d, ground, cfg);
}

// Same sampling mechanism against the annotated train ground truth; used to
// build the base-head training set.
inline std::vector<TrainSample> sample_from_ground_truth(const Dataset& d, const SamplingConfig& cfg) {
  std::unordered_map<uint32_t, std::vector<detail::GroundBox>> ground;
  for (const auto& g : d.gt_train) ground[g.image_id].push_back({g.box, g.class_id});
  return detail::assign_and_sample(d, ground, cfg);
}

}  // namespace ovp
