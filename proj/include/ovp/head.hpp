#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "ovp/error.hpp"
#include "ovp/focal.hpp"

namespace ovp {

// Linear classification head over frozen features: one weight row and one
// bias per class, scored with per-class independent sigmoids. Weights are
// stored as f32 so a head round-trips bit-exactly through its checkpoint.
struct LinearHead {
  std::vector<uint32_t> class_ids;
  uint32_t d_cls = 0;
  std::vector<float> weights;  // row-major, class_ids.size() x d_cls
  std::vector<float> biases;

  size_t num_classes() const { return class_ids.size(); }

  std::span<const float> row(size_t i) const {
    return std::span<const float>(weights.data() + i * d_cls, d_cls);
  }

  bool operator==(const LinearHead&) const = default;
};

inline void validate(const LinearHead& head) {
  if (head.weights.size() != head.class_ids.size() * static_cast<size_t>(head.d_cls))
    fail(Errc::DimensionMismatch, "weight matrix shape does not match class list");
  if (head.biases.size() != head.class_ids.size())
    fail(Errc::DimensionMismatch, "bias vector length does not match class list");
}

inline std::vector<double> head_logits(const LinearHead& head, std::span<const float> f) {
  if (f.size() != head.d_cls) fail(Errc::DimensionMismatch, "feature dimension does not match head");
  std::vector<double> logits(head.num_classes());
  for (size_t i = 0; i < head.num_classes(); ++i) {
    auto w = head.row(i);
    double acc = head.biases[i];
    for (size_t j = 0; j < w.size(); ++j) acc += static_cast<double>(w[j]) * static_cast<double>(f[j]);
    logits[i] = acc;
  }
  return logits;
}

// Per-class independent probabilities sigmoid(w_c . f + b_c).
inline std::vector<double> sigmoid_scores(const LinearHead& head, std::span<const float> f) {
  std::vector<double> scores = head_logits(head, f);
  for (double& s : scores) s = stable_sigmoid(s);
  return scores;
}

// Unified head: base rows first, then novel rows. Because every class is
// scored by its own sigmoid, concatenation leaves existing scores untouched.
inline LinearHead concat_heads(const LinearHead& base, const LinearHead& novel) {
  validate(base);
  validate(novel);
  if (base.d_cls != novel.d_cls) fail(Errc::DimensionMismatch, "heads have different feature dimensions");
  std::unordered_set<uint32_t> seen(base.class_ids.begin(), base.class_ids.end());
  for (uint32_t id : novel.class_ids)
    if (!seen.insert(id).second) fail(Errc::OverlappingClassIds, "class id " + std::to_string(id) + " present in both heads");

  LinearHead unified;
  unified.d_cls = base.d_cls;
  unified.class_ids = base.class_ids;
  unified.class_ids.insert(unified.class_ids.end(), novel.class_ids.begin(), novel.class_ids.end());
  unified.weights = base.weights;
  unified.weights.insert(unified.weights.end(), novel.weights.begin(), novel.weights.end());
  unified.biases = base.biases;
  unified.biases.insert(unified.biases.end(), novel.biases.begin(), novel.biases.end());
  return unified;
}

// Linear map from classification-feature space into embedding space, trained
// to mimic the image embeddings.
struct LinearProjector {
  uint32_t d_cls = 0;
  uint32_t d_emb = 0;
  std::vector<float> weights;  // row-major, d_emb x d_cls
  std::vector<float> biases;   // d_emb

  bool operator==(const LinearProjector&) const = default;
};

inline void validate(const LinearProjector& p) {
  if (p.weights.size() != static_cast<size_t>(p.d_emb) * p.d_cls)
    fail(Errc::DimensionMismatch, "projector matrix shape mismatch");
  if (p.biases.size() != p.d_emb) fail(Errc::DimensionMismatch, "projector bias length mismatch");
}

inline std::vector<double> project(const LinearProjector& p, std::span<const float> f) {
  if (f.size() != p.d_cls) fail(Errc::DimensionMismatch, "feature dimension does not match projector");
  std::vector<double> out(p.d_emb);
  for (size_t i = 0; i < p.d_emb; ++i) {
    const float* w = p.weights.data() + i * p.d_cls;
    double acc = p.biases[i];
    for (size_t j = 0; j < p.d_cls; ++j) acc += static_cast<double>(w[j]) * static_cast<double>(f[j]);
    out[i] = acc;
  }
  return out;
}

}  // namespace ovp
