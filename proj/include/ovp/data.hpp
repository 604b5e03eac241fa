#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ovp/box.hpp"
#include "ovp/error.hpp"
#include "ovp/head.hpp"

namespace ovp {

enum class Split : uint8_t { Train = 0, Test = 1 };

inline constexpr uint32_t kNoClass = 0xffffffffu;

inline const char* split_name(Split s) { return s == Split::Train ? "train" : "test"; }

struct ImageInfo {
  uint32_t id = 0;
  int width = 0;
  int height = 0;
  Split split = Split::Train;

  bool operator==(const ImageInfo&) const = default;
};

struct ClassInfo {
  uint32_t id = 0;
  std::string name;
  bool novel = false;

  bool operator==(const ClassInfo&) const = default;
};

// One region proposal: box, objectness, frozen classification feature and
// image-crop embedding. Features are immutable inputs to the whole pipeline.
struct ProposalRecord {
  uint32_t image_id = 0;
  BoxXYXY box;
  float objectness = 0.0f;
  std::vector<float> f_cls;
  std::vector<float> e_img;

  bool operator==(const ProposalRecord&) const = default;
};

struct ClassEmbedding {
  uint32_t class_id = 0;
  std::string name;
  std::vector<float> e_text;

  bool operator==(const ClassEmbedding&) const = default;
};

struct GroundTruthBox {
  uint32_t image_id = 0;
  BoxXYXY box;
  uint32_t class_id = 0;

  bool operator==(const GroundTruthBox&) const = default;
};

struct Dataset {
  uint32_t d_cls = 0;
  uint32_t d_emb = 0;
  std::vector<ClassInfo> classes;
  std::vector<ClassEmbedding> text_embeddings;
  std::vector<ImageInfo> images;
  std::vector<ProposalRecord> proposals;
  std::vector<GroundTruthBox> gt_train;
  std::vector<GroundTruthBox> gt_test;

  bool operator==(const Dataset&) const = default;

  const ImageInfo* find_image(uint32_t id) const {
    for (const auto& im : images)
      if (im.id == id) return &im;
    return nullptr;
  }

  const ClassInfo* find_class(uint32_t id) const {
    for (const auto& c : classes)
      if (c.id == id) return &c;
    return nullptr;
  }

  const ClassEmbedding* find_text(uint32_t class_id) const {
    for (const auto& t : text_embeddings)
      if (t.class_id == class_id) return &t;
    return nullptr;
  }

  std::vector<uint32_t> base_class_ids() const {
    std::vector<uint32_t> out;
    for (const auto& c : classes)
      if (!c.novel) out.push_back(c.id);
    return out;
  }

  std::vector<uint32_t> novel_class_ids() const {
    std::vector<uint32_t> out;
    for (const auto& c : classes)
      if (c.novel) out.push_back(c.id);
    return out;
  }

  std::vector<ClassEmbedding> novel_text_embeddings() const {
    std::vector<ClassEmbedding> out;
    for (const auto& c : classes)
      if (c.novel)
        if (const auto* t = find_text(c.id)) out.push_back(*t);
    return out;
  }

  Split proposal_split(const ProposalRecord& p) const {
    const ImageInfo* im = find_image(p.image_id);
    return im ? im->split : Split::Train;
  }
};

template <class T>
inline bool all_finite(const std::vector<T>& v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

// Full referential and dimension validation; every loader and writer runs
// this so that downstream code can assume a consistent dataset.
inline void validate(const Dataset& d) {
  if (d.d_cls == 0 || d.d_emb == 0) fail(Errc::InvalidData, "feature dimensions must be positive");

  std::unordered_set<uint32_t> class_ids;
  std::unordered_set<uint32_t> base_ids;
  std::unordered_set<uint32_t> novel_ids;
  for (const auto& c : d.classes) {
    if (!class_ids.insert(c.id).second) fail(Errc::InvalidData, "duplicate class id " + std::to_string(c.id));
    (c.novel ? novel_ids : base_ids).insert(c.id);
  }
  for (uint32_t id : base_ids)
    if (novel_ids.count(id)) fail(Errc::InvalidData, "class id in both base and novel sets");

  std::unordered_set<uint32_t> image_ids;
  for (const auto& im : d.images)
    if (!image_ids.insert(im.id).second) fail(Errc::InvalidData, "duplicate image id " + std::to_string(im.id));

  for (const auto& t : d.text_embeddings) {
    if (!class_ids.count(t.class_id))
      fail(Errc::DanglingReference, "text embedding for unknown class " + std::to_string(t.class_id));
    if (t.e_text.size() != d.d_emb) fail(Errc::DimensionMismatch, "text embedding length != d_emb");
    if (!all_finite(t.e_text)) fail(Errc::InvalidData, "non-finite text embedding");
    bool nonzero = std::any_of(t.e_text.begin(), t.e_text.end(), [](float x) { return x != 0.0f; });
    if (!nonzero) fail(Errc::InvalidData, "zero text embedding for class " + std::to_string(t.class_id));
  }

  for (const auto& p : d.proposals) {
    if (!image_ids.count(p.image_id))
      fail(Errc::DanglingReference, "proposal references unknown image " + std::to_string(p.image_id));
    if (p.f_cls.size() != d.d_cls) fail(Errc::DimensionMismatch, "f_cls length != d_cls");
    if (p.e_img.size() != d.d_emb) fail(Errc::DimensionMismatch, "e_img length != d_emb");
    if (!all_finite(p.f_cls) || !all_finite(p.e_img)) fail(Errc::InvalidData, "non-finite proposal feature");
    if (!(p.objectness >= 0.0f && p.objectness <= 1.0f)) fail(Errc::InvalidData, "objectness outside [0,1]");
  }

  auto check_gt = [&](const std::vector<GroundTruthBox>& table, bool train) {
    for (const auto& g : table) {
      if (!image_ids.count(g.image_id))
        fail(Errc::DanglingReference, "ground truth references unknown image " + std::to_string(g.image_id));
      if (!class_ids.count(g.class_id))
        fail(Errc::DanglingReference, "ground truth references unknown class " + std::to_string(g.class_id));
      if (train && novel_ids.count(g.class_id))
        fail(Errc::InvalidData, "train split must not annotate novel class " + std::to_string(g.class_id));
    }
  };
  check_gt(d.gt_train, true);
  check_gt(d.gt_test, false);
}

// Head checkpoint: a linear head plus the optional distillation projector.
struct HeadCheckpoint {
  LinearHead head;
  std::optional<LinearProjector> projector;

  bool operator==(const HeadCheckpoint&) const = default;
};

}  // namespace ovp
