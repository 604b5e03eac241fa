#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ovp/data.hpp"
#include "ovp/error.hpp"
#include "ovp/rng.hpp"

namespace ovp {

// Knobs for the synthetic benchmark. The construction gives each class one
// prototype per feature space; image-crop embeddings cluster around the
// prototype regardless of box quality, while classification features scale
// with the proposal's IoU to its source object. Objectness tracks box quality
// only loosely. Three planted nuisance populations make the score fusion
// measurable rather than vacuous:
//   - loose boxes: over-covered boxes around a real object. The crop still
//     shows the object, so the image embedding stays near the class prototype
//     and objectness stays high, but the IoU and the classification feature
//     are poor. Similarity-only scoring cannot demote them;
//   - ghost proposals: background boxes with object-strength classification
//     features but near-zero objectness. Only the objectness factor can
//     demote them;
//   - retrieval decoys: a handful of train proposals over base objects whose
//     image embedding is pulled onto a novel class's text embedding, so very
//     small retrieval depths pick up mostly wrong pseudo boxes.
struct SynthConfig {
  int n_base = 5;
  int n_novel = 3;
  int n_train_images = 200;
  int n_test_images = 100;
  int objects_per_image = 3;
  int proposals_per_object = 6;
  double low_quality_fraction = 0.3;
  int loose_per_object = 2;
  int ghosts_per_image = 2;
  int decoys_per_novel_class = 5;
  uint32_t d_cls = 32;
  uint32_t d_emb = 16;
  double feature_scale = 3.0;  // classification-feature prototype magnitude
  double sigma_cls = 0.06;
  double sigma_emb = 0.08;
  double sigma_text = 0.02;
  double objectness_noise = 0.12;
  int image_width = 640;
  int image_height = 640;
};

inline void validate(const SynthConfig& c) {
  auto positive = [](long v) { return v > 0; };
  if (!positive(c.n_base) || !positive(c.n_novel) || !positive(c.n_train_images) ||
      !positive(c.n_test_images) || !positive(c.objects_per_image) || !positive(c.proposals_per_object) ||
      !positive(c.d_cls) || !positive(c.d_emb) || !positive(c.image_width) || !positive(c.image_height))
    fail(Errc::InvalidConfig, "synthetic counts and dimensions must be positive");
  if (c.ghosts_per_image < 0 || c.decoys_per_novel_class < 0 || c.loose_per_object < 0)
    fail(Errc::InvalidConfig, "loose, ghost and decoy counts must be non-negative");
  if (!(c.low_quality_fraction >= 0.0 && c.low_quality_fraction <= 1.0))
    fail(Errc::InvalidConfig, "low_quality_fraction must lie in [0,1]");
  if (!(c.sigma_cls >= 0.0 && c.sigma_emb >= 0.0 && c.sigma_text >= 0.0 && c.objectness_noise >= 0.0))
    fail(Errc::InvalidConfig, "noise levels must be non-negative");
  if (!(c.feature_scale > 0.0)) fail(Errc::InvalidConfig, "feature_scale must be positive");
  uint32_t n_classes = static_cast<uint32_t>(c.n_base + c.n_novel);
  if (c.d_cls < n_classes || c.d_emb < n_classes)
    fail(Errc::InvalidConfig, "feature dimensions must be at least n_base + n_novel");
  if (c.objects_per_image > 9)
    fail(Errc::InvalidConfig, "objects_per_image exceeds the 3x3 placement grid");
}

// Where a generated proposal came from; not part of the on-disk dataset, used
// by tests and diagnostics that need the underlying truth.
struct ProposalProvenance {
  int64_t source_object = -1;  // running object index, -1 for ghost proposals
  uint32_t true_class = kNoClass;
  double quality = 0.0;  // IoU of the proposal box to its object box
  bool loose = false;
  bool ghost = false;
  bool decoy = false;
  uint32_t decoy_for_class = kNoClass;
};

struct SyntheticDataset {
  Dataset data;
  std::vector<ProposalProvenance> provenance;
};

namespace detail {

inline std::vector<std::vector<double>> orthonormal_prototypes(size_t n, size_t dim, Rng& rng) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
  for (auto& row : rows)
    for (auto& v : row) v = rng.normal();
  // Gram-Schmidt; dim >= n is validated so degeneracy cannot occur in practice.
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < i; ++j) {
      double dot = 0.0;
      for (size_t k = 0; k < dim; ++k) dot += rows[i][k] * rows[j][k];
      for (size_t k = 0; k < dim; ++k) rows[i][k] -= dot * rows[j][k];
    }
    double norm = 0.0;
    for (double v : rows[i]) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-9) fail(Errc::InvalidConfig, "degenerate prototype basis");
    for (auto& v : rows[i]) v /= norm;
  }
  return rows;
}

inline std::vector<float> noisy_copy(const std::vector<double>& mean, double scale, double sigma, Rng& rng) {
  std::vector<float> out(mean.size());
  for (size_t i = 0; i < mean.size(); ++i)
    out[i] = static_cast<float>(scale * mean[i] + sigma * rng.normal());
  return out;
}

inline std::vector<float> random_unit(size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12) norm = 1.0;
  std::vector<float> out(dim);
  for (size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const SynthConfig& cfg, uint64_t seed) {
  validate(cfg);
  Rng rng(derive_seed(seed, "synth"));

  size_t n_classes = static_cast<size_t>(cfg.n_base + cfg.n_novel);
  auto proto_cls = detail::orthonormal_prototypes(n_classes, cfg.d_cls, rng);
  auto proto_emb = detail::orthonormal_prototypes(n_classes, cfg.d_emb, rng);

  SyntheticDataset out;
  Dataset& d = out.data;
  d.d_cls = cfg.d_cls;
  d.d_emb = cfg.d_emb;

  for (size_t c = 0; c < n_classes; ++c) {
    bool novel = c >= static_cast<size_t>(cfg.n_base);
    std::string name = (novel ? "novel_" : "base_") + std::to_string(novel ? c - cfg.n_base : c);
    d.classes.push_back({static_cast<uint32_t>(c), name, novel});
    ClassEmbedding t;
    t.class_id = static_cast<uint32_t>(c);
    t.name = name;
    t.e_text = detail::noisy_copy(proto_emb[c], 1.0, cfg.sigma_text, rng);
    d.text_embeddings.push_back(std::move(t));
  }

  double cell_w = static_cast<double>(cfg.image_width) / 3.0;
  double cell_h = static_cast<double>(cfg.image_height) / 3.0;

  int64_t object_counter = 0;
  uint32_t image_id = 0;
  size_t class_cursor_train = 0;
  size_t class_cursor_test = 0;

  auto make_split = [&](Split split, int n_images) {
    size_t& class_cursor = split == Split::Train ? class_cursor_train : class_cursor_test;
    for (int img = 0; img < n_images; ++img, ++image_id) {
      d.images.push_back({image_id, cfg.image_width, cfg.image_height, split});

      std::vector<int> cells(9);
      for (int i = 0; i < 9; ++i) cells[i] = i;
      shuffle(cells, rng);

      for (int obj = 0; obj < cfg.objects_per_image; ++obj) {
        // Classes cycle through the registry so every class appears in both
        // splits; novel objects in the train split simply carry no annotation.
        uint32_t cls = static_cast<uint32_t>(class_cursor++ % n_classes);
        int cell = cells[obj];
        double cx = (cell % 3) * cell_w;
        double cy = (cell / 3) * cell_h;
        double w = rng.uniform(0.38, 0.80) * cell_w;
        double h = rng.uniform(0.38, 0.80) * cell_h;
        double x1 = cx + rng.uniform(0.0, cell_w - w);
        double y1 = cy + rng.uniform(0.0, cell_h - h);
        BoxXYXY gt_box(static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(x1 + w),
                       static_cast<float>(y1 + h));

        if (split == Split::Test || cls < static_cast<uint32_t>(cfg.n_base))
          (split == Split::Train ? d.gt_train : d.gt_test).push_back({image_id, gt_box, cls});

        int64_t object_id = object_counter++;
        for (int k = 0; k < cfg.proposals_per_object; ++k) {
          bool low = rng.uniform() < cfg.low_quality_fraction;
          double q = low ? rng.uniform(0.15, 0.45) : rng.uniform(0.75, 0.95);
          // Horizontal shift chosen so the proposal's IoU to its object is
          // exactly q: shift = w * (1 - q) / (1 + q).
          double shift = w * (1.0 - q) / (1.0 + q);
          if (rng.uniform() < 0.5) shift = -shift;

          ProposalRecord p;
          p.image_id = image_id;
          p.box = BoxXYXY(static_cast<float>(x1 + shift), gt_box.y1, static_cast<float>(x1 + w + shift),
                          gt_box.y2);
          // Objectness is a real but band-limited quality signal: low-quality
          // boxes stay under the usual retrieval threshold while the bands
          // overlap enough that ranking by objectness alone is unreliable.
          double lo = low ? 0.30 : 0.45;
          double hi = low ? 0.58 : 0.95;
          double o = rng.uniform(lo, hi) + cfg.objectness_noise * rng.normal();
          p.objectness = static_cast<float>(std::clamp(o, lo, hi));
          p.f_cls = detail::noisy_copy(proto_cls[cls], q * cfg.feature_scale, cfg.sigma_cls, rng);
          p.e_img = detail::noisy_copy(proto_emb[cls], 1.0, cfg.sigma_emb, rng);
          d.proposals.push_back(std::move(p));
          out.provenance.push_back({object_id, cls, q, false, false, false, kNoClass});
        }

        // Loose boxes: the object centered inside a much larger crop. The
        // embedding still matches the class and the proposal network still
        // sees an object, but IoU = 1/scale^2 and the feature is weak.
        for (int k = 0; k < cfg.loose_per_object; ++k) {
          double scale = rng.uniform(2.2, 3.0);
          double q = 1.0 / (scale * scale);
          double cx = x1 + w / 2.0, cy = y1 + h / 2.0;
          double lw = w * scale, lh = h * scale;

          ProposalRecord p;
          p.image_id = image_id;
          p.box = BoxXYXY(static_cast<float>(cx - lw / 2.0), static_cast<float>(cy - lh / 2.0),
                          static_cast<float>(cx + lw / 2.0), static_cast<float>(cy + lh / 2.0));
          p.objectness = static_cast<float>(rng.uniform(0.45, 0.95));
          p.f_cls = detail::noisy_copy(proto_cls[cls], q * cfg.feature_scale, cfg.sigma_cls, rng);
          // background dilution: still clearly the right class, but a notch
          // below tight crops in cosine order
          p.e_img = detail::noisy_copy(proto_emb[cls], 0.7, cfg.sigma_emb, rng);
          d.proposals.push_back(std::move(p));
          out.provenance.push_back({object_id, cls, q, true, false, false, kNoClass});
        }
      }

      // Ghost proposals: background boxes whose classification feature looks
      // like a full-strength object while the proposal network scores them
      // near zero. Only objectness can demote them at inference time.
      for (int g = 0; g < cfg.ghosts_per_image; ++g) {
        double w = rng.uniform(0.30, 0.75) * cell_w;
        double h = rng.uniform(0.30, 0.75) * cell_h;
        double x1 = rng.uniform(0.0, cfg.image_width - w);
        double y1 = rng.uniform(0.0, cfg.image_height - h);
        uint32_t cls = static_cast<uint32_t>(rng.index(n_classes));
        double strength = rng.uniform(0.70, 0.95);

        ProposalRecord p;
        p.image_id = image_id;
        p.box = BoxXYXY(static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(x1 + w),
                        static_cast<float>(y1 + h));
        p.objectness = static_cast<float>(rng.uniform(0.05, 0.30));
        p.f_cls = detail::noisy_copy(proto_cls[cls], strength * cfg.feature_scale, cfg.sigma_cls, rng);
        p.e_img = detail::random_unit(cfg.d_emb, rng);
        d.proposals.push_back(std::move(p));
        out.provenance.push_back({-1, kNoClass, 0.0, false, true, false, kNoClass});
      }
    }
  };

  make_split(Split::Train, cfg.n_train_images);
  make_split(Split::Test, cfg.n_test_images);

  // Retrieval decoys: good train proposals over base objects re-embedded next
  // to a novel class's text prototype. They sit above every genuine proposal
  // in cosine order, so shallow retrieval returns mostly decoys.
  if (cfg.decoys_per_novel_class > 0) {
    std::vector<size_t> candidates;
    for (size_t i = 0; i < d.proposals.size(); ++i) {
      const auto& prov = out.provenance[i];
      if (prov.ghost || prov.decoy) continue;
      if (prov.true_class >= static_cast<uint32_t>(cfg.n_base)) continue;
      if (prov.quality < 0.75) continue;
      if (d.proposal_split(d.proposals[i]) != Split::Train) continue;
      candidates.push_back(i);
    }
    shuffle(candidates, rng);
    size_t need = static_cast<size_t>(cfg.decoys_per_novel_class) * cfg.n_novel;
    if (candidates.size() < need)
      fail(Errc::InvalidConfig, "not enough base-object proposals to plant retrieval decoys");
    size_t cursor = 0;
    for (int c = 0; c < cfg.n_novel; ++c) {
      uint32_t novel_id = static_cast<uint32_t>(cfg.n_base + c);
      for (int k = 0; k < cfg.decoys_per_novel_class; ++k) {
        size_t idx = candidates[cursor++];
        d.proposals[idx].e_img = detail::noisy_copy(proto_emb[novel_id], 1.0, 0.01, rng);
        d.proposals[idx].objectness = static_cast<float>(rng.uniform(0.82, 0.95));
        out.provenance[idx].decoy = true;
        out.provenance[idx].decoy_for_class = novel_id;
      }
    }
  }

  validate(d);
  return out;
}

}  // namespace ovp
