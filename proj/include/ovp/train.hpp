#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ovp/data.hpp"
#include "ovp/error.hpp"
#include "ovp/focal.hpp"
#include "ovp/head.hpp"
#include "ovp/rng.hpp"

namespace ovp {

// Plain SGD (no momentum, no weight decay) with linear warmup and step decay.
// Decay epochs are 0-based: entering epoch e the rate is scaled by
// decay_factor once per decay epoch <= e.
struct SgdSchedule {
  double lr = 0.02;
  int epochs = 20;
  std::vector<int> decay_epochs = {16, 19};
  double decay_factor = 0.1;
  int warmup_iters = 500;
  int batch_size = 8;
  uint64_t seed = 0;
};

inline void validate(const SgdSchedule& s) {
  if (!(s.lr > 0.0)) fail(Errc::RangeError, "lr must be positive");
  if (s.epochs <= 0) fail(Errc::RangeError, "epochs must be positive");
  if (s.batch_size <= 0) fail(Errc::RangeError, "batch_size must be positive");
  if (!(s.decay_factor > 0.0)) fail(Errc::RangeError, "decay_factor must be positive");
  if (s.warmup_iters < 0) fail(Errc::RangeError, "warmup_iters must be non-negative");
  for (size_t i = 0; i < s.decay_epochs.size(); ++i) {
    if (s.decay_epochs[i] < 0 || s.decay_epochs[i] >= s.epochs)
      fail(Errc::RangeError, "decay epochs must lie within [0, epochs)");
    if (i > 0 && s.decay_epochs[i] <= s.decay_epochs[i - 1])
      fail(Errc::RangeError, "decay epochs must be strictly increasing");
  }
}

inline double lr_at(const SgdSchedule& s, int epoch, long global_iter) {
  double lr = s.lr;
  if (s.warmup_iters > 0 && global_iter < s.warmup_iters)
    lr *= static_cast<double>(global_iter + 1) / static_cast<double>(s.warmup_iters);
  for (int d : s.decay_epochs)
    if (epoch >= d) lr *= s.decay_factor;
  return lr;
}

// One training example: a proposal index plus either a class target or
// nothing at all. A sample without a target trains against the all-zero
// vector; there is no background class.
struct TrainSample {
  size_t proposal_index = 0;
  std::optional<uint32_t> target;
};

struct TrainLog {
  std::vector<double> epoch_mean_loss;
};

namespace detail {

inline std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  shuffle(order, rng);
  return order;
}

}  // namespace detail

// Mini-batch SGD on frozen classification features. Weights start at zero;
// the per-head objective is convex, so the run is reproducible bit-for-bit
// from (inputs, seed) and needs no momentum at this scale.
inline LinearHead train_classifier_head(const Dataset& dataset, std::span<const TrainSample> samples,
                                        std::span<const uint32_t> class_ids, const FocalLossParams& focal,
                                        const SgdSchedule& schedule, TrainLog* log = nullptr) {
  if (samples.empty()) fail(Errc::EmptySampleSet, "no training samples");
  validate(schedule);
  validate(focal);
  if (class_ids.empty()) fail(Errc::InvalidConfig, "class id list is empty");

  std::unordered_map<uint32_t, size_t> row_of;
  for (size_t i = 0; i < class_ids.size(); ++i)
    if (!row_of.emplace(class_ids[i], i).second) fail(Errc::OverlappingClassIds, "duplicate class id in head");

  for (const auto& s : samples) {
    if (s.proposal_index >= dataset.proposals.size())
      fail(Errc::DanglingReference, "training sample references unknown proposal");
    if (s.target && !row_of.count(*s.target))
      fail(Errc::UnknownClassInTargets, "sample target " + std::to_string(*s.target) + " not in head classes");
  }

  size_t n_classes = class_ids.size();
  size_t d_cls = dataset.d_cls;
  std::vector<double> w(n_classes * d_cls, 0.0);
  std::vector<double> b(n_classes, 0.0);

  std::vector<double> logits(n_classes);
  std::vector<uint8_t> targets(n_classes);

  auto forward = [&](const std::vector<float>& f) {
    for (size_t i = 0; i < n_classes; ++i) {
      const double* wi = w.data() + i * d_cls;
      double acc = b[i];
      for (size_t j = 0; j < d_cls; ++j) acc += wi[j] * static_cast<double>(f[j]);
      logits[i] = acc;
    }
  };
  auto fill_targets = [&](const TrainSample& s) {
    std::fill(targets.begin(), targets.end(), uint8_t{0});
    if (s.target) targets[row_of.at(*s.target)] = 1;
  };

  Rng shuffle_rng(derive_seed(schedule.seed, "shuffle"));
  std::vector<double> gw(n_classes * d_cls);
  std::vector<double> gb(n_classes);
  long iter = 0;

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    auto order = detail::shuffled_indices(samples.size(), shuffle_rng);
    for (size_t start = 0; start < order.size(); start += schedule.batch_size) {
      size_t stop = std::min(order.size(), start + schedule.batch_size);
      double inv_batch = 1.0 / static_cast<double>(stop - start);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);

      for (size_t pos = start; pos < stop; ++pos) {
        const TrainSample& s = samples[order[pos]];
        const auto& f = dataset.proposals[s.proposal_index].f_cls;
        forward(f);
        fill_targets(s);
        LossGrad lg = focal_loss_and_grad(logits, targets, focal);
        for (size_t i = 0; i < n_classes; ++i) {
          double g = lg.grad[i];
          if (g == 0.0) continue;
          double* gwi = gw.data() + i * d_cls;
          for (size_t j = 0; j < d_cls; ++j) gwi[j] += g * static_cast<double>(f[j]);
          gb[i] += g;
        }
      }

      double lr = lr_at(schedule, epoch, iter++);
      double scale = lr * inv_batch;
      for (size_t k = 0; k < w.size(); ++k) w[k] -= scale * gw[k];
      for (size_t i = 0; i < n_classes; ++i) b[i] -= scale * gb[i];
    }

    if (log) {
      double total = 0.0;
      for (const auto& s : samples) {
        forward(dataset.proposals[s.proposal_index].f_cls);
        fill_targets(s);
        total += focal_loss_and_grad(logits, targets, focal).loss;
      }
      log->epoch_mean_loss.push_back(total / static_cast<double>(samples.size()));
    }
  }

  LinearHead head;
  head.class_ids.assign(class_ids.begin(), class_ids.end());
  head.d_cls = static_cast<uint32_t>(d_cls);
  head.weights.resize(w.size());
  for (size_t k = 0; k < w.size(); ++k) head.weights[k] = static_cast<float>(w[k]);
  head.biases.resize(b.size());
  for (size_t i = 0; i < b.size(); ++i) head.biases[i] = static_cast<float>(b[i]);
  return head;
}

// Linear projector from classification features onto image embeddings,
// trained with mean L1 loss; the subgradient at an exact-zero residual is 0.
inline LinearProjector train_distillation_head(const Dataset& dataset, std::span<const size_t> proposal_indices,
                                               const SgdSchedule& schedule, TrainLog* log = nullptr) {
  if (proposal_indices.empty()) fail(Errc::EmptySampleSet, "no proposals for distillation training");
  validate(schedule);
  for (size_t idx : proposal_indices)
    if (idx >= dataset.proposals.size()) fail(Errc::DanglingReference, "distillation sample references unknown proposal");

  size_t d_cls = dataset.d_cls;
  size_t d_emb = dataset.d_emb;
  std::vector<double> w(d_emb * d_cls, 0.0);
  std::vector<double> b(d_emb, 0.0);
  std::vector<double> residual(d_emb);

  auto forward_residual = [&](const ProposalRecord& p) {
    for (size_t i = 0; i < d_emb; ++i) {
      const double* wi = w.data() + i * d_cls;
      double acc = b[i];
      for (size_t j = 0; j < d_cls; ++j) acc += wi[j] * static_cast<double>(p.f_cls[j]);
      residual[i] = acc - static_cast<double>(p.e_img[i]);
    }
  };

  Rng shuffle_rng(derive_seed(schedule.seed, "shuffle"));
  std::vector<double> gw(d_emb * d_cls);
  std::vector<double> gb(d_emb);
  long iter = 0;

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    auto order = detail::shuffled_indices(proposal_indices.size(), shuffle_rng);
    for (size_t start = 0; start < order.size(); start += schedule.batch_size) {
      size_t stop = std::min(order.size(), start + schedule.batch_size);
      double inv_batch = 1.0 / static_cast<double>(stop - start);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);

      for (size_t pos = start; pos < stop; ++pos) {
        const ProposalRecord& p = dataset.proposals[proposal_indices[order[pos]]];
        forward_residual(p);
        for (size_t i = 0; i < d_emb; ++i) {
          double sgn = residual[i] > 0.0 ? 1.0 : (residual[i] < 0.0 ? -1.0 : 0.0);
          if (sgn == 0.0) continue;
          double* gwi = gw.data() + i * d_cls;
          for (size_t j = 0; j < d_cls; ++j) gwi[j] += sgn * static_cast<double>(p.f_cls[j]);
          gb[i] += sgn;
        }
      }

      double lr = lr_at(schedule, epoch, iter++);
      double scale = lr * inv_batch;
      for (size_t k = 0; k < w.size(); ++k) w[k] -= scale * gw[k];
      for (size_t i = 0; i < d_emb; ++i) b[i] -= scale * gb[i];
    }

    if (log) {
      double total = 0.0;
      for (size_t idx : proposal_indices) {
        forward_residual(dataset.proposals[idx]);
        for (double r : residual) total += std::abs(r);
      }
      log->epoch_mean_loss.push_back(total / static_cast<double>(proposal_indices.size()));
    }
  }

  LinearProjector proj;
  proj.d_cls = static_cast<uint32_t>(d_cls);
  proj.d_emb = static_cast<uint32_t>(d_emb);
  proj.weights.resize(w.size());
  for (size_t k = 0; k < w.size(); ++k) proj.weights[k] = static_cast<float>(w[k]);
  proj.biases.resize(b.size());
  for (size_t i = 0; i < b.size(); ++i) proj.biases[i] = static_cast<float>(b[i]);
  return proj;
}

}  // namespace ovp
