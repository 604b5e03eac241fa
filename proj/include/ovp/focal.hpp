#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ovp/error.hpp"

namespace ovp {

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow for large |x|.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

struct FocalLossParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

inline void validate(const FocalLossParams& p) {
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) fail(Errc::RangeError, "alpha must lie in (0,1)");
  if (!(p.gamma >= 0.0)) fail(Errc::RangeError, "gamma must be >= 0");
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logit
};

// Per-class binary focal term, summed over classes:
//   FL = -alpha_t * (1 - p_t)^gamma * log(p_t)
// with p_t = sigmoid(logit) for target 1 and sigmoid(-logit) for target 0.
// The gradient is analytic:
//   d FL / d logit = s * alpha_t * (1 - p_t)^gamma * (gamma * p_t * log(p_t) - (1 - p_t))
// where s = +1 for target 1 and -1 for target 0.
inline LossGrad focal_loss_and_grad(std::span<const double> logits, std::span<const uint8_t> targets,
                                    const FocalLossParams& params) {
  if (logits.size() != targets.size())
    fail(Errc::DimensionMismatch, "logits and targets differ in length");
  validate(params);

  LossGrad out;
  out.grad.resize(logits.size());
  for (size_t c = 0; c < logits.size(); ++c) {
    bool positive = targets[c] != 0;
    double z = positive ? logits[c] : -logits[c];
    double pt = stable_sigmoid(z);
    double log_pt = log_sigmoid(z);
    double one_minus_pt = stable_sigmoid(-z);
    double alpha_t = positive ? params.alpha : 1.0 - params.alpha;
    double focal_weight = std::pow(one_minus_pt, params.gamma);

    out.loss += -alpha_t * focal_weight * log_pt;

    double p_log_p = pt > 0.0 ? pt * log_pt : 0.0;
    double d = alpha_t * focal_weight * (params.gamma * p_log_p - one_minus_pt);
    out.grad[c] = positive ? d : -d;
  }
  return out;
}

}  // namespace ovp
