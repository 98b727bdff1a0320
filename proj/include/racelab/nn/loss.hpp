#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "racelab/nn/mat.hpp"

namespace racelab::nn {

inline constexpr double kProbClampEps = 1e-12;

struct LossConfig {
  // Inverse-frequency weights for the 7 buggy vs 9 valid rule-table cases.
  double class_weight_buggy = 16.0 / 14.0;
  double class_weight_valid = 16.0 / 18.0;
  double l2_lambda = 0.0;

  void validate() const {
    if (class_weight_buggy <= 0.0 || class_weight_valid <= 0.0) {
      throw std::invalid_argument("class weights must be > 0");
    }
    if (l2_lambda < 0.0) throw std::invalid_argument("l2_lambda must be >= 0");
  }

  double weight_for(bool buggy) const {
    return buggy ? class_weight_buggy : class_weight_valid;
  }
};

// Counts how often a prediction had to be clamped away from 0 or 1.
struct LossDiagnostics {
  long long clamped = 0;
};

inline double clamp_prob(double p, LossDiagnostics* diag = nullptr) {
  if (p < kProbClampEps) {
    if (diag) diag->clamped += 1;
    return kProbClampEps;
  }
  if (p > 1.0 - kProbClampEps) {
    if (diag) diag->clamped += 1;
    return 1.0 - kProbClampEps;
  }
  return p;
}

inline double l2_penalty(const std::vector<Param*>& params, double lambda) {
  if (lambda == 0.0) return 0.0;
  double sq = 0.0;
  for (const Param* p : params) {
    if (!p->regularizable) continue;
    for (double v : p->w) sq += v * v;
  }
  return lambda * sq;
}

// Adds d(lambda * ||W||^2)/dW = 2 * lambda * W to the gradients of the
// regularizable parameters.
inline void add_l2_gradient(const std::vector<Param*>& params, double lambda) {
  if (lambda == 0.0) return;
  for (Param* p : params) {
    if (!p->regularizable) continue;
    for (std::size_t i = 0; i < p->w.size(); ++i) p->g[i] += 2.0 * lambda * p->w[i];
  }
}

// Mean over the batch of -w(y) * [y log p + (1-y) log(1-p)], plus the L2
// penalty when parameters are supplied.
inline double weighted_bce(const std::vector<double>& predictions,
                           const std::vector<bool>& labels,
                           const LossConfig& cfg,
                           const std::vector<Param*>& params = {},
                           LossDiagnostics* diag = nullptr) {
  cfg.validate();
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("weighted_bce: size mismatch");
  }
  if (predictions.empty()) return l2_penalty(params, cfg.l2_lambda);
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double p = clamp_prob(predictions[i], diag);
    double w = cfg.weight_for(labels[i]);
    total += -w * (labels[i] ? std::log(p) : std::log(1.0 - p));
  }
  return total / static_cast<double>(predictions.size()) +
         l2_penalty(params, cfg.l2_lambda);
}

// dLoss/dp for one sample of a batch of size `batch_n` (mean reduction).
inline double weighted_bce_dp(double p, bool label, const LossConfig& cfg,
                              int batch_n, LossDiagnostics* diag = nullptr) {
  double pc = clamp_prob(p, diag);
  double w = cfg.weight_for(label);
  double d = label ? -1.0 / pc : 1.0 / (1.0 - pc);
  return w * d / static_cast<double>(batch_n);
}

}  // namespace racelab::nn
