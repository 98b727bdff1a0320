#pragma once

#include <cmath>
#include <vector>

#include "racelab/nn/mat.hpp"

namespace racelab::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates, one pair of buffers per parameter tensor.
struct AdamState {
  std::vector<Vec> m;
  std::vector<Vec> v;
  long long t = 0;

  void init(const std::vector<Param*>& params) {
    m.clear();
    v.clear();
    for (const Param* p : params) {
      m.emplace_back(p->size(), 0.0);
      v.emplace_back(p->size(), 0.0);
    }
    t = 0;
  }
};

// One bias-corrected Adam update from the accumulated gradients.
inline void adam_step(const std::vector<Param*>& params, AdamState& state,
                      const AdamConfig& cfg) {
  require(state.m.size() == params.size(), "adam: state/params mismatch");
  state.t += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    Vec& m = state.m[k];
    Vec& v = state.v[k];
    require(m.size() == p.size(), "adam: shape drift for " + p.name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      double g = p.g[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p.w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace racelab::nn
