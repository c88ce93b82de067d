#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "lacl/numcore/error.hpp"
#include "lacl/numcore/tape.hpp"

namespace lacl {

// Cosine annealing from lr_peak at step 0 to 0 at total_steps, no warmup.
inline double lr_at(std::size_t step, std::size_t total_steps, double lr_peak) {
  if (total_steps == 0) return lr_peak;
  const double frac = static_cast<double>(std::min(step, total_steps)) / static_cast<double>(total_steps);
  return lr_peak * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWMoments {
  Tensor m;
  Tensor v;
};

struct AdamWState {
  std::size_t step = 0;
  std::map<std::string, AdamWMoments> moments;
};

// One decoupled-weight-decay Adam update over every parameter:
//   p <- p (1 - lr wd);  p <- p - lr m_hat / (sqrt(v_hat) + eps)
// Gradients are checked before anything is modified.
inline void adamw_step(ParamStore& params, AdamWState& state, double lr, const AdamWConfig& cfg = {}) {
  for (const auto& [name, p] : params) {
    if (!p.grad.empty() && p.grad.shape() != p.value.shape())
      throw Error("shape-mismatch", "gradient of " + name);
    if (!p.grad.all_finite()) throw Error("gradient-overflow", "non-finite gradient in " + name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params) {
    auto& mom = state.moments[name];
    if (mom.m.empty()) mom = {Tensor::zeros_like(p.value), Tensor::zeros_like(p.value)};
    auto& w = p.value.storage();
    const bool has_grad = !p.grad.empty();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = has_grad ? p.grad[i] : 0.0;
      double& m = mom.m[i];
      double& v = mom.v[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      w[i] *= 1.0 - lr * cfg.weight_decay;
      w[i] -= lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
    }
  }
}

inline void zero_grads(ParamStore& params) {
  for (auto& [name, p] : params) p.zero_grad();
}

}  // namespace lacl
