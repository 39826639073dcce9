#pragma once

#include <cstdint>
#include <vector>

#include "idecomp/autodiff.hpp"

namespace idecomp {

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
};

/// sgd: p -= lr * g.
/// adam: bias-corrected moments, p -= lr * m_hat / (sqrt(v_hat) + eps).
/// `learning_rate` overrides config.learning_rate (schedules).
void optimizer_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
                    OptimizerState& state, const OptimizerConfig& config,
                    double learning_rate);

inline void optimizer_step(std::vector<Matrix>& params,
                           const std::vector<Matrix>& grads,
                           OptimizerState& state, const OptimizerConfig& config) {
  optimizer_step(params, grads, state, config, config.learning_rate);
}

/// Scales grads in place so that their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::vector<Matrix>& grads, double max_norm);

}  // namespace idecomp
