#include "idecomp/optimizer.hpp"

#include <cmath>

#include "idecomp/error.hpp"

namespace idecomp {

void optimizer_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
                    OptimizerState& state, const OptimizerConfig& config,
                    double learning_rate) {
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer: " + std::to_string(params.size()) +
                     " parameters but " + std::to_string(grads.size()) +
                     " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols()) {
      throw ShapeError("optimizer: gradient shape mismatch at parameter " +
                       std::to_string(i));
    }
  }
  ++state.step;

  if (config.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= learning_rate * grads[i];
    }
    return;
  }

  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const Matrix& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  const double t = double(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * grads[i];
    v = config.beta2 * v + (1.0 - config.beta2) * grads[i].cwiseAbs2();
    params[i].array() -=
        learning_rate * (m.array() / correction1) /
        ((v.array() / correction2).sqrt() + config.epsilon);
  }
}

double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Matrix& g : grads) g *= s;
  }
  return norm;
}

}  // namespace idecomp
