#include "numerics/optim.hpp"

#include <cmath>

namespace tgpt::nn {

OptimizerState::OptimizerState(std::span<const Tensor> params, AdamConfig config)
    : config_(config) {
  for (const Tensor& p : params) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void adam_step(std::span<Tensor> params, OptimizerState& state) {
  if (params.size() != state.m_.size()) {
    fail(ErrorCode::kShapeMismatch, "optimizer state tracks " + std::to_string(state.m_.size()) +
                                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      fail(ErrorCode::kMissingGrad, "parameter " + std::to_string(i) + " has no gradient");
    }
    if (params[i].size() != state.m_[i].size()) {
      fail(ErrorCode::kShapeMismatch, "moment size mismatch for parameter " + std::to_string(i));
    }
  }
  const AdamConfig& c = state.config_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    auto grad = params[i].grad();
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double gk = grad[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      values[k] -= c.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + c.eps);
    }
  }
}

}  // namespace tgpt::nn
