#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "numerics/tensor.hpp"

namespace tgpt::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class OptimizerState {
 public:
  OptimizerState(std::span<const Tensor> params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_.at(i); }
  const std::vector<double>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  friend void adam_step(std::span<Tensor> params, OptimizerState& state);

  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Bias-corrected Adam update. Every parameter must carry a gradient buffer
// (zero_grad allocates one); otherwise ErrorCode::kMissingGrad.
void adam_step(std::span<Tensor> params, OptimizerState& state);

}  // namespace tgpt::nn
