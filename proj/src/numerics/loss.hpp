#pragma once

#include <span>

#include "numerics/tensor.hpp"

namespace tgpt::nn {

// Sum over elements of 0.5 r^2 (|r| <= delta) or delta (|r| - delta/2).
Tensor huber(Graph& g, const Tensor& residual, double delta);

// Sum over interior t and over all trailing elements of
// |p[t+1] - 2 p[t] + p[t-1]|; axis 0 is time. A [T,2] input is one trajectory.
Tensor second_diff_l1(Graph& g, const Tensor& traj);

// logits [C,N] (one column per sample); mean over N of -log softmax[target].
Tensor cross_entropy(Graph& g, const Tensor& logits, std::span<const std::size_t> targets);

}  // namespace tgpt::nn
