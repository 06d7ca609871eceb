#pragma once

#include <span>
#include <vector>

#include "numerics/tensor.hpp"

// Differentiable operations. Every op records itself on the graph it is given
// (when recording and when an input requires gradients) and raises
// ErrorCode::kShapeMismatch naming both shapes when its inputs disagree.
namespace tgpt::nn {

// [M,K] x [K,N] -> [M,N]
Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);
// 2-D transpose
Tensor transpose(Graph& g, const Tensor& a);

// Elementwise with right-aligned broadcasting (extent-1 axes stretch).
Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);

Tensor scalar_mul(Graph& g, const Tensor& a, double s);
Tensor add_scalar(Graph& g, const Tensor& a, double s);

Tensor concat(Graph& g, const std::vector<Tensor>& parts, std::size_t axis);
Tensor reshape(Graph& g, const Tensor& a, Shape shape);
// Rows along axis 0.
Tensor gather_rows(Graph& g, const Tensor& a, std::span<const std::size_t> rows);

Tensor sum(Graph& g, const Tensor& a);
Tensor mean(Graph& g, const Tensor& a);
// Reduces the last axis: [..., C] -> [...]
Tensor sum_last(Graph& g, const Tensor& a);

Tensor relu(Graph& g, const Tensor& a);
Tensor softmax(Graph& g, const Tensor& a, std::size_t axis);
// Zero-mean, unit-variance along `axis` (no affine terms).
Tensor layer_norm(Graph& g, const Tensor& a, std::size_t axis, double eps = 1e-5);
// Unit L2 norm along the last axis; rows with norm below eps are divided by eps.
Tensor l2_normalize(Graph& g, const Tensor& a, double eps = 1e-12);

// x [..., in], W [out, in], b [out] or undefined -> [..., out]
Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b);

// Border-clamped bilinear interpolation. Grid coordinates put cell (i, j) at
// x = j, y = i; out-of-range coordinates are clamped and get zero gradient.
//   grid [H,W,C],   xy [M,2]   -> [M,C]
//   grid [B,H,W,C], xy [B,M,2] -> [B,M,C]
Tensor bilinear_sample(Graph& g, const Tensor& grid, const Tensor& xy);

// weights [..., M], values [..., M, C] -> [..., C]
Tensor weighted_sum(Graph& g, const Tensor& weights, const Tensor& values);
// x [N,G,C], w [G,D,C] -> [N,G,D]; one independent linear map per group.
Tensor grouped_linear(Graph& g, const Tensor& x, const Tensor& w);
// [H,W,C] -> [H/2,W/2,C]
Tensor avg_pool2x2(Graph& g, const Tensor& grid);

}  // namespace tgpt::nn
