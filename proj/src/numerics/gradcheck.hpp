#pragma once

#include <functional>
#include <span>
#include <vector>

#include "numerics/tensor.hpp"

namespace tgpt::nn {

using ScalarFn = std::function<Tensor(Graph&, const Tensor&)>;

// Central-difference check of d f / d x. Returns the largest elementwise
// relative error |a - n| / max(|a|, |n|, 1e-8).
double grad_check(const ScalarFn& f, const Tensor& x, double eps);

// Same comparison against parameters a closure reads directly. Checks up to
// `per_tensor` seeded-random entries of each parameter (all when 0); returns
// the worst error per parameter.
std::vector<double> grad_check_params(const std::function<Tensor(Graph&)>& f,
                                      std::span<Tensor> params, double eps,
                                      std::size_t per_tensor, std::uint64_t seed);

}  // namespace tgpt::nn
