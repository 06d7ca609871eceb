#include "grad_cases.hpp"

#include <cmath>

#include "numerics/loss.hpp"
#include "numerics/ops.hpp"
#include "numerics/params.hpp"

namespace tgpt::testing {

using nn::Graph;
using nn::Tensor;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * nn::unit_uniform(rng);
}

Tensor random_tensor(std::mt19937_64& rng, nn::Shape shape, double lo, double hi) {
  std::vector<double> v(nn::numel(shape));
  for (double& x : v) x = uniform(rng, lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

namespace {

// Fixed non-uniform readout so every output element gets a distinct weight.
Tensor readout(Graph& g, const Tensor& y) {
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.7 * static_cast<double>(i) + 0.3) + 0.25;
  return nn::sum(g, nn::mul(g, y, Tensor::from(y.shape(), std::move(w))));
}

Tensor constant(std::uint64_t seed, nn::Shape shape, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  return random_tensor(rng, std::move(shape), lo, hi);
}

// Values with magnitude in [lo, hi] and random sign.
Tensor away_from_zero(std::mt19937_64& rng, nn::Shape shape, double lo, double hi) {
  Tensor t = random_tensor(rng, std::move(shape), lo, hi);
  for (double& v : t.mutable_values())
    if (nn::unit_uniform(rng) < 0.5) v = -v;
  return t;
}

// Grid coordinates whose fractional part stays in [0.15, 0.85].
Tensor off_edge_coords(std::mt19937_64& rng, std::size_t m, double max_x, double max_y) {
  std::vector<double> v;
  for (std::size_t i = 0; i < m; ++i) {
    v.push_back(std::floor(uniform(rng, 0, max_x)) + uniform(rng, 0.15, 0.85));
    v.push_back(std::floor(uniform(rng, 0, max_y)) + uniform(rng, 0.15, 0.85));
  }
  return Tensor::from({m, 2}, std::move(v));
}

GradCase simple(std::string name, nn::Shape shape, std::function<Tensor(Graph&, const Tensor&)> op) {
  return {std::move(name), [shape](std::mt19937_64& rng) { return random_tensor(rng, shape); },
          [op](Graph& g, const Tensor& x) { return readout(g, op(g, x)); }};
}

}  // namespace

std::vector<GradCase> grad_cases() {
  std::vector<GradCase> c;
  const Tensor b42 = constant(11, {4, 2});
  const Tensor a34 = constant(12, {3, 4});
  const Tensor row4 = constant(13, {4});
  const Tensor m34 = constant(14, {3, 4});

  c.push_back(simple("matmul.lhs", {3, 4}, [=](Graph& g, const Tensor& x) { return nn::matmul(g, x, b42); }));
  c.push_back(simple("matmul.rhs", {4, 2}, [=](Graph& g, const Tensor& x) { return nn::matmul(g, a34, x); }));
  c.push_back(simple("transpose", {3, 5}, [](Graph& g, const Tensor& x) { return nn::transpose(g, x); }));
  c.push_back(simple("add.broadcast_lhs", {3, 4}, [=](Graph& g, const Tensor& x) { return nn::add(g, x, row4); }));
  c.push_back(simple("add.broadcast_rhs", {4}, [=](Graph& g, const Tensor& x) { return nn::add(g, m34, x); }));
  c.push_back(simple("sub.lhs", {3, 4}, [=](Graph& g, const Tensor& x) { return nn::sub(g, x, m34); }));
  c.push_back(simple("sub.broadcast_rhs", {4}, [=](Graph& g, const Tensor& x) { return nn::sub(g, m34, x); }));
  c.push_back(simple("mul.both", {3, 4}, [](Graph& g, const Tensor& x) { return nn::mul(g, x, x); }));
  c.push_back(simple("mul.broadcast_rhs", {4}, [=](Graph& g, const Tensor& x) { return nn::mul(g, m34, x); }));
  c.push_back(simple("scalar_mul", {2, 3}, [](Graph& g, const Tensor& x) { return nn::scalar_mul(g, x, -2.5); }));
  c.push_back(simple("add_scalar", {2, 3}, [](Graph& g, const Tensor& x) {
    return nn::mul(g, nn::add_scalar(g, x, 0.7), x);
  }));
  c.push_back(simple("concat.axis0", {2, 4}, [=](Graph& g, const Tensor& x) { return nn::concat(g, {x, m34, x}, 0); }));
  c.push_back(simple("concat.axis1", {3, 2}, [=](Graph& g, const Tensor& x) { return nn::concat(g, {m34, x}, 1); }));
  c.push_back(simple("reshape", {2, 6}, [](Graph& g, const Tensor& x) {
    return nn::mul(g, nn::reshape(g, x, {3, 4}), nn::reshape(g, x, {3, 4}));
  }));
  c.push_back(simple("gather_rows", {4, 3}, [](Graph& g, const Tensor& x) {
    const std::vector<std::size_t> rows = {2, 0, 2, 3};
    return nn::gather_rows(g, x, rows);
  }));
  c.push_back(simple("sum", {3, 3}, [](Graph& g, const Tensor& x) { return nn::sum(g, nn::mul(g, x, x)); }));
  c.push_back(simple("mean", {3, 3}, [](Graph& g, const Tensor& x) { return nn::mean(g, nn::mul(g, x, x)); }));
  c.push_back(simple("sum_last", {2, 3, 4}, [](Graph& g, const Tensor& x) { return nn::sum_last(g, nn::mul(g, x, x)); }));
  c.push_back({"relu", [](std::mt19937_64& rng) { return away_from_zero(rng, {3, 4}, 0.1, 1.0); },
               [](Graph& g, const Tensor& x) { return readout(g, nn::relu(g, x)); }});
  c.push_back(simple("softmax.axis0", {4, 3}, [](Graph& g, const Tensor& x) { return nn::softmax(g, x, 0); }));
  c.push_back(simple("softmax.axis1", {3, 5}, [](Graph& g, const Tensor& x) { return nn::softmax(g, x, 1); }));
  c.push_back(simple("layer_norm.axis1", {3, 6}, [](Graph& g, const Tensor& x) { return nn::layer_norm(g, x, 1); }));
  c.push_back(simple("layer_norm.axis0", {5, 2}, [](Graph& g, const Tensor& x) { return nn::layer_norm(g, x, 0); }));
  c.push_back(simple("l2_normalize", {3, 4}, [](Graph& g, const Tensor& x) { return nn::l2_normalize(g, x); }));
  {
    const Tensor w = constant(15, {5, 4}), b = constant(16, {5}), x = constant(17, {3, 4});
    c.push_back(simple("linear.x", {3, 4}, [=](Graph& g, const Tensor& t) { return nn::linear(g, t, w, b); }));
    c.push_back(simple("linear.w", {5, 4}, [=](Graph& g, const Tensor& t) { return nn::linear(g, x, t, b); }));
    c.push_back(simple("linear.b", {5}, [=](Graph& g, const Tensor& t) { return nn::linear(g, x, w, t); }));
    c.push_back(simple("linear.nobias", {2, 3, 4}, [=](Graph& g, const Tensor& t) { return nn::linear(g, t, w, Tensor()); }));
  }
  {
    const Tensor grid = constant(18, {4, 5, 3});
    c.push_back({"bilinear_sample.xy", [](std::mt19937_64& rng) { return off_edge_coords(rng, 3, 4, 3); },
                 [=](Graph& g, const Tensor& xy) { return readout(g, nn::bilinear_sample(g, grid, xy)); }});
    std::mt19937_64 r(19);
    const Tensor xy = off_edge_coords(r, 4, 4, 3);
    c.push_back(simple("bilinear_sample.grid", {4, 5, 3},
                       [=](Graph& g, const Tensor& t) { return nn::bilinear_sample(g, t, xy); }));
    const Tensor grids = constant(20, {2, 4, 5, 3});
    c.push_back({"bilinear_sample.batched_xy",
                 [](std::mt19937_64& rng) {
                   Tensor a = off_edge_coords(rng, 6, 4, 3);
                   return Tensor::from({2, 3, 2}, std::vector<double>(a.values().begin(), a.values().end()));
                 },
                 [=](Graph& g, const Tensor& t) { return readout(g, nn::bilinear_sample(g, grids, t)); }});
  }
  {
    const Tensor vals = constant(21, {2, 4, 3}), wts = constant(22, {2, 4});
    c.push_back(simple("weighted_sum.weights", {2, 4}, [=](Graph& g, const Tensor& t) { return nn::weighted_sum(g, t, vals); }));
    c.push_back(simple("weighted_sum.values", {2, 4, 3}, [=](Graph& g, const Tensor& t) { return nn::weighted_sum(g, wts, t); }));
  }
  {
    const Tensor w = constant(23, {2, 3, 4}), x = constant(24, {3, 2, 4});
    c.push_back(simple("grouped_linear.x", {3, 2, 4}, [=](Graph& g, const Tensor& t) { return nn::grouped_linear(g, t, w); }));
    c.push_back(simple("grouped_linear.w", {2, 3, 4}, [=](Graph& g, const Tensor& t) { return nn::grouped_linear(g, x, t); }));
  }
  c.push_back(simple("avg_pool2x2", {4, 6, 2}, [](Graph& g, const Tensor& x) { return nn::avg_pool2x2(g, x); }));
  c.push_back({"huber",
               [](std::mt19937_64& rng) {
                 // Both regimes, never within 0.05 of the kink at |r| = 1.
                 Tensor t = away_from_zero(rng, {6}, 0.0, 0.95);
                 for (std::size_t i = 0; i < 3; ++i) {
                   double& v = t.mutable_values()[i];
                   v = (v < 0 ? -1 : 1) * (1.05 + 2 * std::abs(v));
                 }
                 return t;
               },
               [](Graph& g, const Tensor& x) { return nn::huber(g, x, 1.0); }});
  // Piecewise linear: on a 1/64 grid with a power-of-two step every
  // difference is exact, so zero gradients come out exactly zero.
  c.push_back({"second_diff_l1",
               [](std::mt19937_64& rng) {
                 // Per column: two free points, then accelerations of magnitude
                 // >= 0.1875 so no second difference sits on the |.| kink.
                 auto grid = [](double v) { return std::round(v * 64.0) / 64.0; };
                 const std::size_t t_len = 5;
                 std::vector<double> v(2 * t_len);
                 const Tensor acc = away_from_zero(rng, {2 * t_len}, 0.2, 1.0);
                 for (std::size_t col = 0; col < 2; ++col) {
                   v[col] = grid(uniform(rng, -1, 1));
                   v[2 + col] = grid(uniform(rng, -1, 1));
                   for (std::size_t t = 2; t < t_len; ++t) {
                     v[2 * t + col] = grid(acc[2 * t + col]) + 2 * v[2 * (t - 1) + col] - v[2 * (t - 2) + col];
                   }
                 }
                 return Tensor::from({t_len, 2}, std::move(v));
               },
               [](Graph& g, const Tensor& x) { return nn::second_diff_l1(g, x); }, 0x1p-10});
  c.push_back({"cross_entropy", [](std::mt19937_64& rng) { return random_tensor(rng, {7, 3}, -2, 2); },
               [](Graph& g, const Tensor& x) {
                 const std::vector<std::size_t> targets = {0, 6, 3};
                 return nn::cross_entropy(g, x, targets);
               }});
  return c;
}

}  // namespace tgpt::testing
