#include "numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tgpt::nn {
namespace {

double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  Tensor xa = x.detach();
  xa.set_requires_grad(true);
  Graph g;
  Tensor y = f(g, xa);
  g.backward(y);
  std::vector<double> analytic(xa.size(), 0.0);
  if (xa.has_grad()) analytic.assign(xa.grad().begin(), xa.grad().end());

  Tensor probe = x.detach();
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe.mutable_values()[i] = orig + eps;
    Graph gp(false);
    const double fp = f(gp, probe).item();
    probe.mutable_values()[i] = orig - eps;
    Graph gm(false);
    const double fm = f(gm, probe).item();
    probe.mutable_values()[i] = orig;
    worst = std::max(worst, rel_error(analytic[i], (fp - fm) / (2.0 * eps)));
  }
  return worst;
}

std::vector<double> grad_check_params(const std::function<Tensor(Graph&)>& f,
                                      std::span<Tensor> params, double eps,
                                      std::size_t per_tensor, std::uint64_t seed) {
  zero_grad(params);
  {
    Graph g;
    Tensor y = f(g);
    g.backward(y);
  }
  std::mt19937_64 rng(seed);
  std::vector<double> worst(params.size(), 0.0);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params[p];
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (per_tensor != 0 && per_tensor < idx.size()) {
      for (std::size_t i = 0; i < per_tensor; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
        std::swap(idx[i], idx[j]);
      }
      idx.resize(per_tensor);
    }
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i : idx) {
      const double orig = t[i];
      t.mutable_values()[i] = orig + eps;
      Graph gp(false);
      const double fp = f(gp).item();
      t.mutable_values()[i] = orig - eps;
      Graph gm(false);
      const double fm = f(gm).item();
      t.mutable_values()[i] = orig;
      worst[p] = std::max(worst[p], rel_error(analytic[i], (fp - fm) / (2.0 * eps)));
    }
  }
  return worst;
}

}  // namespace tgpt::nn
