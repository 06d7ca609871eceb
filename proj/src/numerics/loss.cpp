#include "numerics/loss.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tgpt::nn {
namespace {

double* gbuf(TensorImpl& t) {
  if (!t.requires_grad) return nullptr;
  if (t.grad.empty()) t.grad.assign(t.values.size(), 0.0);
  return t.grad.data();
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Tensor huber(Graph& g, const Tensor& residual, double delta) {
  if (!(delta > 0.0)) {
    fail(ErrorCode::kNonPositiveDelta, "huber delta must be positive, got " + std::to_string(delta));
  }
  double acc = 0.0;
  for (double r : residual.values()) {
    const double a = std::abs(r);
    acc += a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
  }
  auto R = residual.handle();
  return g.emit({1}, {acc}, {&residual}, [R, delta](const TensorImpl& o) {
    double* gr = gbuf(*R);
    const double go = o.grad[0];
    for (std::size_t i = 0; i < R->values.size(); ++i) {
      const double r = R->values[i];
      gr[i] += go * (std::abs(r) <= delta ? r : delta * sign(r));
    }
  });
}

Tensor second_diff_l1(Graph& g, const Tensor& traj) {
  if (traj.rank() < 2) {
    fail(ErrorCode::kShapeMismatch, "second_diff_l1 expects [T, ...], got " + shape_str(traj.shape()));
  }
  const std::size_t t_len = traj.dim(0);
  if (t_len < 3) {
    fail(ErrorCode::kTrajectoryTooShort,
         "second_diff_l1 needs at least 3 frames, got " + std::to_string(t_len));
  }
  const std::size_t stride = traj.size() / t_len;
  const double* p = traj.values().data();
  double acc = 0.0;
  for (std::size_t t = 1; t + 1 < t_len; ++t)
    for (std::size_t e = 0; e < stride; ++e) {
      acc += std::abs(p[(t + 1) * stride + e] - 2.0 * p[t * stride + e] + p[(t - 1) * stride + e]);
    }
  auto P = traj.handle();
  return g.emit({1}, {acc}, {&traj}, [P, t_len, stride](const TensorImpl& o) {
    double* gp = gbuf(*P);
    const double* p = P->values.data();
    const double go = o.grad[0];
    for (std::size_t t = 1; t + 1 < t_len; ++t)
      for (std::size_t e = 0; e < stride; ++e) {
        const double s =
            go * sign(p[(t + 1) * stride + e] - 2.0 * p[t * stride + e] + p[(t - 1) * stride + e]);
        gp[(t + 1) * stride + e] += s;
        gp[t * stride + e] -= 2.0 * s;
        gp[(t - 1) * stride + e] += s;
      }
  });
}

Tensor cross_entropy(Graph& g, const Tensor& logits, std::span<const std::size_t> targets) {
  if (logits.rank() != 2 || logits.dim(1) != targets.size()) {
    fail(ErrorCode::kShapeMismatch, "cross_entropy: logits " + shape_str(logits.shape()) +
                                        " vs " + std::to_string(targets.size()) + " targets");
  }
  const std::size_t c = logits.dim(0), n = logits.dim(1);
  for (std::size_t t : targets) {
    if (t >= c) {
      fail(ErrorCode::kIndexOutOfRange,
           "cross_entropy: target " + std::to_string(t) + " >= classes " + std::to_string(c));
    }
  }
  const double* x = logits.values().data();
  std::vector<double> probs(c * n);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double mx = x[j];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, x[k * n + j]);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(x[k * n + j] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t k = 0; k < c; ++k) probs[k * n + j] = std::exp(x[k * n + j] - log_z);
    acc += log_z - x[targets[j] * n + j];
  }
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  auto L = logits.handle();
  return g.emit({1}, {acc / static_cast<double>(n)}, {&logits},
                [L, probs = std::move(probs), tg = std::move(tg), c, n](const TensorImpl& o) {
                  double* gl = gbuf(*L);
                  const double scale = o.grad[0] / static_cast<double>(n);
                  for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t k = 0; k < c; ++k) {
                      const double onehot = k == tg[j] ? 1.0 : 0.0;
                      gl[k * n + j] += scale * (probs[k * n + j] - onehot);
                    }
                });
}

}  // namespace tgpt::nn
