#include "numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tgpt::nn {
namespace {

using Impl = std::shared_ptr<TensorImpl>;

double* gbuf(TensorImpl& t) {
  if (!t.requires_grad) return nullptr;
  if (t.grad.empty()) t.grad.assign(t.values.size(), 0.0);
  return t.grad.data();
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorCode::kShapeMismatch,
       std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": expected rank " +
                                        std::to_string(rank) + ", got " +
                                        shape_str(t.shape()));
  }
}

// outer x axis x inner decomposition for axis-wise ops
struct AxisSplit {
  std::size_t outer = 1, axis = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    fail(ErrorCode::kShapeMismatch,
         std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.axis = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

// Broadcast bookkeeping: per output element, the flat offsets into a and b.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> ia, ib;
};

Broadcast broadcast(const char* op, const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank), pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) mismatch(op, a, b);
    out[i] = std::max(pa[i], pb[i]);
  }
  std::vector<std::size_t> sa(rank), sb(rank);
  std::size_t ra = 1, rb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : ra;
    sb[i] = pb[i] == 1 ? 0 : rb;
    ra *= pa[i];
    rb *= pb[i];
  }
  Broadcast bc;
  bc.out = out;
  const std::size_t n = numel(out);
  bc.ia.resize(n);
  bc.ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t k = 0; k < n; ++k) {
    bc.ia[k] = oa;
    bc.ib[k] = ob;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out[d]) break;
      oa -= sa[d] * idx[d];
      ob -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return bc;
}

enum class BinOp { kAdd, kSub, kMul };

Tensor binary(Graph& g, const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  const auto& va = a.values();
  const auto& vb = b.values();
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      switch (op) {
        case BinOp::kAdd: out[i] = va[i] + vb[i]; break;
        case BinOp::kSub: out[i] = va[i] - vb[i]; break;
        case BinOp::kMul: out[i] = va[i] * vb[i]; break;
      }
    }
    Impl A = a.handle(), B = b.handle();
    return g.emit(a.shape(), std::move(out), {&a, &b}, [A, B, op](const TensorImpl& o) {
      const std::size_t n = o.grad.size();
      if (double* ga = gbuf(*A)) {
        for (std::size_t i = 0; i < n; ++i)
          ga[i] += op == BinOp::kMul ? o.grad[i] * B->values[i] : o.grad[i];
      }
      if (double* gb = gbuf(*B)) {
        for (std::size_t i = 0; i < n; ++i) {
          gb[i] += op == BinOp::kMul   ? o.grad[i] * A->values[i]
                   : op == BinOp::kSub ? -o.grad[i]
                                       : o.grad[i];
        }
      }
    });
  }
  auto bc = std::make_shared<Broadcast>(broadcast(name, a.shape(), b.shape()));
  std::vector<double> out(bc->ia.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double x = va[bc->ia[k]], y = vb[bc->ib[k]];
    out[k] = op == BinOp::kAdd ? x + y : op == BinOp::kSub ? x - y : x * y;
  }
  Impl A = a.handle(), B = b.handle();
  return g.emit(bc->out, std::move(out), {&a, &b}, [A, B, bc, op](const TensorImpl& o) {
    double* ga = gbuf(*A);
    double* gb = gbuf(*B);
    for (std::size_t k = 0; k < o.grad.size(); ++k) {
      const double gk = o.grad[k];
      if (ga) ga[bc->ia[k]] += op == BinOp::kMul ? gk * B->values[bc->ib[k]] : gk;
      if (gb) {
        gb[bc->ib[k]] += op == BinOp::kMul   ? gk * A->values[bc->ia[k]]
                         : op == BinOp::kSub ? -gk
                                             : gk;
      }
    }
  });
}

}  // namespace

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) mismatch("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = pa[i * k + p];
      if (s == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  Impl A = a.handle(), B = b.handle();
  return g.emit({m, n}, std::move(out), {&a, &b}, [A, B, m, k, n](const TensorImpl& o) {
    const double* go = o.grad.data();
    if (double* ga = gbuf(*A)) {
      const double* pb = B->values.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += go[i * n + j] * pb[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (double* gb = gbuf(*B)) {
      const double* pa = A->values.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double s = pa[i * k + p];
          if (s == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += s * go[i * n + j];
        }
    }
  });
}

Tensor transpose(Graph& g, const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  Impl A = a.handle();
  return g.emit({c, r}, std::move(out), {&a}, [A, r, c](const TensorImpl& o) {
    double* ga = gbuf(*A);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += o.grad[j * r + i];
  });
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) { return binary(g, a, b, BinOp::kAdd, "add"); }
Tensor sub(Graph& g, const Tensor& a, const Tensor& b) { return binary(g, a, b, BinOp::kSub, "sub"); }
Tensor mul(Graph& g, const Tensor& a, const Tensor& b) { return binary(g, a, b, BinOp::kMul, "mul"); }

Tensor scalar_mul(Graph& g, const Tensor& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= s;
  Impl A = a.handle();
  return g.emit(a.shape(), std::move(out), {&a}, [A, s](const TensorImpl& o) {
    double* ga = gbuf(*A);
    for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += s * o.grad[i];
  });
}

Tensor add_scalar(Graph& g, const Tensor& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v += s;
  Impl A = a.handle();
  return g.emit(a.shape(), std::move(out), {&a}, [A](const TensorImpl& o) {
    double* ga = gbuf(*A);
    for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i];
  });
}

Tensor concat(Graph& g, const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCode::kShapeMismatch, "concat: no inputs");
  Shape out_shape = parts[0].shape();
  if (axis >= out_shape.size()) mismatch("concat", out_shape, out_shape);
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != out_shape.size()) mismatch("concat", parts[0].shape(), p.shape());
    for (std::size_t d = 0; d < out_shape.size(); ++d) {
      if (d != axis && p.dim(d) != out_shape[d]) mismatch("concat", parts[0].shape(), p.shape());
    }
    total += p.dim(axis);
  }
  out_shape[axis] = total;
  const AxisSplit s = split_axis(out_shape, axis, "concat");
  std::vector<double> out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(off);
    const std::size_t w = p.dim(axis) * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(p.values().data() + o * w, w, out.data() + o * total * s.inner + off * s.inner);
    }
    off += p.dim(axis);
  }
  std::vector<Impl> impls;
  for (const Tensor& p : parts) impls.push_back(p.handle());
  return g.emit(out_shape, std::move(out), parts,
                [impls, offsets, s, total, axis](const TensorImpl& o) {
                  for (std::size_t i = 0; i < impls.size(); ++i) {
                    double* gp = gbuf(*impls[i]);
                    if (!gp) continue;
                    const std::size_t w = impls[i]->shape[axis] * s.inner;
                    for (std::size_t q = 0; q < s.outer; ++q) {
                      const double* src = o.grad.data() + q * total * s.inner + offsets[i] * s.inner;
                      for (std::size_t e = 0; e < w; ++e) gp[q * w + e] += src[e];
                    }
                  }
                });
}

Tensor reshape(Graph& g, const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) mismatch("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  Impl A = a.handle();
  return g.emit(std::move(shape), std::move(out), {&a}, [A](const TensorImpl& o) {
    double* ga = gbuf(*A);
    for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i];
  });
}

Tensor gather_rows(Graph& g, const Tensor& a, std::span<const std::size_t> rows) {
  if (a.rank() < 1 || rows.empty()) fail(ErrorCode::kShapeMismatch, "gather_rows: empty selection");
  const std::size_t width = a.size() / a.dim(0);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= a.dim(0)) {
      fail(ErrorCode::kIndexOutOfRange, "gather_rows: row " + std::to_string(idx[r]) +
                                            " outside " + shape_str(a.shape()));
    }
    std::copy_n(a.values().data() + idx[r] * width, width, out.data() + r * width);
  }
  Shape shape = a.shape();
  shape[0] = idx.size();
  Impl A = a.handle();
  return g.emit(std::move(shape), std::move(out), {&a}, [A, idx, width](const TensorImpl& o) {
    double* ga = gbuf(*A);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t e = 0; e < width; ++e) ga[idx[r] * width + e] += o.grad[r * width + e];
  });
}

Tensor sum(Graph& g, const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Impl A = a.handle();
  return g.emit({1}, {acc}, {&a}, [A](const TensorImpl& o) {
    double* ga = gbuf(*A);
    for (std::size_t i = 0; i < A->values.size(); ++i) ga[i] += o.grad[0];
  });
}

Tensor mean(Graph& g, const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  const double n = static_cast<double>(a.size());
  Impl A = a.handle();
  return g.emit({1}, {acc / n}, {&a}, [A, n](const TensorImpl& o) {
    double* ga = gbuf(*A);
    for (std::size_t i = 0; i < A->values.size(); ++i) ga[i] += o.grad[0] / n;
  });
}

Tensor sum_last(Graph& g, const Tensor& a) {
  if (a.rank() < 2) fail(ErrorCode::kShapeMismatch, "sum_last needs rank >= 2, got " + shape_str(a.shape()));
  const std::size_t c = a.shape().back(), lead = a.size() / c;
  std::vector<double> out(lead, 0.0);
  const double* x = a.values().data();
  for (std::size_t l = 0; l < lead; ++l)
    for (std::size_t k = 0; k < c; ++k) out[l] += x[l * c + k];
  Impl A = a.handle();
  return g.emit(Shape(a.shape().begin(), a.shape().end() - 1), std::move(out), {&a},
                [A, lead, c](const TensorImpl& o) {
                  double* ga = gbuf(*A);
                  for (std::size_t l = 0; l < lead; ++l)
                    for (std::size_t k = 0; k < c; ++k) ga[l * c + k] += o.grad[l];
                });
}

Tensor relu(Graph& g, const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  Impl A = a.handle();
  return g.emit(a.shape(), std::move(out), {&a}, [A](const TensorImpl& o) {
    double* ga = gbuf(*A);
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (A->values[i] > 0.0) ga[i] += o.grad[i];
  });
}

Tensor softmax(Graph& g, const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis(a.shape(), axis, "softmax");
  std::vector<double> out(a.size());
  const double* x = a.values().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.axis * s.inner + in;
      double mx = x[base];
      for (std::size_t k = 1; k < s.axis; ++k) mx = std::max(mx, x[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.axis; ++k) {
        const double e = std::exp(x[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.axis; ++k) out[base + k * s.inner] /= z;
    }
  Impl A = a.handle();
  return g.emit(a.shape(), std::move(out), {&a}, [A, s](const TensorImpl& o) {
    double* ga = gbuf(*A);
    const double* y = o.values.data();
    const double* gy = o.grad.data();
    for (std::size_t q = 0; q < s.outer; ++q)
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = q * s.axis * s.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < s.axis; ++k) dot += gy[base + k * s.inner] * y[base + k * s.inner];
        for (std::size_t k = 0; k < s.axis; ++k) {
          const std::size_t i = base + k * s.inner;
          ga[i] += y[i] * (gy[i] - dot);
        }
      }
  });
}

Tensor layer_norm(Graph& g, const Tensor& a, std::size_t axis, double eps) {
  const AxisSplit s = split_axis(a.shape(), axis, "layer_norm");
  std::vector<double> out(a.size());
  std::vector<double> inv_std(s.outer * s.inner);
  const double* x = a.values().data();
  const double n = static_cast<double>(s.axis);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.axis * s.inner + in;
      double mu = 0.0;
      for (std::size_t k = 0; k < s.axis; ++k) mu += x[base + k * s.inner];
      mu /= n;
      double var = 0.0;
      for (std::size_t k = 0; k < s.axis; ++k) {
        const double d = x[base + k * s.inner] - mu;
        var += d * d;
      }
      var /= n;
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[o * s.inner + in] = is;
      for (std::size_t k = 0; k < s.axis; ++k)
        out[base + k * s.inner] = (x[base + k * s.inner] - mu) * is;
    }
  Impl A = a.handle();
  return g.emit(a.shape(), std::move(out), {&a}, [A, s, n, inv_std](const TensorImpl& o) {
    double* ga = gbuf(*A);
    const double* y = o.values.data();
    const double* gy = o.grad.data();
    for (std::size_t q = 0; q < s.outer; ++q)
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = q * s.axis * s.inner + in;
        double mg = 0.0, mgy = 0.0;
        for (std::size_t k = 0; k < s.axis; ++k) {
          const std::size_t i = base + k * s.inner;
          mg += gy[i];
          mgy += gy[i] * y[i];
        }
        mg /= n;
        mgy /= n;
        const double is = inv_std[q * s.inner + in];
        for (std::size_t k = 0; k < s.axis; ++k) {
          const std::size_t i = base + k * s.inner;
          ga[i] += is * (gy[i] - mg - y[i] * mgy);
        }
      }
  });
}

Tensor l2_normalize(Graph& g, const Tensor& a, double eps) {
  const std::size_t c = a.shape().back();
  const std::size_t rows = a.size() / c;
  std::vector<double> out(a.size());
  std::vector<double> norms(rows);
  const double* x = a.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t k = 0; k < c; ++k) ss += x[r * c + k] * x[r * c + k];
    const double nrm = std::sqrt(ss);
    norms[r] = nrm;
    const double d = std::max(nrm, eps);
    for (std::size_t k = 0; k < c; ++k) out[r * c + k] = x[r * c + k] / d;
  }
  Impl A = a.handle();
  return g.emit(a.shape(), std::move(out), {&a}, [A, c, rows, norms, eps](const TensorImpl& o) {
    double* ga = gbuf(*A);
    const double* y = o.values.data();
    const double* gy = o.grad.data();
    for (std::size_t r = 0; r < rows; ++r) {
      if (norms[r] <= eps) {
        for (std::size_t k = 0; k < c; ++k) ga[r * c + k] += gy[r * c + k] / eps;
        continue;
      }
      double dot = 0.0;
      for (std::size_t k = 0; k < c; ++k) dot += gy[r * c + k] * y[r * c + k];
      for (std::size_t k = 0; k < c; ++k)
        ga[r * c + k] += (gy[r * c + k] - y[r * c + k] * dot) / norms[r];
    }
  });
}

Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank("linear", w, 2);
  const std::size_t out_dim = w.dim(0), in_dim = w.dim(1);
  if (x.shape().back() != in_dim) mismatch("linear", x.shape(), w.shape());
  if (b.defined() && (b.rank() != 1 || b.dim(0) != out_dim)) mismatch("linear", w.shape(), b.shape());
  const std::size_t rows = x.size() / in_dim;
  Shape shape = x.shape();
  shape.back() = out_dim;
  std::vector<double> out(rows * out_dim);
  const double* px = x.values().data();
  const double* pw = w.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = px + r * in_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = pw + o * in_dim;
      double acc = b.defined() ? b[o] : 0.0;
      for (std::size_t k = 0; k < in_dim; ++k) acc += xr[k] * wr[k];
      out[r * out_dim + o] = acc;
    }
  }
  Impl X = x.handle(), W = w.handle();
  Impl B = b.defined() ? b.handle() : nullptr;
  std::vector<Tensor> ins{x, w};
  if (b.defined()) ins.push_back(b);
  return g.emit(std::move(shape), std::move(out), ins,
                [X, W, B, rows, in_dim, out_dim](const TensorImpl& o) {
                  const double* go = o.grad.data();
                  if (double* gx = gbuf(*X)) {
                    const double* pw = W->values.data();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t q = 0; q < out_dim; ++q) {
                        const double s = go[r * out_dim + q];
                        if (s == 0.0) continue;
                        const double* wr = pw + q * in_dim;
                        double* gr = gx + r * in_dim;
                        for (std::size_t k = 0; k < in_dim; ++k) gr[k] += s * wr[k];
                      }
                  }
                  if (double* gw = gbuf(*W)) {
                    const double* px = X->values.data();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t q = 0; q < out_dim; ++q) {
                        const double s = go[r * out_dim + q];
                        if (s == 0.0) continue;
                        const double* xr = px + r * in_dim;
                        double* gr = gw + q * in_dim;
                        for (std::size_t k = 0; k < in_dim; ++k) gr[k] += s * xr[k];
                      }
                  }
                  if (B) {
                    if (double* gb = gbuf(*B)) {
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t q = 0; q < out_dim; ++q) gb[q] += go[r * out_dim + q];
                    }
                  }
                });
}

namespace {

struct Tap {
  std::size_t i00, i01, i10, i11;  // cell offsets (already times C)
  double fx, fy;
  bool free_x, free_y;  // false when clamped: coordinate gradient is zero
};

Tap make_tap(double x, double y, std::size_t h, std::size_t w, std::size_t c) {
  Tap t{};
  const double xmax = static_cast<double>(w - 1), ymax = static_cast<double>(h - 1);
  t.free_x = x > 0.0 && x < xmax;
  t.free_y = y > 0.0 && y < ymax;
  const double xc = std::clamp(x, 0.0, xmax);
  const double yc = std::clamp(y, 0.0, ymax);
  std::size_t x0 = w > 1 ? std::min(static_cast<std::size_t>(std::floor(xc)), w - 2) : 0;
  std::size_t y0 = h > 1 ? std::min(static_cast<std::size_t>(std::floor(yc)), h - 2) : 0;
  const std::size_t x1 = w > 1 ? x0 + 1 : 0;
  const std::size_t y1 = h > 1 ? y0 + 1 : 0;
  t.fx = w > 1 ? xc - static_cast<double>(x0) : 0.0;
  t.fy = h > 1 ? yc - static_cast<double>(y0) : 0.0;
  if (w == 1) t.free_x = false;
  if (h == 1) t.free_y = false;
  t.i00 = (y0 * w + x0) * c;
  t.i01 = (y0 * w + x1) * c;
  t.i10 = (y1 * w + x0) * c;
  t.i11 = (y1 * w + x1) * c;
  return t;
}

}  // namespace

Tensor bilinear_sample(Graph& g, const Tensor& grid, const Tensor& xy) {
  const bool batched = grid.rank() == 4;
  if (!(grid.rank() == 3 || batched)) mismatch("bilinear_sample", grid.shape(), xy.shape());
  if (xy.rank() != (batched ? 3u : 2u) || xy.shape().back() != 2) {
    mismatch("bilinear_sample", grid.shape(), xy.shape());
  }
  const std::size_t batch = batched ? grid.dim(0) : 1;
  if (batched && xy.dim(0) != batch) mismatch("bilinear_sample", grid.shape(), xy.shape());
  const std::size_t h = grid.dim(batched ? 1 : 0), w = grid.dim(batched ? 2 : 1);
  const std::size_t c = grid.dim(batched ? 3 : 2);
  const std::size_t m = xy.dim(batched ? 1 : 0);
  const std::size_t plane = h * w * c;

  std::vector<Tap> taps(batch * m);
  std::vector<double> out(batch * m * c);
  const double* pg = grid.values().data();
  const double* pxy = xy.values().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t s = b * m + j;
      taps[s] = make_tap(pxy[2 * s], pxy[2 * s + 1], h, w, c);
      const Tap& t = taps[s];
      const double* gb = pg + b * plane;
      double* o = out.data() + s * c;
      const double w00 = (1 - t.fx) * (1 - t.fy), w01 = t.fx * (1 - t.fy);
      const double w10 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
      for (std::size_t k = 0; k < c; ++k)
        o[k] = w00 * gb[t.i00 + k] + w01 * gb[t.i01 + k] + w10 * gb[t.i10 + k] + w11 * gb[t.i11 + k];
    }
  Shape shape = batched ? Shape{batch, m, c} : Shape{m, c};
  Impl G = grid.handle(), XY = xy.handle();
  return g.emit(std::move(shape), std::move(out), {&grid, &xy},
                [G, XY, taps = std::move(taps), batch, m, c, plane](const TensorImpl& o) {
                  double* gg = gbuf(*G);
                  double* gxy = gbuf(*XY);
                  const double* pg = G->values.data();
                  for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t j = 0; j < m; ++j) {
                      const std::size_t s = b * m + j;
                      const Tap& t = taps[s];
                      const double* go = o.grad.data() + s * c;
                      if (gg) {
                        double* gb = gg + b * plane;
                        const double w00 = (1 - t.fx) * (1 - t.fy), w01 = t.fx * (1 - t.fy);
                        const double w10 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
                        for (std::size_t k = 0; k < c; ++k) {
                          gb[t.i00 + k] += w00 * go[k];
                          gb[t.i01 + k] += w01 * go[k];
                          gb[t.i10 + k] += w10 * go[k];
                          gb[t.i11 + k] += w11 * go[k];
                        }
                      }
                      if (gxy && (t.free_x || t.free_y)) {
                        const double* gb = pg + b * plane;
                        double dx = 0.0, dy = 0.0;
                        for (std::size_t k = 0; k < c; ++k) {
                          const double v00 = gb[t.i00 + k], v01 = gb[t.i01 + k];
                          const double v10 = gb[t.i10 + k], v11 = gb[t.i11 + k];
                          dx += go[k] * ((1 - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
                          dy += go[k] * ((1 - t.fx) * (v10 - v00) + t.fx * (v11 - v01));
                        }
                        if (t.free_x) gxy[2 * s] += dx;
                        if (t.free_y) gxy[2 * s + 1] += dy;
                      }
                    }
                });
}

Tensor weighted_sum(Graph& g, const Tensor& weights, const Tensor& values) {
  if (values.rank() != weights.rank() + 1 ||
      !std::equal(weights.shape().begin(), weights.shape().end(), values.shape().begin())) {
    mismatch("weighted_sum", weights.shape(), values.shape());
  }
  const std::size_t m = weights.shape().back();
  const std::size_t c = values.shape().back();
  const std::size_t lead = weights.size() / m;
  std::vector<double> out(lead * c, 0.0);
  const double* pw = weights.values().data();
  const double* pv = values.values().data();
  for (std::size_t l = 0; l < lead; ++l)
    for (std::size_t j = 0; j < m; ++j) {
      const double wj = pw[l * m + j];
      const double* v = pv + (l * m + j) * c;
      double* o = out.data() + l * c;
      for (std::size_t k = 0; k < c; ++k) o[k] += wj * v[k];
    }
  Shape shape(weights.shape().begin(), weights.shape().end() - 1);
  shape.push_back(c);
  Impl W = weights.handle(), V = values.handle();
  return g.emit(std::move(shape), std::move(out), {&weights, &values},
                [W, V, lead, m, c](const TensorImpl& o) {
                  double* gw = gbuf(*W);
                  double* gv = gbuf(*V);
                  for (std::size_t l = 0; l < lead; ++l)
                    for (std::size_t j = 0; j < m; ++j) {
                      const double* go = o.grad.data() + l * c;
                      const std::size_t vo = (l * m + j) * c;
                      if (gw) {
                        double acc = 0.0;
                        for (std::size_t k = 0; k < c; ++k) acc += go[k] * V->values[vo + k];
                        gw[l * m + j] += acc;
                      }
                      if (gv) {
                        const double wj = W->values[l * m + j];
                        for (std::size_t k = 0; k < c; ++k) gv[vo + k] += wj * go[k];
                      }
                    }
                });
}

Tensor grouped_linear(Graph& g, const Tensor& x, const Tensor& w) {
  require_rank("grouped_linear", x, 3);
  require_rank("grouped_linear", w, 3);
  const std::size_t n = x.dim(0), groups = x.dim(1), c = x.dim(2), d = w.dim(1);
  if (w.dim(0) != groups || w.dim(2) != c) mismatch("grouped_linear", x.shape(), w.shape());
  std::vector<double> out(n * groups * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t q = 0; q < groups; ++q) {
      const double* xv = x.values().data() + (i * groups + q) * c;
      for (std::size_t r = 0; r < d; ++r) {
        const double* wv = w.values().data() + (q * d + r) * c;
        double acc = 0.0;
        for (std::size_t k = 0; k < c; ++k) acc += wv[k] * xv[k];
        out[(i * groups + q) * d + r] = acc;
      }
    }
  Impl X = x.handle(), W = w.handle();
  return g.emit({n, groups, d}, std::move(out), {&x, &w},
                [X, W, n, groups, c, d](const TensorImpl& o) {
                  double* gx = gbuf(*X);
                  double* gw = gbuf(*W);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t q = 0; q < groups; ++q)
                      for (std::size_t r = 0; r < d; ++r) {
                        const double go = o.grad[(i * groups + q) * d + r];
                        if (go == 0.0) continue;
                        const std::size_t xo = (i * groups + q) * c;
                        const std::size_t wo = (q * d + r) * c;
                        for (std::size_t k = 0; k < c; ++k) {
                          if (gx) gx[xo + k] += go * W->values[wo + k];
                          if (gw) gw[wo + k] += go * X->values[xo + k];
                        }
                      }
                });
}

Tensor avg_pool2x2(Graph& g, const Tensor& grid) {
  require_rank("avg_pool2x2", grid, 3);
  const std::size_t h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
  if (h % 2 || w % 2) {
    fail(ErrorCode::kShapeMismatch, "avg_pool2x2: odd extent in " + shape_str(grid.shape()));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  std::vector<double> out(ho * wo * c, 0.0);
  const double* p = grid.values().data();
  for (std::size_t i = 0; i < ho; ++i)
    for (std::size_t j = 0; j < wo; ++j) {
      double* o = out.data() + (i * wo + j) * c;
      for (std::size_t di = 0; di < 2; ++di)
        for (std::size_t dj = 0; dj < 2; ++dj) {
          const double* src = p + ((2 * i + di) * w + (2 * j + dj)) * c;
          for (std::size_t k = 0; k < c; ++k) o[k] += 0.25 * src[k];
        }
    }
  Impl G = grid.handle();
  return g.emit({ho, wo, c}, std::move(out), {&grid}, [G, ho, wo, w, c](const TensorImpl& o) {
    double* gg = gbuf(*G);
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) {
        const double* go = o.grad.data() + (i * wo + j) * c;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) {
            double* dst = gg + ((2 * i + di) * w + (2 * j + dj)) * c;
            for (std::size_t k = 0; k < c; ++k) dst[k] += 0.25 * go[k];
          }
      }
  });
}

}  // namespace tgpt::nn
