#include "numerics/tensor.hpp"

#include <algorithm>
#include <atomic>

namespace tgpt::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t e : shape) {
    if (e == 0) fail(ErrorCode::kShapeMismatch, "zero extent in shape " + shape_str(shape));
  }
  if (numel(shape) != values.size()) {
    fail(ErrorCode::kShapeMismatch, "shape " + shape_str(shape) + " does not hold " +
                                        std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

double Tensor::item() const {
  if (size() != 1) fail(ErrorCode::kShapeMismatch, "item() on " + shape_str(shape()));
  return impl_->values[0];
}

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->values.size(), 0.0); }

Tensor Tensor::detach() const {
  return from(impl_->shape, impl_->values, false);
}

double* grad_target(const Tensor& t) {
  TensorImpl* p = t.impl();
  if (!p->requires_grad) return nullptr;
  if (p->grad.empty()) p->grad.assign(p->values.size(), 0.0);
  return p->grad.data();
}

namespace {
std::atomic<std::uint64_t> next_graph_id{1};
}

Graph::Graph(bool record) : record_(record), id_(next_graph_id.fetch_add(1)) {}

Tensor Graph::finish(Shape shape, std::vector<double> values, bool needs_grad,
                     std::function<void(const TensorImpl&)> backward) {
  Tensor out = Tensor::from(std::move(shape), std::move(values), false);
  out.impl_->producer = id_;
  if (record_ && needs_grad) {
    out.impl_->requires_grad = true;
    tape_.push_back(Node{out.impl_, std::move(backward)});
  }
  return out;
}

Tensor Graph::emit(Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(const TensorImpl&)> backward) {
  bool needs = false;
  for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  return finish(std::move(shape), std::move(values), needs, std::move(backward));
}

Tensor Graph::emit(Shape shape, std::vector<double> values,
                   const std::vector<Tensor>& inputs,
                   std::function<void(const TensorImpl&)> backward) {
  bool needs = false;
  for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  return finish(std::move(shape), std::move(values), needs, std::move(backward));
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    fail(ErrorCode::kShapeMismatch, "backward needs a one-element loss");
  }
  if (loss.impl()->producer != id_ || !loss.requires_grad()) {
    fail(ErrorCode::kDetachedTensor, "loss was not produced by this graph");
  }
  TensorImpl* root = loss.impl();
  root->grad.assign(1, 1.0);
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    const TensorImpl& out = *it->out;
    if (out.grad.empty()) continue;  // no path to the loss
    it->backward(out);
  }
}

void backward(const Tensor& loss, Graph& graph) { graph.backward(loss); }

void zero_grad(std::span<Tensor> params) {
  for (Tensor& p : params) p.zero_grad();
}

}  // namespace tgpt::nn
