#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "common/error.hpp"

namespace tgpt::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::uint64_t producer = 0;  // id of the graph that produced it; 0 for leaves
};

// Reference-counted handle: copies alias the same storage, so a parameter
// held by a model and by an optimizer is one tensor.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->values.size(); }

  std::span<const double> values() const { return impl_->values; }
  std::span<double> mutable_values() { return impl_->values; }
  double operator[](std::size_t i) const { return impl_->values[i]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad();  // allocates zeros on first use
  void zero_grad();

  // Deep copy without graph linkage.
  Tensor detach() const;

  TensorImpl* impl() const noexcept { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& handle() const noexcept { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;

  friend class Graph;
};

// Ordered record of executed differentiable operations. A graph created with
// record=false evaluates forward values only and never stores closures.
class Graph {
 public:
  explicit Graph(bool record = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }
  std::uint64_t id() const noexcept { return id_; }
  std::size_t size() const noexcept { return tape_.size(); }

  // Creates an op output. `backward` runs during Graph::backward with the
  // output's gradient already populated; it must accumulate into the
  // gradients of whichever inputs require them. It is only stored when some
  // input requires a gradient.
  Tensor emit(Shape shape, std::vector<double> values,
              std::initializer_list<const Tensor*> inputs,
              std::function<void(const TensorImpl& out)> backward);
  Tensor emit(Shape shape, std::vector<double> values,
              const std::vector<Tensor>& inputs,
              std::function<void(const TensorImpl& out)> backward);

  // Reverse-mode sweep from a one-element loss produced by this graph.
  void backward(const Tensor& loss);

 private:
  struct Node {
    std::shared_ptr<TensorImpl> out;
    std::function<void(const TensorImpl&)> backward;
  };

  Tensor finish(Shape shape, std::vector<double> values, bool needs_grad,
                std::function<void(const TensorImpl& out)> backward);

  bool record_;
  std::uint64_t id_;
  std::vector<Node> tape_;
};

void backward(const Tensor& loss, Graph& graph);
void zero_grad(std::span<Tensor> params);

// Gradient buffer of an input, allocated on demand; nullptr when the input
// does not require gradients.
double* grad_target(const Tensor& t);

}  // namespace tgpt::nn
