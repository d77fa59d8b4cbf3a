#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pairnas::ad {

using Shape = std::vector<int>;

std::size_t num_elements(const Shape& shape);
std::string shape_string(const Shape& shape);

// One recorded value in the dynamic graph. Leaves are parameters or
// constants; interior nodes hold the closure that pushes their gradient
// into their parents.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";

  bool is_leaf() const { return !backward_fn; }
  // Zero-filled gradient buffer, allocated on first use.
  std::vector<double>& grad_buffer();
};

// Handle to a graph node. Copies alias the same node.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int axis) const;
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  // Direct write access. Only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_data() { return node_->value; }
  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  // Drops the gradient buffer; has_grad() is false afterwards.
  void zero_grad() { node_->grad.clear(); }

  // Leaf copy of the current value with no history.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Builds a result node. Parents are linked only when recording is on and at
// least one of them needs a gradient; `backward` is dropped otherwise.
Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

// Topologically ordered view of the graph that produced a root tensor.
class ComputeGraph {
 public:
  explicit ComputeGraph(const Tensor& root);

  // Nodes that require grad, each appearing after all of its parents.
  const std::vector<Node*>& nodes() const { return order_; }

  // Reverse-mode sweep. Interior gradients are recomputed from scratch;
  // leaf gradients accumulate across calls.
  void backward();

 private:
  Tensor root_;
  std::vector<Node*> order_;
};

// Convenience wrapper: ComputeGraph(root).backward(). Root must be scalar.
void backward(const Tensor& root);

}  // namespace pairnas::ad
