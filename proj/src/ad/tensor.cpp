#include "pairnas/ad/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "pairnas/error.hpp"

namespace pairnas::ad {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t num_elements(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (int d : shape) {
    if (d <= 0) throw DimensionError("non-positive dimension in " + shape_string(shape));
  }
  if (num_elements(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> values(num_elements(shape), value);
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

int Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) throw DimensionError("axis out of range for " + shape_string(shape()));
  return node_->shape[static_cast<std::size_t>(axis)];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

Tensor Tensor::from_node(std::shared_ptr<Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward);
  }
  return Tensor::from_node(std::move(node));
}

ComputeGraph::ComputeGraph(const Tensor& root) : root_(root) {
  if (!root.defined() || !root.requires_grad()) return;
  // Iterative post-order DFS.
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

void ComputeGraph::backward() {
  if (!root_.defined()) throw DimensionError("backward on undefined tensor");
  if (root_.size() != 1) {
    throw DimensionError("backward root must be scalar, got " + shape_string(root_.shape()));
  }
  if (order_.empty()) return;
  for (Node* n : order_) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  Node* root = order_.back();
  root->grad_buffer()[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf()) n->backward_fn(*n);
  }
}

void backward(const Tensor& root) { ComputeGraph(root).backward(); }

}  // namespace pairnas::ad
