#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ugpl/numerics/tensor.hpp"

namespace ugpl {

// One vertex of the reverse-mode tape. Nodes are created by ops and own the
// forward value; the gradient buffer is allocated on first accumulation.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads self.grad and accumulates into the parents that require grad.
  std::function<void(Node& self)> backward_fn;

  Tensor& grad_buffer();
};

// Handle to a tape node. Copies share the node, so a Var behaves like a
// reference-counted tensor with optional gradient tracking.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  // Direct write access for optimizers and checkpoint loading. Must not be
  // used on a node that belongs to a graph still awaiting backward().
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  double item() const { return node_->value.item(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Tensor(); }

  // Same value, cut from the tape.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node>& node() const { return node_; }

  static Var from_op(Tensor value, std::string op, std::vector<Var> inputs,
                     std::function<void(Node& self)> backward_fn);

 private:
  std::shared_ptr<Node> node_;
};

// Reverse sweep from a scalar loss; accumulates into every reachable leaf
// that requires grad. Intermediate gradient buffers are released.
void backward(const Var& loss);

}  // namespace ugpl
