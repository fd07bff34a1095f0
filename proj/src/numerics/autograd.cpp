#include "ugpl/numerics/autograd.hpp"

#include <unordered_set>
#include <utility>

namespace ugpl {

Tensor& Node::grad_buffer() {
  if (grad.shape() != value.shape() || grad.size() != value.size()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->op = "leaf";
}

Var Var::from_op(Tensor value, std::string op, std::vector<Var> inputs,
                 std::function<void(Node& self)> backward_fn) {
  Var out;
  out.node_ = std::make_shared<Node>();
  out.node_->value = std::move(value);
  out.node_->op = std::move(op);
  bool any = false;
  for (const Var& v : inputs) any = any || v.requires_grad();
  if (any) {
    out.node_->requires_grad = true;
    out.node_->parents.reserve(inputs.size());
    for (const Var& v : inputs) out.node_->parents.push_back(v.node_);
    out.node_->backward_fn = std::move(backward_fn);
  }
  return out;
}

void backward(const Var& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.size() != 1) throw ShapeError("backward", "loss must be scalar, got " + shape_str(loss.shape()));
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.contains(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer().fill(0.0);
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward_fn) continue;
    if (node->grad.empty()) continue;
    node->backward_fn(*node);
    node->grad = Tensor();
  }
}

}  // namespace ugpl
