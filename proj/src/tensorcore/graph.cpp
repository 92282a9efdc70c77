#include "cosep/tensorcore/graph.hpp"

namespace cosep {

const Tensor& Var::value() const { return graph->node(id).value; }
const Shape& Var::shape() const { return graph->node(id).value.shape(); }
bool Var::requires_grad() const { return graph->node(id).requires_grad; }

void Graph::check_owner(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) {
    throw std::invalid_argument("variable does not belong to this graph");
  }
}

Var Graph::constant(Tensor value) { return input(std::move(value), false); }

Var Graph::input(Tensor value, bool requires_grad) {
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.op = "param:" + p.name;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(std::string op, Tensor value, const std::vector<Var>& inputs,
                  BackwardFn backward) {
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  for (const Var& v : inputs) {
    check_owner(v);
    n.inputs.push_back(v.id);
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  check_owner(loss);
  Node& root = nodes_[loss.id];
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                shape_str(root.value.shape()));
  }
  if (!root.requires_grad) return;
  grad_buffer(loss.id).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      Parameter& p = *n.param;
      if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape(), 0.0);
      const double* g = n.grad.ptr();
      double* dst = p.grad.ptr();
      for (std::size_t k = 0; k < p.grad.size(); ++k) dst[k] += g[k];
      p.touched = true;
    }
  }
}

const Tensor* Graph::grad(Var v) const {
  check_owner(v);
  const Node& n = nodes_[v.id];
  if (!n.requires_grad || n.grad.empty()) return nullptr;
  return &n.grad;
}

}  // namespace cosep
