#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cosep/tensorcore/params.hpp"
#include "cosep/tensorcore/tensor.hpp"

namespace cosep {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const;
  bool requires_grad() const;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Define-by-run tape. Nodes are appended in construction order, so the node
// vector is already a topological order and backward() walks it in reverse.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;  // empty until backward reaches the node
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  explicit Graph(bool training = true) : training_(training) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var input(Tensor value, bool requires_grad);
  // One node per parameter per graph; repeated calls return the same Var.
  Var parameter(Parameter& p);

  // Appends an op node. requires_grad is inherited from the inputs.
  Var record(std::string op, Tensor value, const std::vector<Var>& inputs,
             BackwardFn backward);

  Node& node(std::size_t id) { return nodes_.at(id); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);

  // Reverse sweep from a scalar node. Parameters reached by the sweep get
  // their gradients accumulated and are marked touched.
  void backward(Var loss);

  // nullptr when the node does not require grad or was never reached.
  const Tensor* grad(Var v) const;

  bool training() const { return training_; }
  void set_training(bool t) { training_ = t; }

 private:
  void check_owner(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool training_;
};

}  // namespace cosep
