#pragma once

#include <functional>
#include <vector>

#include "pgn/optim.hpp"
#include "pgn/tensor.hpp"

namespace pgn {

struct Var {
  int id = -1;
};

// Reverse-mode tape. Nodes are appended in construction order, which is a
// topological order by construction; backward() sweeps it in exact reverse.
// Frozen parameters enter as constants and therefore never appear in the
// gradient registry.
class Graph {
 public:
  Var constant(Tensor value);
  Var leaf(Tensor value, bool track_grad);
  Var param(Parameter& p);

  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  // Gradient of the last backward() with respect to a tracked node (empty
  // tensor if the node never received one).
  const Tensor& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  bool tracked(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].track; }

  // Reverse sweep from a scalar loss; accumulates into Parameter::grad for
  // every trainable parameter the loss depends on.
  void backward(Var scalar_loss);

  // Trainable parameters that received gradient in the last backward().
  const std::vector<Parameter*>& grad_registry() const { return registry_; }

  int size() const { return static_cast<int>(nodes_.size()); }

  // Node-building API used by the operation free functions. The backfn reads
  // the node's grad and accumulates into its parents.
  Var add_node(Tensor value, std::vector<int> parents, std::function<void(Graph&, int)> backfn);
  void accumulate(int id, const Tensor& g);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool track = false;
    Parameter* param = nullptr;
    std::vector<int> parents;
    std::function<void(Graph&, int)> backfn;
  };

  void ensure_grad(int id);

  std::vector<Node> nodes_;
  std::vector<std::pair<Parameter*, int>> param_nodes_;
  std::vector<Parameter*> registry_;
};

// Differentiable operations. Weight layouts and geometry match pgn::kernels.
Var conv2d(Graph& g, Var x, Var w, Var b, int stride, int padding);
Var conv_transpose2d(Graph& g, Var x, Var w, Var b, int stride, int padding);
Var dense(Graph& g, Var x, Var w, Var b);
Var relu(Graph& g, Var x);
Var sigmoid(Graph& g, Var x);
Var avg_pool2d(Graph& g, Var x, int k);
Var flatten(Graph& g, Var x);
Var softmax(Graph& g, Var x);
Var softmax_cross_entropy(Graph& g, Var logits, const std::vector<int>& labels);
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var affine(Graph& g, Var x, float scale, float shift);
Var abs_val(Graph& g, Var x);
Var log_val(Graph& g, Var x);
Var clamp(Graph& g, Var x, float lo, float hi);
Var sum(Graph& g, Var x);
Var mean(Graph& g, Var x);

}  // namespace pgn
