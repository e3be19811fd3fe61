#pragma once

// Reverse-mode differentiation over a tape of dense tensor operations.
//
// A Graph is built eagerly: every op evaluates its output immediately and
// records a forward closure (so the whole tape can be replayed after leaf
// values change) plus a backward closure that accumulates into the gradient
// buffers of its inputs. Gradients add up across every use of a node, which
// is what makes tied weights work without special handling.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvsig/tensor.hpp"

namespace cvsig::ad {

using NodeId = std::size_t;
using ParamId = std::size_t;

struct Parameter {
  std::string name;
  Tensor value;
  friend bool operator==(const Parameter&, const Parameter&) = default;
};

class ParameterSet {
 public:
  ParamId add(std::string name, Tensor value);

  std::size_t size() const { return params_.size(); }
  bool empty() const { return params_.empty(); }
  Parameter& operator[](ParamId id) { return params_.at(id); }
  const Parameter& operator[](ParamId id) const { return params_.at(id); }
  std::optional<ParamId> find(std::string_view name) const;
  std::size_t scalar_count() const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<Parameter> params_;
};

// One gradient tensor per parameter, aligned with ParameterSet ids.
using Gradients = std::vector<Tensor>;

class Graph;

struct Var {
  Graph* graph = nullptr;
  NodeId id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Graph {
 public:
  using ForwardFn = std::function<void(Graph&, NodeId)>;
  using BackwardFn = std::function<void(Graph&, NodeId)>;

  Graph() = default;
  explicit Graph(const ParameterSet& params) : params_(&params) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf for a trainable parameter. Repeated calls return the same node.
  Var parameter(ParamId id);
  Var parameter(std::string_view name);

  // Appends an op node; `forward` is invoked immediately to fill the value.
  Var apply(std::string_view op, Shape out_shape, std::vector<NodeId> inputs, ForwardFn forward,
            BackwardFn backward);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  Tensor& mutable_value(NodeId id) { return nodes_.at(id).value; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }
  const std::string& op(NodeId id) const { return nodes_.at(id).op; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }

  // Zero-initialised on first access.
  Tensor& grad(NodeId id);

  std::size_t node_count() const { return nodes_.size(); }
  const ParameterSet* parameter_set() const { return params_; }
  // Parameter leaves present in this graph, as (param id, node id).
  std::vector<std::pair<ParamId, NodeId>> parameter_nodes() const;

  // Gradients of a scalar loss with respect to every parameter in the bound set.
  Gradients backward(Var loss);
  void zero_grad();
  // Recomputes every non-leaf value in tape order.
  void replay();

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    std::vector<NodeId> inputs;
    ForwardFn forward;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<ParamId> param;
  };

  const ParameterSet* params_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<std::optional<NodeId>> param_nodes_;
};

// ---- operations ---------------------------------------------------------

// input [C_in x T], weights [C_out x C_in x K], bias [C_out]; left zero padding.
Var conv1d_dilated_causal(Var input, Var weights, Var bias, std::size_t dilation);
// tanh(filter) * sigmoid(gate), elementwise.
Var gated_activation(Var filter_in, Var gate_in);
Var relu(Var input);
Var add(Var a, Var b);
Var scale(Var input, double factor);
// Rank-1 softmax with max subtraction.
Var softmax(Var input);
// sum(mask * (pred - target)^2) / sum(mask). The mask never receives a gradient.
Var masked_mse(Var pred, Var target, Var mask);
// Stacks two [C x T] tensors along the channel axis.
Var concat_channels(Var a, Var b);
// [C x T] -> [C]
Var mean_over_time(Var input);
// w [m x n], x [n], b [m] -> w x + b
Var linear(Var weights, Var input, Var bias);
// a [m x n], x [n] -> a x
Var matvec(Var matrix, Var vec);
// a [m x n], x [m] -> a^T x
Var matvec_transposed(Var matrix, Var vec);
// x [C x T], v [s] -> [(C + s) x T] with v repeated at every step.
Var broadcast_concat(Var features, Var vec);
Var reshape(Var input, Shape shape);

}  // namespace cvsig::ad
