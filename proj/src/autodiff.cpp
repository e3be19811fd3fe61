#include "cvsig/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace cvsig::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

MatMap as_matrix(Tensor& t) { return {t.raw(), Eigen::Index(t.dim(0)), Eigen::Index(t.dim(1))}; }
ConstMatMap as_matrix(const Tensor& t) { return {t.raw(), Eigen::Index(t.dim(0)), Eigen::Index(t.dim(1))}; }
VecMap as_vector(Tensor& t) { return {t.raw(), Eigen::Index(t.size())}; }
ConstVecMap as_vector(const Tensor& t) { return {t.raw(), Eigen::Index(t.size())}; }

[[noreturn]] void shape_error(std::string_view op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

void require_rank(std::string_view op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    shape_error(op, std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                        shape_string(t.shape()));
  }
}

void require_same_graph(Var a, Var b) {
  if (a.graph != b.graph || a.graph == nullptr) {
    throw std::invalid_argument("operands belong to different graphs");
  }
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---- ParameterSet -------------------------------------------------------

ParamId ParameterSet::add(std::string name, Tensor value) {
  if (find(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::optional<ParamId> ParameterSet::find(std::string_view name) const {
  for (ParamId i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

// ---- Graph --------------------------------------------------------------

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::constant(Tensor value) {
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(ParamId id) {
  if (params_ == nullptr) {
    throw std::logic_error("graph has no parameter set");
  }
  if (id >= params_->size()) {
    throw std::out_of_range("parameter id " + std::to_string(id) + " out of range");
  }
  if (param_nodes_.size() < params_->size()) param_nodes_.resize(params_->size());
  if (param_nodes_[id]) return {this, *param_nodes_[id]};

  Node node;
  node.op = "parameter";
  node.value = (*params_)[id].value;
  node.requires_grad = true;
  node.param = id;
  nodes_.push_back(std::move(node));
  param_nodes_[id] = nodes_.size() - 1;
  return {this, nodes_.size() - 1};
}

Var Graph::parameter(std::string_view name) {
  if (params_ == nullptr) throw std::logic_error("graph has no parameter set");
  auto id = params_->find(name);
  if (!id) throw std::invalid_argument("unknown parameter: " + std::string(name));
  return parameter(*id);
}

Var Graph::apply(std::string_view op, Shape out_shape, std::vector<NodeId> inputs, ForwardFn forward,
                 BackwardFn backward) {
  Node node;
  node.op = std::string(op);
  node.value = Tensor(std::move(out_shape));
  for (NodeId in : inputs) {
    if (in >= nodes_.size()) throw std::out_of_range("input node does not exist");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  node.inputs = std::move(inputs);
  node.forward = std::move(forward);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  const NodeId id = nodes_.size() - 1;
  nodes_[id].forward(*this, id);
  return {this, id};
}

Tensor& Graph::grad(NodeId id) {
  Node& node = nodes_.at(id);
  if (node.grad.shape() != node.value.shape() || node.grad.size() != node.value.size()) {
    node.grad = Tensor(node.value.shape());
  }
  return node.grad;
}

std::vector<std::pair<ParamId, NodeId>> Graph::parameter_nodes() const {
  std::vector<std::pair<ParamId, NodeId>> out;
  for (ParamId p = 0; p < param_nodes_.size(); ++p) {
    if (param_nodes_[p]) out.emplace_back(p, *param_nodes_[p]);
  }
  return out;
}

void Graph::zero_grad() {
  for (auto& node : nodes_) node.grad = Tensor();
}

Gradients Graph::backward(Var loss) {
  if (loss.graph != this) throw std::invalid_argument("loss belongs to another graph");
  if (value(loss.id).size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                shape_string(value(loss.id).shape()));
  }
  zero_grad();
  grad(loss.id)[0] = 1.0;
  for (NodeId i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    node.backward(*this, i);
  }

  Gradients out;
  if (params_ == nullptr) return out;
  out.reserve(params_->size());
  for (ParamId p = 0; p < params_->size(); ++p) {
    const auto& shape = (*params_)[p].value.shape();
    if (p < param_nodes_.size() && param_nodes_[p] && !nodes_[*param_nodes_[p]].grad.empty()) {
      out.push_back(nodes_[*param_nodes_[p]].grad);
    } else {
      out.emplace_back(shape);
    }
  }
  return out;
}

void Graph::replay() {
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].forward) nodes_[i].forward(*this, i);
  }
}

// ---- operations ---------------------------------------------------------

Var conv1d_dilated_causal(Var input, Var weights, Var bias, std::size_t dilation) {
  require_same_graph(input, weights);
  require_same_graph(input, bias);
  constexpr std::string_view kOp = "conv1d_dilated_causal";
  const Tensor& x = input.value();
  const Tensor& w = weights.value();
  const Tensor& b = bias.value();
  require_rank(kOp, x, 2, "input");
  require_rank(kOp, w, 3, "weights");
  require_rank(kOp, b, 1, "bias");
  if (dilation < 1) shape_error(kOp, "dilation must be >= 1");
  if (w.dim(2) < 1) shape_error(kOp, "kernel width must be >= 1");
  if (w.dim(1) != x.dim(0)) {
    shape_error(kOp, "weights expect " + std::to_string(w.dim(1)) + " input channels, input has " +
                         std::to_string(x.dim(0)));
  }
  if (b.dim(0) != w.dim(0)) shape_error(kOp, "bias length does not match output channels");
  if (x.dim(1) < 1) shape_error(kOp, "input must have at least one time step");

  const auto c_in = Eigen::Index(x.dim(0));
  const auto steps = Eigen::Index(x.dim(1));
  const auto c_out = Eigen::Index(w.dim(0));
  const auto width = Eigen::Index(w.dim(2));
  const auto d = Eigen::Index(dilation);
  const Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic> tap_stride(c_in * width, width);

  auto forward = [=](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    auto xm = as_matrix(g.value(in[0]));
    const Tensor& wt = g.value(in[1]);
    const Tensor& bt = g.value(in[2]);
    auto out = as_matrix(g.mutable_value(self));
    for (Eigen::Index c = 0; c < c_out; ++c) out.row(c).setConstant(bt[std::size_t(c)]);
    for (Eigen::Index k = 0; k < width; ++k) {
      const Eigen::Index shift = (width - 1 - k) * d;
      if (shift >= steps) continue;
      const Eigen::Index n = steps - shift;
      ConstStridedMap wk(wt.raw() + k, c_out, c_in, tap_stride);
      out.rightCols(n).noalias() += wk * xm.leftCols(n);
    }
  };
  auto backward = [=](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    auto dout = as_matrix(std::as_const(g.grad(self)));
    const bool need_x = g.requires_grad(in[0]);
    const bool need_w = g.requires_grad(in[1]);
    if (g.requires_grad(in[2])) {
      auto db = as_vector(g.grad(in[2]));
      db += dout.rowwise().sum();
    }
    for (Eigen::Index k = 0; k < width; ++k) {
      const Eigen::Index shift = (width - 1 - k) * d;
      if (shift >= steps) continue;
      const Eigen::Index n = steps - shift;
      if (need_x) {
        ConstStridedMap wk(g.value(in[1]).raw() + k, c_out, c_in, tap_stride);
        auto dx = as_matrix(g.grad(in[0]));
        dx.leftCols(n).noalias() += wk.transpose() * dout.rightCols(n);
      }
      if (need_w) {
        StridedMap dwk(g.grad(in[1]).raw() + k, c_out, c_in, tap_stride);
        auto xm = as_matrix(g.value(in[0]));
        dwk.noalias() += dout.rightCols(n) * xm.leftCols(n).transpose();
      }
    }
  };
  return input.graph->apply(kOp, {std::size_t(c_out), std::size_t(steps)}, {input.id, weights.id, bias.id},
                            forward, backward);
}

Var gated_activation(Var filter_in, Var gate_in) {
  require_same_graph(filter_in, gate_in);
  if (!filter_in.value().same_shape(gate_in.value())) {
    shape_error("gated_activation", "filter " + shape_string(filter_in.shape()) + " vs gate " +
                                        shape_string(gate_in.shape()));
  }
  const std::size_t n = filter_in.value().size();
  // tanh and sigmoid values from the last forward pass, reused by backward.
  auto cache = std::make_shared<std::vector<double>>(2 * n);
  auto forward = [cache, n](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    const double* f = g.value(in[0]).raw();
    const double* s = g.value(in[1]).raw();
    double* out = g.mutable_value(self).raw();
    double* th = cache->data();
    double* sg = th + n;
    for (std::size_t i = 0; i < n; ++i) {
      th[i] = std::tanh(f[i]);
      sg[i] = sigmoid(s[i]);
      out[i] = th[i] * sg[i];
    }
  };
  auto backward = [cache, n](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    const double* dy = g.grad(self).raw();
    const double* th = cache->data();
    const double* sg = th + n;
    if (g.requires_grad(in[0])) {
      double* df = g.grad(in[0]).raw();
      for (std::size_t i = 0; i < n; ++i) df[i] += dy[i] * sg[i] * (1.0 - th[i] * th[i]);
    }
    if (g.requires_grad(in[1])) {
      double* dg = g.grad(in[1]).raw();
      for (std::size_t i = 0; i < n; ++i) dg[i] += dy[i] * th[i] * sg[i] * (1.0 - sg[i]);
    }
  };
  return filter_in.graph->apply("gated_activation", filter_in.shape(), {filter_in.id, gate_in.id}, forward,
                                backward);
}

Var relu(Var input) {
  auto forward = [](Graph& g, NodeId self) {
    const Tensor& x = g.value(g.inputs(self)[0]);
    Tensor& y = g.mutable_value(self);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  };
  auto backward = [](Graph& g, NodeId self) {
    const NodeId in = g.inputs(self)[0];
    if (!g.requires_grad(in)) return;
    const Tensor& x = g.value(in);
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(in);
    // Subgradient at exactly zero is zero.
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) dx[i] += dy[i];
    }
  };
  return input.graph->apply("relu", input.shape(), {input.id}, forward, backward);
}

Var add(Var a, Var b) {
  require_same_graph(a, b);
  if (!a.value().same_shape(b.value())) {
    shape_error("add", shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  auto forward = [](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    const Tensor& x = g.value(in[0]);
    const Tensor& y = g.value(in[1]);
    Tensor& out = g.mutable_value(self);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  };
  auto backward = [](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    for (NodeId src : in) {
      if (g.requires_grad(src)) accumulate(g.grad(src), g.grad(self));
    }
  };
  return a.graph->apply("add", a.shape(), {a.id, b.id}, forward, backward);
}

Var scale(Var input, double factor) {
  auto forward = [factor](Graph& g, NodeId self) {
    const Tensor& x = g.value(g.inputs(self)[0]);
    Tensor& y = g.mutable_value(self);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = factor * x[i];
  };
  auto backward = [factor](Graph& g, NodeId self) {
    const NodeId in = g.inputs(self)[0];
    if (!g.requires_grad(in)) return;
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(in);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * dy[i];
  };
  return input.graph->apply("scale", input.shape(), {input.id}, forward, backward);
}

Var softmax(Var input) {
  require_rank("softmax", input.value(), 1, "input");
  if (input.value().size() < 1) shape_error("softmax", "input must be non-empty");
  auto forward = [](Graph& g, NodeId self) {
    const Tensor& x = g.value(g.inputs(self)[0]);
    Tensor& y = g.mutable_value(self);
    const double peak = *std::max_element(x.data().begin(), x.data().end());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = std::exp(x[i] - peak);
      total += y[i];
    }
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= total;
  };
  auto backward = [](Graph& g, NodeId self) {
    const NodeId in = g.inputs(self)[0];
    if (!g.requires_grad(in)) return;
    const Tensor& y = g.value(self);
    const Tensor& dy = g.grad(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += dy[i] * y[i];
    Tensor& dx = g.grad(in);
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (dy[i] - dot);
  };
  return input.graph->apply("softmax", input.shape(), {input.id}, forward, backward);
}

Var masked_mse(Var pred, Var target, Var mask) {
  require_same_graph(pred, target);
  require_same_graph(pred, mask);
  const std::size_t n = pred.value().size();
  if (target.value().size() != n || mask.value().size() != n) {
    shape_error("masked_mse", "pred, target and mask must have equal lengths");
  }
  double weight = 0.0;
  for (double m : mask.value().data()) weight += m;
  if (weight <= 0.0) {
    throw std::invalid_argument("masked_mse: mask has no observed entries");
  }
  auto forward = [n](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    const Tensor& p = g.value(in[0]);
    const Tensor& t = g.value(in[1]);
    const Tensor& m = g.value(in[2]);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = p[i] - t[i];
      num += m[i] * e * e;
      den += m[i];
    }
    g.mutable_value(self)[0] = num / den;
  };
  auto backward = [n](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    const Tensor& p = g.value(in[0]);
    const Tensor& t = g.value(in[1]);
    const Tensor& m = g.value(in[2]);
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) den += m[i];
    const double coeff = 2.0 * g.grad(self)[0] / den;
    if (g.requires_grad(in[0])) {
      Tensor& dp = g.grad(in[0]);
      for (std::size_t i = 0; i < n; ++i) {
        if (m[i] != 0.0) dp[i] += coeff * m[i] * (p[i] - t[i]);
      }
    }
    if (g.requires_grad(in[1])) {
      Tensor& dt = g.grad(in[1]);
      for (std::size_t i = 0; i < n; ++i) {
        if (m[i] != 0.0) dt[i] -= coeff * m[i] * (p[i] - t[i]);
      }
    }
  };
  return pred.graph->apply("masked_mse", {}, {pred.id, target.id, mask.id}, forward, backward);
}

Var concat_channels(Var a, Var b) {
  require_same_graph(a, b);
  require_rank("concat_channels", a.value(), 2, "first operand");
  require_rank("concat_channels", b.value(), 2, "second operand");
  if (a.value().dim(1) != b.value().dim(1)) shape_error("concat_channels", "time lengths differ");
  const std::size_t split = a.value().size();
  auto forward = [split](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    auto x = g.value(in[0]).data();
    auto y = g.value(in[1]).data();
    auto out = g.mutable_value(self).data();
    std::copy(x.begin(), x.end(), out.begin());
    std::copy(y.begin(), y.end(), out.begin() + std::ptrdiff_t(split));
  };
  auto backward = [split](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(in[0])) {
      Tensor& dx = g.grad(in[0]);
      for (std::size_t i = 0; i < split; ++i) dx[i] += dy[i];
    }
    if (g.requires_grad(in[1])) {
      Tensor& dz = g.grad(in[1]);
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += dy[split + i];
    }
  };
  return a.graph->apply("concat_channels", {a.value().dim(0) + b.value().dim(0), a.value().dim(1)}, {a.id, b.id},
                        forward, backward);
}

Var mean_over_time(Var input) {
  require_rank("mean_over_time", input.value(), 2, "input");
  const std::size_t channels = input.value().dim(0);
  auto forward = [](Graph& g, NodeId self) {
    auto x = as_matrix(g.value(g.inputs(self)[0]));
    as_vector(g.mutable_value(self)) = x.rowwise().mean();
  };
  auto backward = [](Graph& g, NodeId self) {
    const NodeId in = g.inputs(self)[0];
    if (!g.requires_grad(in)) return;
    auto dx = as_matrix(g.grad(in));
    auto dy = as_vector(std::as_const(g.grad(self)));
    const double inv = 1.0 / double(dx.cols());
    dx.colwise() += dy * inv;
  };
  return input.graph->apply("mean_over_time", {channels}, {input.id}, forward, backward);
}

Var linear(Var weights, Var input, Var bias) {
  require_same_graph(weights, input);
  require_same_graph(weights, bias);
  require_rank("linear", weights.value(), 2, "weights");
  require_rank("linear", input.value(), 1, "input");
  require_rank("linear", bias.value(), 1, "bias");
  if (weights.value().dim(1) != input.value().dim(0) || weights.value().dim(0) != bias.value().dim(0)) {
    shape_error("linear", "weights " + shape_string(weights.shape()) + " incompatible with input " +
                              shape_string(input.shape()) + " / bias " + shape_string(bias.shape()));
  }
  auto forward = [](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    auto y = as_vector(g.mutable_value(self));
    y.noalias() = as_matrix(g.value(in[0])) * as_vector(g.value(in[1]));
    y += as_vector(g.value(in[2]));
  };
  auto backward = [](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    auto dy = as_vector(std::as_const(g.grad(self)));
    if (g.requires_grad(in[0])) as_matrix(g.grad(in[0])).noalias() += dy * as_vector(g.value(in[1])).transpose();
    if (g.requires_grad(in[1])) as_vector(g.grad(in[1])).noalias() += as_matrix(g.value(in[0])).transpose() * dy;
    if (g.requires_grad(in[2])) as_vector(g.grad(in[2])) += dy;
  };
  return weights.graph->apply("linear", {weights.value().dim(0)}, {weights.id, input.id, bias.id}, forward,
                              backward);
}

Var matvec(Var matrix, Var vec) {
  require_same_graph(matrix, vec);
  require_rank("matvec", matrix.value(), 2, "matrix");
  require_rank("matvec", vec.value(), 1, "vector");
  if (matrix.value().dim(1) != vec.value().dim(0)) {
    shape_error("matvec", shape_string(matrix.shape()) + " times " + shape_string(vec.shape()));
  }
  auto forward = [](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    as_vector(g.mutable_value(self)).noalias() = as_matrix(g.value(in[0])) * as_vector(g.value(in[1]));
  };
  auto backward = [](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    auto dy = as_vector(std::as_const(g.grad(self)));
    if (g.requires_grad(in[0])) as_matrix(g.grad(in[0])).noalias() += dy * as_vector(g.value(in[1])).transpose();
    if (g.requires_grad(in[1])) as_vector(g.grad(in[1])).noalias() += as_matrix(g.value(in[0])).transpose() * dy;
  };
  return matrix.graph->apply("matvec", {matrix.value().dim(0)}, {matrix.id, vec.id}, forward, backward);
}

Var matvec_transposed(Var matrix, Var vec) {
  require_same_graph(matrix, vec);
  require_rank("matvec_transposed", matrix.value(), 2, "matrix");
  require_rank("matvec_transposed", vec.value(), 1, "vector");
  if (matrix.value().dim(0) != vec.value().dim(0)) {
    shape_error("matvec_transposed", shape_string(matrix.shape()) + "^T times " + shape_string(vec.shape()));
  }
  auto forward = [](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    as_vector(g.mutable_value(self)).noalias() =
        as_matrix(g.value(in[0])).transpose() * as_vector(g.value(in[1]));
  };
  auto backward = [](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    auto dy = as_vector(std::as_const(g.grad(self)));
    if (g.requires_grad(in[0])) as_matrix(g.grad(in[0])).noalias() += as_vector(g.value(in[1])) * dy.transpose();
    if (g.requires_grad(in[1])) as_vector(g.grad(in[1])).noalias() += as_matrix(g.value(in[0])) * dy;
  };
  return matrix.graph->apply("matvec_transposed", {matrix.value().dim(1)}, {matrix.id, vec.id}, forward,
                             backward);
}

Var broadcast_concat(Var features, Var vec) {
  require_same_graph(features, vec);
  require_rank("broadcast_concat", features.value(), 2, "features");
  require_rank("broadcast_concat", vec.value(), 1, "vector");
  const std::size_t channels = features.value().dim(0);
  const std::size_t steps = features.value().dim(1);
  const std::size_t extra = vec.value().dim(0);
  auto forward = [channels, steps, extra](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    auto x = g.value(in[0]).data();
    const Tensor& v = g.value(in[1]);
    Tensor& out = g.mutable_value(self);
    std::copy(x.begin(), x.end(), out.raw());
    for (std::size_t j = 0; j < extra; ++j) {
      std::fill_n(out.raw() + (channels + j) * steps, steps, v[j]);
    }
  };
  auto backward = [channels, steps, extra](Graph& g, NodeId self) {
    const auto& in = g.inputs(self);
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(in[0])) {
      Tensor& dx = g.grad(in[0]);
      for (std::size_t i = 0; i < channels * steps; ++i) dx[i] += dy[i];
    }
    if (g.requires_grad(in[1])) {
      Tensor& dv = g.grad(in[1]);
      for (std::size_t j = 0; j < extra; ++j) {
        const double* row = dy.raw() + (channels + j) * steps;
        double total = 0.0;
        for (std::size_t t = 0; t < steps; ++t) total += row[t];
        dv[j] += total;
      }
    }
  };
  return features.graph->apply("broadcast_concat", {channels + extra, steps}, {features.id, vec.id}, forward,
                               backward);
}

Var reshape(Var input, Shape shape) {
  if (shape_numel(shape) != input.value().size()) {
    shape_error("reshape", "cannot view " + shape_string(input.shape()) + " as " + shape_string(shape));
  }
  auto forward = [](Graph& g, NodeId self) {
    auto x = g.value(g.inputs(self)[0]).data();
    std::copy(x.begin(), x.end(), g.mutable_value(self).raw());
  };
  auto backward = [](Graph& g, NodeId self) {
    const NodeId in = g.inputs(self)[0];
    if (g.requires_grad(in)) accumulate(g.grad(in), g.grad(self));
  };
  return input.graph->apply("reshape", std::move(shape), {input.id}, forward, backward);
}

}  // namespace cvsig::ad
