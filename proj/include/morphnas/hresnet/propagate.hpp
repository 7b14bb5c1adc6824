#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/core/rng.hpp"
#include "morphnas/hresnet/tree.hpp"
#include "morphnas/numkit/ops.hpp"

namespace morphnas {

enum class Mode { train, eval };

/// Per-node record of a forward pass. Residual nodes keep the residual path's
/// intermediate values and one child trace per inner connection.
template <class T>
struct NodeTrace {
  Matrix<T> input;
  Matrix<T> keep;  // dropout scale, empty when dropout was inactive
  Matrix<T> act;   // relu output before decay scaling
  std::vector<NodeTrace> children;
};

template <class T>
struct ForwardCache {
  std::vector<NodeTrace<T>> blocks;
  std::uint64_t revision = 0;
  Mode mode = Mode::eval;
};

/// Receives (layer, hidden activations, gradient w.r.t. those activations)
/// for every residual node during backward.
template <class T>
using ActivationSink = std::function<void(LayerId, const Matrix<T>&, const Matrix<T>&)>;

namespace detail {

template <class T>
Matrix<T> forward_node(const Node<T>& node, const Matrix<T>& x, Mode mode, Rng* rng,
                       NodeTrace<T>* trace) {
  if (node.is_linear()) {
    const auto& l = node.linear();
    if (trace) trace->input = x;
    return numkit::linear_forward(l.weight, l.bias, x);
  }
  const auto& r = node.residual();
  if (x.cols() != r.fan_in()) {
    throw ShapeError("forward: residual " + to_string(r.id) + " expects " +
                     std::to_string(r.fan_in()) + " inputs, got " + x.shape());
  }
  if (trace) {
    trace->input = x;
    trace->children.resize(2);
  }
  Matrix<T> y = numkit::linear_forward(r.shortcut.weight, r.shortcut.bias, x);
  Matrix<T> pre = forward_node(r.inner0, x, mode, rng, trace ? &trace->children[0] : nullptr);

  const bool drop = mode == Mode::train && r.dropout_p > T{0};
  if (drop && rng == nullptr) throw InvalidArgument("forward: train mode with dropout needs an rng");
  Rng unused;
  auto dropped = numkit::dropout_forward(std::move(pre), static_cast<double>(r.dropout_p), drop,
                                         drop ? *rng : unused);
  Matrix<T> act = numkit::relu_forward(std::move(dropped.y));

  Matrix<T> scaled = act;
  for (const auto& [j, factor] : r.decay)
    for (std::size_t i = 0; i < scaled.rows(); ++i) scaled(i, j) *= factor;

  if (trace) {
    trace->keep = std::move(dropped.mask);
    trace->act = std::move(act);
  }
  Matrix<T> res = forward_node(r.inner1, scaled, mode, rng, trace ? &trace->children[1] : nullptr);
  numkit::add_inplace(y, res);
  return y;
}

template <class T>
void backward_linear(Linear<T>& l, const Matrix<T>& x, const Matrix<T>& dy, bool need_dx,
                     Matrix<T>* dx) {
  auto g = numkit::linear_backward(l.weight, x, dy, need_dx);
  if (!l.weight_grad.same_shape(l.weight)) l.weight_grad.reset(l.weight.rows(), l.weight.cols());
  if (!l.bias_grad.same_shape(l.bias)) l.bias_grad.reset(l.bias.rows(), 1);
  numkit::add_inplace(l.weight_grad, g.dweight);
  numkit::add_inplace(l.bias_grad, g.dbias);
  if (need_dx) *dx = std::move(g.dx);
}

template <class T>
Matrix<T> backward_node(Node<T>& node, const NodeTrace<T>& trace, const Matrix<T>& dy,
                        const ActivationSink<T>* sink, bool need_dx) {
  Matrix<T> dx;
  if (node.is_linear()) {
    backward_linear(node.linear(), trace.input, dy, need_dx, &dx);
    return dx;
  }
  auto& r = node.residual();
  if (trace.children.size() != 2) throw StaleStateError("backward: trace does not match tree");
  backward_linear(r.shortcut, trace.input, dy, need_dx, &dx);

  Matrix<T> d_act = backward_node(r.inner1, trace.children[1], dy, sink, true);
  for (const auto& [j, factor] : r.decay)
    for (std::size_t i = 0; i < d_act.rows(); ++i) d_act(i, j) *= factor;
  if (sink && *sink) (*sink)(r.id, trace.act, d_act);

  Matrix<T> d_pre = numkit::relu_backward(std::move(d_act), trace.act);
  d_pre = numkit::dropout_backward(std::move(d_pre), trace.keep);
  // Decaying neurons are frozen: nothing reaches their incoming weights.
  for (const auto& entry : r.decay)
    for (std::size_t i = 0; i < d_pre.rows(); ++i) d_pre(i, entry.first) = T{0};

  Matrix<T> dx_inner = backward_node(r.inner0, trace.children[0], d_pre, sink, need_dx);
  if (need_dx) numkit::add_inplace(dx, dx_inner);
  return dx;
}

}  // namespace detail

/// Runs the network. Train mode draws dropout masks from `rng`; eval mode is a
/// pure function of weights and input. When `cache` is given it records what
/// backward needs.
template <class T>
Matrix<T> forward(const Network<T>& net, const Matrix<T>& x, Mode mode, Rng* rng = nullptr,
                  ForwardCache<T>* cache = nullptr) {
  if (net.blocks.empty()) throw InvalidArgument("forward: network has no blocks");
  if (x.cols() != net.input_dim()) {
    throw ShapeError("forward: network expects " + std::to_string(net.input_dim()) +
                     " input columns, got " + x.shape());
  }
  if (cache) {
    cache->blocks.assign(net.blocks.size(), {});
    cache->revision = net.revision;
    cache->mode = mode;
  }
  Matrix<T> h = x;
  for (std::size_t b = 0; b < net.blocks.size(); ++b)
    h = detail::forward_node(net.blocks[b], h, mode, rng, cache ? &cache->blocks[b] : nullptr);
  return h;
}

template <class T>
Matrix<T> predict(const Network<T>& net, const Matrix<T>& x) {
  return forward(net, x, Mode::eval);
}

/// Clears every gradient accumulator (and sizes it to its parameter).
template <class T>
void zero_grad(Network<T>& net) {
  for_each_linear(net, [](Linear<T>& l) {
    l.weight_grad.reset(l.weight.rows(), l.weight.cols());
    l.bias_grad.reset(l.bias.rows(), 1);
  });
}

/// Accumulates parameter gradients for dL/dY = dy into each Linear's grad
/// buffers. Returns dL/dX when `need_input_grad` is set.
template <class T>
Matrix<T> backward(Network<T>& net, const ForwardCache<T>& cache, const Matrix<T>& dy,
                   const ActivationSink<T>& sink = {}, bool need_input_grad = false) {
  if (cache.revision != net.revision || cache.blocks.size() != net.blocks.size()) {
    throw StaleStateError("backward: forward cache predates the last structural change");
  }
  Matrix<T> d = dy;
  for (std::size_t b = net.blocks.size(); b-- > 0;) {
    const bool need = b > 0 || need_input_grad;
    d = detail::backward_node(net.blocks[b], cache.blocks[b], d, &sink, need);
  }
  return d;
}

/// One Adam step on every tensor using the accumulated gradients.
template <class T>
void adam_update(Network<T>& net, T lr) {
  for_each_linear(net, [lr](Linear<T>& l) {
    if (!l.weight_grad.same_shape(l.weight)) l.weight_grad.reset(l.weight.rows(), l.weight.cols());
    if (!l.bias_grad.same_shape(l.bias)) l.bias_grad.reset(l.bias.rows(), 1);
    numkit::adam_step(l.weight, l.weight_grad, l.weight_opt, lr);
    numkit::adam_step(l.bias, l.bias_grad, l.bias_opt, lr);
  });
}

}  // namespace morphnas
