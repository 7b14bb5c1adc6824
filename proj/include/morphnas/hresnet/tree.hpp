#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "morphnas/core/box.hpp"
#include "morphnas/core/error.hpp"
#include "morphnas/core/rng.hpp"
#include "morphnas/numkit/adam.hpp"
#include "morphnas/numkit/matrix.hpp"

namespace morphnas {

enum class ActivationKind : std::uint8_t { relu = 0 };

enum class LossKind : std::uint8_t { softmax_cross_entropy = 0, mean_squared_error = 1 };

/// Stable identity of a residual node. Never reused within a network.
enum class LayerId : std::uint32_t {};

inline std::uint32_t to_underlying(LayerId id) { return static_cast<std::uint32_t>(id); }
inline std::string to_string(LayerId id) { return "L" + std::to_string(to_underlying(id)); }

/// A weighted connection: weight is fan_out x fan_in, bias fan_out x 1.
template <class T>
struct Linear {
  Matrix<T> weight;
  Matrix<T> bias;
  numkit::AdamState<T> weight_opt;
  numkit::AdamState<T> bias_opt;
  // Gradient accumulators; not part of the model's identity.
  Matrix<T> weight_grad;
  Matrix<T> bias_grad;

  std::size_t fan_in() const { return weight.cols(); }
  std::size_t fan_out() const { return weight.rows(); }
};

template <class T>
struct Residual;

/// One connection of a hierarchical residual network: Linear, or Residual
/// (a linear shortcut plus a two-stage residual path whose stages are themselves nodes).
template <class T>
class Node {
 public:
  Node(Linear<T> linear) : v_(std::move(linear)) {}        // NOLINT(google-explicit-constructor)
  Node(Residual<T> residual) : v_(Box<Residual<T>>(std::move(residual))) {}  // NOLINT

  bool is_linear() const { return std::holds_alternative<Linear<T>>(v_); }
  bool is_residual() const { return !is_linear(); }

  Linear<T>& linear() { return std::get<Linear<T>>(v_); }
  const Linear<T>& linear() const { return std::get<Linear<T>>(v_); }
  Residual<T>& residual() { return *std::get<Box<Residual<T>>>(v_); }
  const Residual<T>& residual() const { return *std::get<Box<Residual<T>>>(v_); }

  std::size_t fan_in() const;
  std::size_t fan_out() const;

 private:
  std::variant<Linear<T>, Box<Residual<T>>> v_;
};

/// f(x) = shortcut(x) + inner1(decay * relu(dropout(inner0(x)))).
template <class T>
struct Residual {
  LayerId id{};
  Linear<T> shortcut;
  Node<T> inner0;  // fan_in -> hidden
  Node<T> inner1;  // hidden -> fan_out
  std::size_t hidden = 0;
  ActivationKind activation = ActivationKind::relu;
  T dropout_p = T{0};
  // Hidden neurons being faded out before pruning: index -> factor in (0, 1].
  std::map<std::size_t, T> decay;

  std::size_t fan_in() const { return shortcut.fan_in(); }
  std::size_t fan_out() const { return shortcut.fan_out(); }
};

template <class T>
std::size_t Node<T>::fan_in() const {
  return is_linear() ? linear().fan_in() : residual().fan_in();
}

template <class T>
std::size_t Node<T>::fan_out() const {
  return is_linear() ? linear().fan_out() : residual().fan_out();
}

/// Defaults applied to every node created by a morphism.
struct GrowthDefaults {
  double dropout_p = 0.0;
  std::size_t seed_hidden = 2;
  numkit::AdamSettings adam{};
};

/// An ordered chain of blocks, input dim -> ... -> output dim.
template <class T>
struct Network {
  std::vector<Node<T>> blocks;
  LossKind loss = LossKind::softmax_cross_entropy;
  GrowthDefaults defaults{};
  std::uint32_t next_layer_id = 0;
  // Bumped by every structural change; forward caches remember it.
  std::uint64_t revision = 0;

  std::size_t input_dim() const { return blocks.empty() ? 0 : blocks.front().fan_in(); }
  std::size_t output_dim() const { return blocks.empty() ? 0 : blocks.back().fan_out(); }

  LayerId fresh_id() { return LayerId{next_layer_id++}; }
};

// ---------------------------------------------------------------------------
// Construction.

enum class Init { uniform, zero };

/// Incoming-weight bound for a unit with `fan_in` inputs: sqrt(1 / fan_in).
inline double init_bound(std::size_t fan_in) {
  return fan_in == 0 ? 0.0 : std::sqrt(1.0 / static_cast<double>(fan_in));
}

template <class T>
Linear<T> make_linear(std::size_t fan_in, std::size_t fan_out, Init init, Rng& rng,
                      const numkit::AdamSettings& adam = {}) {
  Linear<T> l;
  l.weight = Matrix<T>(fan_out, fan_in);
  l.bias = Matrix<T>(fan_out, 1);
  if (init == Init::uniform) {
    const double b = init_bound(fan_in);
    for (auto& w : l.weight.values()) w = static_cast<T>(rng.uniform(-b, b));
    for (auto& w : l.bias.values()) w = static_cast<T>(rng.uniform(-b, b));
  }
  l.weight_opt = numkit::AdamState<T>::fresh(fan_out, fan_in, adam);
  l.bias_opt = numkit::AdamState<T>::fresh(fan_out, 1, adam);
  return l;
}

/// Residual node with Linear inner connections. The residual path's second
/// stage is zero when `zero_residual` is set, so the node computes exactly its shortcut.
template <class T>
Residual<T> make_residual(Network<T>& net, std::size_t fan_in, std::size_t hidden,
                          std::size_t fan_out, Rng& rng, bool zero_residual = false) {
  const auto& adam = net.defaults.adam;
  Residual<T> r{.id = net.fresh_id(),
                .shortcut = make_linear<T>(fan_in, fan_out, Init::uniform, rng, adam),
                .inner0 = make_linear<T>(fan_in, hidden, Init::uniform, rng, adam),
                .inner1 = make_linear<T>(hidden, fan_out, zero_residual ? Init::zero : Init::uniform,
                                         rng, adam),
                .hidden = hidden,
                .activation = ActivationKind::relu,
                .dropout_p = static_cast<T>(net.defaults.dropout_p),
                .decay = {}};
  return r;
}

/// Network made of a single Linear block.
template <class T>
Network<T> make_linear_network(std::size_t in, std::size_t out, LossKind loss, Rng& rng,
                               GrowthDefaults defaults = {}) {
  Network<T> net;
  net.loss = loss;
  net.defaults = defaults;
  net.blocks.emplace_back(make_linear<T>(in, out, Init::uniform, rng, defaults.adam));
  return net;
}

/// Network made of a single residual block with `hidden` units.
template <class T>
Network<T> make_residual_network(std::size_t in, std::size_t hidden, std::size_t out, LossKind loss,
                                 Rng& rng, GrowthDefaults defaults = {}) {
  Network<T> net;
  net.loss = loss;
  net.defaults = defaults;
  net.blocks.emplace_back(make_residual(net, in, hidden, out, rng));
  return net;
}

// ---------------------------------------------------------------------------
// Traversal.

/// Visits every residual node in pre-order (node, then inner0 subtree, then inner1 subtree).
template <class T, class Fn>
void for_each_residual(Node<T>& node, Fn&& fn) {
  if (node.is_linear()) return;
  auto& r = node.residual();
  fn(r);
  for_each_residual(r.inner0, fn);
  for_each_residual(r.inner1, fn);
}

template <class T, class Fn>
void for_each_residual(const Node<T>& node, Fn&& fn) {
  if (node.is_linear()) return;
  const auto& r = node.residual();
  fn(r);
  for_each_residual(r.inner0, fn);
  for_each_residual(r.inner1, fn);
}

template <class T, class Fn>
void for_each_residual(Network<T>& net, Fn&& fn) {
  for (auto& b : net.blocks) for_each_residual(b, fn);
}

template <class T, class Fn>
void for_each_residual(const Network<T>& net, Fn&& fn) {
  for (const auto& b : net.blocks) for_each_residual(b, fn);
}

template <class T, class Fn>
void for_each_linear(Node<T>& node, Fn&& fn) {
  if (node.is_linear()) {
    fn(node.linear());
    return;
  }
  auto& r = node.residual();
  fn(r.shortcut);
  for_each_linear(r.inner0, fn);
  for_each_linear(r.inner1, fn);
}

template <class T, class Fn>
void for_each_linear(const Node<T>& node, Fn&& fn) {
  if (node.is_linear()) {
    fn(node.linear());
    return;
  }
  const auto& r = node.residual();
  fn(r.shortcut);
  for_each_linear(r.inner0, fn);
  for_each_linear(r.inner1, fn);
}

template <class T, class Fn>
void for_each_linear(Network<T>& net, Fn&& fn) {
  for (auto& b : net.blocks) for_each_linear(b, fn);
}

template <class T, class Fn>
void for_each_linear(const Network<T>& net, Fn&& fn) {
  for (const auto& b : net.blocks) for_each_linear(b, fn);
}

/// Where a residual node lives: the Node holding it and whether it is a top-level block.
template <class T>
struct NodeLocation {
  Node<T>* node = nullptr;
  bool is_block = false;
};

namespace detail {
template <class T>
Node<T>* find_node(Node<T>& node, LayerId id) {
  if (node.is_linear()) return nullptr;
  auto& r = node.residual();
  if (r.id == id) return &node;
  if (auto* n = find_node(r.inner0, id)) return n;
  return find_node(r.inner1, id);
}
}  // namespace detail

template <class T>
NodeLocation<T> locate(Network<T>& net, LayerId id) {
  for (auto& b : net.blocks) {
    if (b.is_residual() && b.residual().id == id) return {&b, true};
    if (auto* n = detail::find_node(b, id)) return {n, false};
  }
  return {};
}

template <class T>
Residual<T>& find_residual(Network<T>& net, LayerId id) {
  auto loc = locate(net, id);
  if (loc.node == nullptr) throw InvalidArgument("unknown layer id " + to_string(id));
  return loc.node->residual();
}

template <class T>
const Residual<T>* find_residual(const Network<T>& net, LayerId id) {
  auto loc = locate(const_cast<Network<T>&>(net), id);
  return loc.node == nullptr ? nullptr : &loc.node->residual();
}

/// Converts between scalar precisions, keeping structure, ids and optimizer state.
template <class U, class T>
Node<U> cast_node(const Node<T>& node) {
  auto cast_linear = [](const Linear<T>& l) {
    Linear<U> o;
    o.weight = l.weight.template cast<U>();
    o.bias = l.bias.template cast<U>();
    auto cast_state = [](const numkit::AdamState<T>& s) {
      numkit::AdamState<U> c;
      c.step = s.step;
      c.m = s.m.template cast<U>();
      c.v = s.v.template cast<U>();
      c.beta1 = static_cast<U>(s.beta1);
      c.beta2 = static_cast<U>(s.beta2);
      c.eps = static_cast<U>(s.eps);
      return c;
    };
    o.weight_opt = cast_state(l.weight_opt);
    o.bias_opt = cast_state(l.bias_opt);
    return o;
  };
  if (node.is_linear()) return Node<U>(cast_linear(node.linear()));
  const auto& r = node.residual();
  Residual<U> c{.id = r.id,
                .shortcut = cast_linear(r.shortcut),
                .inner0 = cast_node<U>(r.inner0),
                .inner1 = cast_node<U>(r.inner1),
                .hidden = r.hidden,
                .activation = r.activation,
                .dropout_p = static_cast<U>(r.dropout_p),
                .decay = {}};
  for (const auto& [k, f] : r.decay) c.decay[k] = static_cast<U>(f);
  return Node<U>(std::move(c));
}

template <class U, class T>
Network<U> cast_network(const Network<T>& net) {
  Network<U> out;
  out.loss = net.loss;
  out.defaults = net.defaults;
  out.next_layer_id = net.next_layer_id;
  out.revision = net.revision;
  for (const auto& b : net.blocks) out.blocks.push_back(cast_node<U>(b));
  return out;
}

}  // namespace morphnas
