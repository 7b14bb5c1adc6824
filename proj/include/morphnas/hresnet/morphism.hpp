#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/core/rng.hpp"
#include "morphnas/heuristics/threshold.hpp"
#include "morphnas/hresnet/inspect.hpp"
#include "morphnas/hresnet/propagate.hpp"
#include "morphnas/hresnet/tree.hpp"
#include "morphnas/numkit/adam.hpp"

namespace morphnas {

enum class MorphKind { promote, widen, grow_layer, prune, remove_layer };

inline const char* to_string(MorphKind k) {
  switch (k) {
    case MorphKind::promote: return "promote";
    case MorphKind::widen: return "widen";
    case MorphKind::grow_layer: return "grow_layer";
    case MorphKind::prune: return "prune";
    case MorphKind::remove_layer: return "remove_layer";
  }
  return "?";
}

/// Outcome of one structural change.
struct MorphReport {
  MorphKind kind{};
  LayerId layer{};
  bool applied = false;
  std::string reason;  // why nothing happened, when !applied
  std::size_t params_before = 0;
  std::size_t params_after = 0;
  std::map<LayerId, std::size_t> hidden_added;
  std::map<LayerId, std::size_t> hidden_removed;
  std::vector<LayerId> created;
  std::vector<LayerId> removed;

  static MorphReport of(MorphKind kind, LayerId layer = {}) {
    MorphReport r;
    r.kind = kind;
    r.layer = layer;
    return r;
  }
};

/// A hidden unit of a residual node.
struct NeuronRef {
  LayerId layer{};
  std::size_t neuron = 0;
  auto operator<=>(const NeuronRef&) const = default;
};

namespace detail {

template <class T>
void remap_linear(Linear<T>& l, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  const std::size_t one[] = {0};
  l.weight = numkit::remap_matrix(l.weight, rows, cols);
  l.bias = numkit::remap_matrix(l.bias, rows, std::span<const std::size_t>(one));
  l.weight_opt = numkit::remap_adam_state(l.weight_opt, rows, cols);
  l.bias_opt = numkit::remap_adam_state(l.bias_opt, rows, std::span<const std::size_t>(one));
  l.weight_grad = Matrix<T>();
  l.bias_grad = Matrix<T>();
}

// New output units get uniform incoming weights and zero bias.
template <class T>
void extend_output(Linear<T>& l, std::size_t k, Rng& rng) {
  const std::size_t old = l.fan_out();
  const auto rows = numkit::extend_map(old, k);
  const auto cols = numkit::identity_map(l.fan_in());
  remap_linear(l, rows, cols);
  const double b = init_bound(l.fan_in());
  for (std::size_t i = old; i < old + k; ++i)
    for (auto& w : l.weight.row(i)) w = static_cast<T>(rng.uniform(-b, b));
}

template <class T>
void extend_output(Node<T>& node, std::size_t k, Rng& rng) {
  if (node.is_residual()) {
    auto& r = node.residual();
    extend_output(r.shortcut, k, rng);
    extend_output(r.inner1, k, rng);
    return;
  }
  extend_output(node.linear(), k, rng);
}

// New input units get zero outgoing weights, preserving the function.
template <class T>
void extend_input(Linear<T>& l, std::size_t k) {
  const auto rows = numkit::identity_map(l.fan_out());
  const auto cols = numkit::extend_map(l.fan_in(), k);
  remap_linear(l, rows, cols);
}

template <class T>
void extend_input(Node<T>& node, std::size_t k) {
  if (node.is_residual()) {
    auto& r = node.residual();
    extend_input(r.shortcut, k);
    extend_input(r.inner0, k);
    return;
  }
  extend_input(node.linear(), k);
}

template <class T>
void keep_output(Linear<T>& l, std::span<const std::size_t> keep) {
  const auto cols = numkit::identity_map(l.fan_in());
  remap_linear(l, keep, cols);
}

template <class T>
void keep_output(Node<T>& node, std::span<const std::size_t> keep) {
  if (node.is_residual()) {
    auto& r = node.residual();
    keep_output(r.shortcut, keep);
    keep_output(r.inner1, keep);
    return;
  }
  keep_output(node.linear(), keep);
}

template <class T>
void keep_input(Linear<T>& l, std::span<const std::size_t> keep) {
  const auto rows = numkit::identity_map(l.fan_out());
  remap_linear(l, rows, keep);
}

template <class T>
void keep_input(Node<T>& node, std::span<const std::size_t> keep) {
  if (node.is_residual()) {
    auto& r = node.residual();
    keep_input(r.shortcut, keep);
    keep_input(r.inner0, keep);
    return;
  }
  keep_input(node.linear(), keep);
}

template <class T>
void zero_output_momentum(Linear<T>& l, std::size_t row) {
  for (auto& m : l.weight_opt.m.row(row)) m = T{0};
  l.bias_opt.m(row, 0) = T{0};
}

// Clears first moments feeding output unit `row`, so Adam leaves it still
// once its gradient is held at zero.
template <class T>
void zero_output_momentum(Node<T>& node, std::size_t row) {
  if (node.is_residual()) {
    auto& r = node.residual();
    zero_output_momentum(r.shortcut, row);
    zero_output_momentum(r.inner1, row);
    return;
  }
  zero_output_momentum(node.linear(), row);
}

template <class T>
void collect_ids(const Node<T>& node, std::vector<LayerId>& out) {
  for_each_residual(node, [&out](const Residual<T>& r) { out.push_back(r.id); });
}

// Output of a residual path once it has no hidden units left: a constant row.
template <class T>
Matrix<T> empty_path_output(const Node<T>& inner1) {
  Matrix<T> none(1, 0);
  return detail::forward_node(inner1, none, Mode::eval, nullptr, static_cast<NodeTrace<T>*>(nullptr));
}

template <class T>
Linear<T> fresh_linear(std::size_t fan_in, std::size_t fan_out, Init init, Rng& rng,
                       const GrowthDefaults& d) {
  auto l = make_linear<T>(fan_in, fan_out, init, rng, d.adam);
  l.bias.fill(T{0});
  return l;
}

inline std::vector<std::size_t> kept_indices(std::size_t hidden, const std::set<std::size_t>& drop) {
  std::vector<std::size_t> keep;
  keep.reserve(hidden - drop.size());
  for (std::size_t j = 0; j < hidden; ++j)
    if (!drop.count(j)) keep.push_back(j);
  return keep;
}

template <class T>
void drop_hidden(Residual<T>& r, const std::set<std::size_t>& drop) {
  const auto keep = kept_indices(r.hidden, drop);
  keep_output(r.inner0, keep);
  keep_input(r.inner1, keep);
  std::map<std::size_t, T> decay;
  for (std::size_t n = 0; n < keep.size(); ++n) {
    auto it = r.decay.find(keep[n]);
    if (it != r.decay.end()) decay[n] = it->second;
  }
  r.decay = std::move(decay);
  r.hidden = keep.size();
}

template <class T>
std::map<LayerId, std::set<std::size_t>> group_victims(Network<T>& net, std::span<const NeuronRef> victims) {
  std::map<LayerId, std::set<std::size_t>> by_layer;
  for (const auto& v : victims) {
    auto loc = locate(net, v.layer);
    if (loc.node == nullptr) throw InvalidArgument("unknown layer id " + to_string(v.layer));
    const auto& r = loc.node->residual();
    if (v.neuron >= r.hidden) {
      throw InvalidArgument("neuron " + std::to_string(v.neuron) + " out of range for " +
                            to_string(v.layer) + " (H = " + std::to_string(r.hidden) + ")");
    }
    if (!by_layer[v.layer].insert(v.neuron).second) {
      throw InvalidArgument("neuron " + std::to_string(v.neuron) + " of " + to_string(v.layer) +
                            " listed twice");
    }
  }
  return by_layer;
}

}  // namespace detail

/// Turns Linear top-level blocks into residual blocks with an empty residual
/// path (H = 0), so they can be widened. Function preserving.
template <class T>
std::vector<MorphReport> promote_blocks(Network<T>& net, Rng& rng) {
  std::vector<MorphReport> reports;
  for (auto& b : net.blocks) {
    if (b.is_residual()) continue;
    MorphReport rep = MorphReport::of(MorphKind::promote);
    rep.params_before = count_params(net);
    Linear<T> shortcut = std::move(b.linear());
    const std::size_t in = shortcut.fan_in();
    const std::size_t out = shortcut.fan_out();
    Residual<T> r{.id = net.fresh_id(),
                  .shortcut = std::move(shortcut),
                  .inner0 = detail::fresh_linear<T>(in, 0, Init::uniform, rng, net.defaults),
                  .inner1 = detail::fresh_linear<T>(0, out, Init::zero, rng, net.defaults),
                  .hidden = 0,
                  .activation = ActivationKind::relu,
                  .dropout_p = static_cast<T>(net.defaults.dropout_p),
                  .decay = {}};
    rep.layer = r.id;
    rep.created.push_back(r.id);
    b = Node<T>(std::move(r));
    ++net.revision;
    rep.applied = true;
    rep.params_after = count_params(net);
    reports.push_back(std::move(rep));
  }
  return reports;
}

/// Adds k hidden units to a residual node. New incoming weights are random,
/// new outgoing weights zero, so eval outputs are unchanged.
template <class T>
MorphReport widen(Network<T>& net, LayerId id, std::size_t k, Rng& rng) {
  auto& r = find_residual(net, id);
  MorphReport rep = MorphReport::of(MorphKind::widen, id);
  rep.params_before = count_params(net);
  if (k > 0) {
    detail::extend_output(r.inner0, k, rng);
    detail::extend_input(r.inner1, k);
    r.hidden += k;
    ++net.revision;
    rep.hidden_added[id] = k;
  }
  rep.applied = true;
  rep.params_after = count_params(net);
  return rep;
}

/// Replaces both Linear inner connections of a node with residual nodes whose
/// shortcut is the old connection and whose residual path (seed width) ends in
/// zeros. Requires H > (fan_in * fan_out^2)^(1/3).
template <class T>
MorphReport grow_layer(Network<T>& net, LayerId id, Rng& rng) {
  auto& r = find_residual(net, id);
  MorphReport rep = MorphReport::of(MorphKind::grow_layer, id);
  rep.params_before = rep.params_after = count_params(net);
  if (!r.inner0.is_linear() || !r.inner1.is_linear()) {
    rep.reason = "inner connections are already residual";
    return rep;
  }
  if (r.fan_in() == 0 || r.fan_out() == 0) {
    rep.reason = "node has an empty side";
    return rep;
  }
  if (!heuristics::exceeds_growth_threshold(r.hidden, r.fan_in(), r.fan_out())) {
    rep.reason = "H = " + std::to_string(r.hidden) + " does not exceed threshold " +
                 std::to_string(heuristics::growth_threshold(r.fan_in(), r.fan_out()));
    return rep;
  }
  const std::size_t h0 = net.defaults.seed_hidden;
  auto wrap = [&](Linear<T> old) {
    const std::size_t in = old.fan_in();
    const std::size_t out = old.fan_out();
    Residual<T> child{.id = net.fresh_id(),
                      .shortcut = std::move(old),
                      .inner0 = detail::fresh_linear<T>(in, h0, Init::uniform, rng, net.defaults),
                      .inner1 = detail::fresh_linear<T>(h0, out, Init::zero, rng, net.defaults),
                      .hidden = h0,
                      .activation = ActivationKind::relu,
                      .dropout_p = static_cast<T>(net.defaults.dropout_p),
                      .decay = {}};
    rep.created.push_back(child.id);
    return Node<T>(std::move(child));
  };
  r.inner0 = wrap(std::move(r.inner0.linear()));
  r.inner1 = wrap(std::move(r.inner1.linear()));
  ++net.revision;
  rep.applied = true;
  rep.params_after = count_params(net);
  return rep;
}

/// Registers hidden units to be faded out (factor starts at 1) and freezes
/// their incoming weights.
template <class T>
void mark_decay(Network<T>& net, std::span<const NeuronRef> victims) {
  const auto by_layer = detail::group_victims(net, victims);
  for (const auto& [id, neurons] : by_layer) {
    auto& r = find_residual(net, id);
    for (const std::size_t j : neurons) {
      r.decay.try_emplace(j, T{1});
      detail::zero_output_momentum(r.inner0, j);
    }
  }
}

/// Multiplies every registered decay factor by gamma.
template <class T>
void apply_decay_step(Network<T>& net, T gamma) {
  if (!(gamma > T{0} && gamma <= T{1})) throw InvalidArgument("apply_decay_step: gamma must lie in (0, 1]");
  for_each_residual(net, [gamma](Residual<T>& r) {
    for (auto& entry : r.decay)
      entry.second = std::max(entry.second * gamma, std::numeric_limits<T>::min());
  });
}

/// Per-step factor that shrinks 1 to `target` over `steps` steps.
inline double decay_gamma(double target, std::size_t steps) {
  if (steps == 0) return 1.0;
  return std::pow(target, 1.0 / static_cast<double>(steps));
}

/// Removes hidden units (their incoming rows and outgoing columns, recursively
/// through nested connections).
template <class T>
MorphReport prune(Network<T>& net, std::span<const NeuronRef> victims) {
  MorphReport rep = MorphReport::of(MorphKind::prune);
  rep.params_before = count_params(net);
  const auto by_layer = detail::group_victims(net, victims);
  for (const auto& [id, neurons] : by_layer) {
    auto& r = find_residual(net, id);
    detail::drop_hidden(r, neurons);
    rep.hidden_removed[id] = neurons.size();
  }
  if (!by_layer.empty()) ++net.revision;
  rep.applied = true;
  rep.params_after = count_params(net);
  return rep;
}

/// When a node's hidden width has fallen to `floor` or below, prunes what is
/// left and replaces the node by its shortcut. The residual path's remaining
/// constant output is folded into the shortcut bias. Top-level blocks keep
/// their residual slot with H = 0 so they can grow again.
template <class T>
MorphReport remove_layer_if_empty(Network<T>& net, LayerId id, std::size_t floor = 1) {
  auto loc = locate(net, id);
  if (loc.node == nullptr) throw InvalidArgument("unknown layer id " + to_string(id));
  auto& r = loc.node->residual();
  MorphReport rep = MorphReport::of(MorphKind::remove_layer, id);
  rep.params_before = rep.params_after = count_params(net);
  if (r.hidden > floor) {
    rep.reason = "H = " + std::to_string(r.hidden) + " above floor " + std::to_string(floor);
    return rep;
  }
  if (loc.is_block && r.hidden == 0 && r.inner0.is_linear() && r.inner1.is_linear()) {
    rep.reason = "top-level block already empty";
    return rep;
  }
  if (r.hidden > 0) rep.hidden_removed[id] = r.hidden;
  std::set<std::size_t> all;
  for (std::size_t j = 0; j < r.hidden; ++j) all.insert(j);
  detail::drop_hidden(r, all);

  const Matrix<T> constant = detail::empty_path_output(r.inner1);
  for (std::size_t j = 0; j < r.fan_out(); ++j) r.shortcut.bias(j, 0) += constant(0, j);

  if (loc.is_block) {
    detail::collect_ids(r.inner0, rep.removed);
    detail::collect_ids(r.inner1, rep.removed);
    Rng unused;
    r.inner0 = detail::fresh_linear<T>(r.fan_in(), 0, Init::zero, unused, net.defaults);
    r.inner1 = detail::fresh_linear<T>(0, r.fan_out(), Init::zero, unused, net.defaults);
  } else {
    detail::collect_ids(*loc.node, rep.removed);
    Linear<T> shortcut = std::move(r.shortcut);
    *loc.node = Node<T>(std::move(shortcut));
  }
  ++net.revision;
  rep.applied = true;
  rep.params_after = count_params(net);
  return rep;
}

}  // namespace morphnas
