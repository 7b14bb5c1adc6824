#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/hresnet/tree.hpp"

namespace morphnas {

/// Addressing entry for one residual node.
struct CatalogEntry {
  LayerId id{};
  std::size_t fan_in = 0;
  std::size_t hidden = 0;
  std::size_t fan_out = 0;
  bool growable = false;  // both inner connections are Linear
  std::size_t level = 0;  // nesting depth, 0 for top-level blocks
};

using LayerCatalog = std::vector<CatalogEntry>;

namespace detail {
template <class T>
void catalog_node(const Node<T>& node, std::size_t level, LayerCatalog& out) {
  if (node.is_linear()) return;
  const auto& r = node.residual();
  out.push_back({r.id, r.fan_in(), r.hidden, r.fan_out(),
                 r.inner0.is_linear() && r.inner1.is_linear(), level});
  catalog_node(r.inner0, level + 1, out);
  catalog_node(r.inner1, level + 1, out);
}
}  // namespace detail

/// Every residual node, pre-order.
template <class T>
LayerCatalog catalog(const Network<T>& net) {
  LayerCatalog out;
  for (const auto& b : net.blocks) detail::catalog_node(b, 0, out);
  return out;
}

template <class T>
std::size_t count_params(const Node<T>& node) {
  std::size_t n = 0;
  for_each_linear(node, [&n](const Linear<T>& l) { n += l.weight.size() + l.bias.size(); });
  return n;
}

/// All weights and biases.
template <class T>
std::size_t count_params(const Network<T>& net) {
  std::size_t n = 0;
  for (const auto& b : net.blocks) n += count_params(b);
  return n;
}

/// Longest input-to-output chain of weight layers, counting a Linear only when
/// both of its sides have at least `neuron_floor` units.
template <class T>
std::size_t depth(const Node<T>& node, std::size_t neuron_floor) {
  if (node.is_linear()) {
    const auto& l = node.linear();
    return std::min(l.fan_in(), l.fan_out()) >= neuron_floor ? 1 : 0;
  }
  const auto& r = node.residual();
  const std::size_t through_shortcut = std::min(r.fan_in(), r.fan_out()) >= neuron_floor ? 1 : 0;
  return std::max(through_shortcut, depth(r.inner0, neuron_floor) + depth(r.inner1, neuron_floor));
}

template <class T>
std::size_t depth(const Network<T>& net, std::size_t neuron_floor = 10) {
  std::size_t d = 0;
  for (const auto& b : net.blocks) d += depth(b, neuron_floor);
  return d;
}

/// Hidden units over all residual nodes.
template <class T>
std::size_t total_hidden(const Network<T>& net) {
  std::size_t n = 0;
  for_each_residual(net, [&n](const Residual<T>& r) { n += r.hidden; });
  return n;
}

namespace detail {
template <class T>
void validate_linear(const Linear<T>& l, const std::string& where, std::vector<std::string>& errs) {
  if (l.bias.rows() != l.weight.rows() || l.bias.cols() != 1)
    errs.push_back(where + ": bias " + l.bias.shape() + " vs weight " + l.weight.shape());
  if (!l.weight_opt.m.same_shape(l.weight) || !l.weight_opt.v.same_shape(l.weight))
    errs.push_back(where + ": weight optimizer state " + l.weight_opt.m.shape() + " vs " + l.weight.shape());
  if (!l.bias_opt.m.same_shape(l.bias) || !l.bias_opt.v.same_shape(l.bias))
    errs.push_back(where + ": bias optimizer state " + l.bias_opt.m.shape() + " vs " + l.bias.shape());
}

template <class T>
void validate_node(const Node<T>& node, const std::string& where, std::set<std::uint32_t>& ids,
                   std::uint32_t next_id, std::vector<std::string>& errs) {
  if (node.is_linear()) {
    validate_linear(node.linear(), where, errs);
    return;
  }
  const auto& r = node.residual();
  const std::string here = where + "/" + to_string(r.id);
  if (!ids.insert(to_underlying(r.id)).second) errs.push_back(here + ": duplicate layer id");
  if (to_underlying(r.id) >= next_id) errs.push_back(here + ": id not below next_layer_id");
  validate_linear(r.shortcut, here + "/shortcut", errs);
  if (r.inner0.fan_in() != r.fan_in())
    errs.push_back(here + ": inner0 fan_in " + std::to_string(r.inner0.fan_in()) + " != " + std::to_string(r.fan_in()));
  if (r.inner0.fan_out() != r.hidden)
    errs.push_back(here + ": inner0 fan_out " + std::to_string(r.inner0.fan_out()) + " != H " + std::to_string(r.hidden));
  if (r.inner1.fan_in() != r.hidden)
    errs.push_back(here + ": inner1 fan_in " + std::to_string(r.inner1.fan_in()) + " != H " + std::to_string(r.hidden));
  if (r.inner1.fan_out() != r.fan_out())
    errs.push_back(here + ": inner1 fan_out " + std::to_string(r.inner1.fan_out()) + " != " + std::to_string(r.fan_out()));
  if (!(r.dropout_p >= T{0} && r.dropout_p < T{1})) errs.push_back(here + ": dropout outside [0, 1)");
  for (const auto& [j, f] : r.decay) {
    if (j >= r.hidden) errs.push_back(here + ": decay index " + std::to_string(j) + " >= H");
    if (!(f > T{0} && f <= T{1})) errs.push_back(here + ": decay factor outside (0, 1]");
  }
  validate_node(r.inner0, here + "/inner0", ids, next_id, errs);
  validate_node(r.inner1, here + "/inner1", ids, next_id, errs);
}
}  // namespace detail

/// Structural consistency walk. Returns human-readable violations (empty when valid).
template <class T>
std::vector<std::string> structural_errors(const Network<T>& net) {
  std::vector<std::string> errs;
  std::set<std::uint32_t> ids;
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    if (b > 0 && net.blocks[b - 1].fan_out() != net.blocks[b].fan_in())
      errs.push_back("block " + std::to_string(b) + ": fan_in does not match previous fan_out");
    detail::validate_node(net.blocks[b], "block" + std::to_string(b), ids, net.next_layer_id, errs);
  }
  return errs;
}

template <class T>
void validate(const Network<T>& net) {
  const auto errs = structural_errors(net);
  if (!errs.empty()) throw ShapeError("network invariant violated: " + errs.front());
}

}  // namespace morphnas
