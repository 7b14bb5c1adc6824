#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/core/io.hpp"
#include "morphnas/hresnet/inspect.hpp"
#include "morphnas/hresnet/tree.hpp"

// Checkpoint layout (all integers little-endian, reals IEEE-754 binary32):
//
//   "HRNN" u16 version
//   u8 loss, u32 next_layer_id
//   f32 dropout_p, u32 seed_hidden, f32 beta1, f32 beta2, f32 eps   (growth defaults)
//   u32 block_count, then block_count nodes
//
//   node     := u8 tag (0 linear, 1 residual) then body
//   linear   := u32 fan_out, u32 fan_in, f32 weight[fan_out*fan_in], f32 bias[fan_out],
//               adam(weight), adam(bias)
//   adam     := u64 step, f32 beta1, f32 beta2, f32 eps, f32 m[n], f32 v[n]
//   residual := u32 layer_id, u32 hidden, u8 activation, f32 dropout_p,
//               u32 decay_count, decay_count * (u32 neuron, f32 factor),
//               linear (shortcut), node (inner0), node (inner1)
//
// Nodes are written in pre-order. Trailing bytes are rejected.

namespace morphnas {

inline constexpr std::string_view kCheckpointMagic = "HRNN";
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw FormatError("checkpoint truncated at byte " + std::to_string(pos_) + " (needed " +
                        std::to_string(n) + " more)");
    }
  }

 private:
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

template <class T>
void write_reals(ByteWriter& w, const Matrix<T>& m) {
  for (const T v : m.values()) w.f32(static_cast<float>(v));
}

template <class T>
Matrix<T> read_reals(ByteReader& r, std::size_t rows, std::size_t cols) {
  r.need(rows * cols * 4);
  Matrix<T> m(rows, cols);
  for (auto& v : m.values()) v = static_cast<T>(r.f32());
  return m;
}

template <class T>
void write_adam(ByteWriter& w, const numkit::AdamState<T>& s) {
  w.u64(s.step);
  w.f32(static_cast<float>(s.beta1));
  w.f32(static_cast<float>(s.beta2));
  w.f32(static_cast<float>(s.eps));
  write_reals(w, s.m);
  write_reals(w, s.v);
}

template <class T>
numkit::AdamState<T> read_adam(ByteReader& r, std::size_t rows, std::size_t cols) {
  numkit::AdamState<T> s;
  s.step = r.u64();
  s.beta1 = static_cast<T>(r.f32());
  s.beta2 = static_cast<T>(r.f32());
  s.eps = static_cast<T>(r.f32());
  s.m = read_reals<T>(r, rows, cols);
  s.v = read_reals<T>(r, rows, cols);
  return s;
}

template <class T>
void write_linear(ByteWriter& w, const Linear<T>& l) {
  w.u32(static_cast<std::uint32_t>(l.fan_out()));
  w.u32(static_cast<std::uint32_t>(l.fan_in()));
  write_reals(w, l.weight);
  write_reals(w, l.bias);
  write_adam(w, l.weight_opt);
  write_adam(w, l.bias_opt);
}

template <class T>
Linear<T> read_linear(ByteReader& r) {
  Linear<T> l;
  const std::size_t out = r.u32();
  const std::size_t in = r.u32();
  l.weight = read_reals<T>(r, out, in);
  l.bias = read_reals<T>(r, out, 1);
  l.weight_opt = read_adam<T>(r, out, in);
  l.bias_opt = read_adam<T>(r, out, 1);
  return l;
}

template <class T>
void write_node(ByteWriter& w, const Node<T>& node) {
  if (node.is_linear()) {
    w.u8(0);
    write_linear(w, node.linear());
    return;
  }
  const auto& r = node.residual();
  w.u8(1);
  w.u32(to_underlying(r.id));
  w.u32(static_cast<std::uint32_t>(r.hidden));
  w.u8(static_cast<std::uint8_t>(r.activation));
  w.f32(static_cast<float>(r.dropout_p));
  w.u32(static_cast<std::uint32_t>(r.decay.size()));
  for (const auto& [j, f] : r.decay) {
    w.u32(static_cast<std::uint32_t>(j));
    w.f32(static_cast<float>(f));
  }
  write_linear(w, r.shortcut);
  write_node(w, r.inner0);
  write_node(w, r.inner1);
}

template <class T>
Node<T> read_node(ByteReader& r, int level) {
  if (level > 256) throw FormatError("checkpoint nesting deeper than 256");
  const std::uint8_t tag = r.u8();
  if (tag == 0) return Node<T>(read_linear<T>(r));
  if (tag != 1) throw FormatError("checkpoint: unknown node tag " + std::to_string(tag));
  const LayerId id{r.u32()};
  const std::size_t hidden = r.u32();
  const std::uint8_t act = r.u8();
  if (act != static_cast<std::uint8_t>(ActivationKind::relu))
    throw FormatError("checkpoint: unknown activation " + std::to_string(act));
  const T dropout = static_cast<T>(r.f32());
  const std::uint32_t n_decay = r.u32();
  r.need(static_cast<std::size_t>(n_decay) * 8);
  std::map<std::size_t, T> decay;
  for (std::uint32_t i = 0; i < n_decay; ++i) {
    const std::size_t j = r.u32();
    decay[j] = static_cast<T>(r.f32());
  }
  Linear<T> shortcut = read_linear<T>(r);
  Node<T> inner0 = read_node<T>(r, level + 1);
  Node<T> inner1 = read_node<T>(r, level + 1);
  return Node<T>(Residual<T>{.id = id,
                             .shortcut = std::move(shortcut),
                             .inner0 = std::move(inner0),
                             .inner1 = std::move(inner1),
                             .hidden = hidden,
                             .activation = ActivationKind::relu,
                             .dropout_p = dropout,
                             .decay = std::move(decay)});
}

}  // namespace detail

/// Encodes the model tree with its optimizer state. Reals are stored as
/// binary32, so a float network round-trips bit-exactly.
template <class T>
std::vector<std::uint8_t> serialize(const Network<T>& net) {
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u16(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(net.loss));
  w.u32(net.next_layer_id);
  w.f32(static_cast<float>(net.defaults.dropout_p));
  w.u32(static_cast<std::uint32_t>(net.defaults.seed_hidden));
  w.f32(static_cast<float>(net.defaults.adam.beta1));
  w.f32(static_cast<float>(net.defaults.adam.beta2));
  w.f32(static_cast<float>(net.defaults.adam.eps));
  w.u32(static_cast<std::uint32_t>(net.blocks.size()));
  for (const auto& b : net.blocks) detail::write_node(w, b);
  return w.take();
}

template <class T>
Network<T> deserialize(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (r.remaining() < kCheckpointMagic.size() || r.bytes(kCheckpointMagic.size()) != kCheckpointMagic)
    throw FormatError("checkpoint: bad magic (expected \"HRNN\")");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  Network<T> net;
  const std::uint8_t loss = r.u8();
  if (loss > 1) throw FormatError("checkpoint: unknown loss kind " + std::to_string(loss));
  net.loss = static_cast<LossKind>(loss);
  net.next_layer_id = r.u32();
  net.defaults.dropout_p = r.f32();
  net.defaults.seed_hidden = r.u32();
  net.defaults.adam.beta1 = r.f32();
  net.defaults.adam.beta2 = r.f32();
  net.defaults.adam.eps = r.f32();
  const std::uint32_t blocks = r.u32();
  for (std::uint32_t b = 0; b < blocks; ++b) net.blocks.push_back(detail::read_node<T>(r, 0));
  if (!r.at_end()) throw FormatError("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
  const auto errs = structural_errors(net);
  if (!errs.empty()) throw FormatError("checkpoint: inconsistent tree: " + errs.front());
  return net;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Network<T>& net) {
  write_file_atomic(path, serialize(net));
}

template <class T>
Network<T> load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return deserialize<T>(bytes);
}

}  // namespace morphnas
