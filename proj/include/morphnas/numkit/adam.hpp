#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/numkit/matrix.hpp"

namespace morphnas::numkit {

/// Marks an index in a remap table that has no predecessor.
inline constexpr std::size_t kNewIndex = std::numeric_limits<std::size_t>::max();

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-tensor Adam moments. m and v always have the parameter's shape.
template <class T>
struct AdamState {
  std::uint64_t step = 0;
  Matrix<T> m;
  Matrix<T> v;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);

  static AdamState fresh(std::size_t rows, std::size_t cols, const AdamSettings& s = {}) {
    AdamState st;
    st.m = Matrix<T>(rows, cols);
    st.v = Matrix<T>(rows, cols);
    st.beta1 = static_cast<T>(s.beta1);
    st.beta2 = static_cast<T>(s.beta2);
    st.eps = static_cast<T>(s.eps);
    return st;
  }

  bool operator==(const AdamState&) const = default;
};

/// Bias-corrected Adam update, in place.
template <class T>
void adam_step(Matrix<T>& param, const Matrix<T>& grad, AdamState<T>& state, T lr) {
  if (!param.same_shape(grad)) {
    throw ShapeError("adam_step: parameter " + param.shape() + " vs gradient " + grad.shape());
  }
  if (!param.same_shape(state.m) || !param.same_shape(state.v)) {
    throw ShapeError("adam_step: optimizer state " + state.m.shape() + " does not match parameter " +
                     param.shape() + "; remap the state after morphism");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T c1 = static_cast<T>(1.0 - std::pow(static_cast<double>(state.beta1), t));
  const T c2 = static_cast<T>(1.0 - std::pow(static_cast<double>(state.beta2), t));
  const T b1 = state.beta1;
  const T b2 = state.beta2;
  T* p = param.data();
  const T* g = grad.data();
  T* m = state.m.data();
  T* v = state.v.data();
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = b1 * m[i] + (T{1} - b1) * g[i];
    v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
    const T mhat = m[i] / c1;
    const T vhat = v[i] / c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

namespace detail {
inline void check_map(std::span<const std::size_t> map, std::size_t old_extent, const char* what) {
  std::vector<bool> seen(old_extent, false);
  for (const std::size_t old : map) {
    if (old == kNewIndex) continue;
    if (old >= old_extent) {
      throw InvalidArgument(std::string("remap: ") + what + " index " + std::to_string(old) +
                            " out of range (extent " + std::to_string(old_extent) + ")");
    }
    if (seen[old]) {
      throw InvalidArgument(std::string("remap: ") + what + " index " + std::to_string(old) +
                            " mapped twice");
    }
    seen[old] = true;
  }
}
}  // namespace detail

/// Builds a matrix whose entry (i, j) is src(row_map[i], col_map[j]), or `fill`
/// when either index is kNewIndex.
template <class T>
Matrix<T> remap_matrix(const Matrix<T>& src, std::span<const std::size_t> row_map,
                       std::span<const std::size_t> col_map, T fill = T{0}) {
  detail::check_map(row_map, src.rows(), "row");
  detail::check_map(col_map, src.cols(), "column");
  Matrix<T> out(row_map.size(), col_map.size(), fill);
  for (std::size_t i = 0; i < row_map.size(); ++i) {
    if (row_map[i] == kNewIndex) continue;
    const auto from = src.row(row_map[i]);
    auto to = out.row(i);
    for (std::size_t j = 0; j < col_map.size(); ++j)
      if (col_map[j] != kNewIndex) to[j] = from[col_map[j]];
  }
  return out;
}

/// Carries optimizer moments across a morphism. Surviving entries keep m and v,
/// new entries start at zero, the step counter is unchanged.
template <class T>
AdamState<T> remap_adam_state(const AdamState<T>& state, std::span<const std::size_t> row_map,
                              std::span<const std::size_t> col_map) {
  AdamState<T> out = state;
  out.m = remap_matrix(state.m, row_map, col_map);
  out.v = remap_matrix(state.v, row_map, col_map);
  return out;
}

/// Index table 0..n-1 followed by `added` new entries.
inline std::vector<std::size_t> extend_map(std::size_t n, std::size_t added) {
  std::vector<std::size_t> map(n + added, kNewIndex);
  for (std::size_t i = 0; i < n; ++i) map[i] = i;
  return map;
}

inline std::vector<std::size_t> identity_map(std::size_t n) { return extend_map(n, 0); }

}  // namespace morphnas::numkit
