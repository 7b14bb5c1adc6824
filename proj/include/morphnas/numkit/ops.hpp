#pragma once

#include <algorithm>
#include <cstddef>
#include <string>

#include "morphnas/core/error.hpp"
#include "morphnas/core/rng.hpp"
#include "morphnas/numkit/matrix.hpp"
#include "morphnas/numkit/parallel.hpp"

namespace morphnas::numkit {

namespace detail {

// c[r0..r1) += a * b, a: m x k, b: k x n. Each c(i, j) accumulates over k in
// ascending order regardless of blocking.
template <class T>
void gemm_rows(const T* a, const T* b, T* c, std::size_t k, std::size_t n, std::size_t r0,
               std::size_t r1) {
  constexpr std::size_t kBlockK = 128;
  constexpr std::size_t kBlockN = 512;
  for (std::size_t j0 = 0; j0 < n; j0 += kBlockN) {
    const std::size_t j1 = std::min(n, j0 + kBlockN);
    for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
      const std::size_t p1 = std::min(k, p0 + kBlockK);
      for (std::size_t i = r0; i < r1; ++i) {
        T* __restrict ci = c + i * n;
        const T* ai = a + i * k;
        for (std::size_t p = p0; p < p1; ++p) {
          const T av = ai[p];
          if (av == T{0}) continue;
          const T* __restrict bp = b + p * n;
          for (std::size_t j = j0; j < j1; ++j) ci[j] += av * bp[j];
        }
      }
    }
  }
}

}  // namespace detail

template <class T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += kTile) {
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += kTile) {
      const std::size_t i1 = std::min(a.rows(), i0 + kTile);
      const std::size_t j1 = std::min(a.cols(), j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) t(j, i) = a(i, j);
    }
  }
  return t;
}

/// a (m x k) * b (k x n).
template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" + a.shape() + " * " + b.shape() + ")");
  }
  Matrix<T> c(a.rows(), b.cols());
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  parallel_rows(a.rows(), k * n, [&](std::size_t r0, std::size_t r1) {
    detail::gemm_rows(a.data(), b.data(), c.data(), k, n, r0, r1);
  });
  return c;
}

/// a (m x k) * transpose(b), b: n x k.
template <class T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions differ (" + a.shape() + " * " + b.shape() + "^T)");
  }
  return matmul(a, transpose(b));
}

/// transpose(a) * b, a: k x m, b: k x n.
template <class T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: inner dimensions differ (" + a.shape() + "^T * " + b.shape() + ")");
  }
  return matmul(transpose(a), b);
}

template <class T>
void add_inplace(Matrix<T>& a, const Matrix<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("add: " + a.shape() + " vs " + b.shape());
  T* x = a.data();
  const T* y = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) x[i] += y[i];
}

/// Sums over rows, producing an (a.cols() x 1) column.
template <class T>
Matrix<T> column_sums(const Matrix<T>& a) {
  Matrix<T> s(a.cols(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s(j, 0) += r[j];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Linear layer. Weight is fan_out x fan_in, bias is fan_out x 1.

template <class T>
void check_linear_shapes(const Matrix<T>& weight, const Matrix<T>& bias, std::size_t input_cols) {
  if (bias.rows() != weight.rows() || bias.cols() != 1) {
    throw ShapeError("linear: bias " + bias.shape() + " does not match weight " + weight.shape());
  }
  if (input_cols != weight.cols()) {
    throw ShapeError("linear: input has " + std::to_string(input_cols) + " columns, weight is " +
                     weight.shape());
  }
}

/// Y = X * W^T + b.
template <class T>
Matrix<T> linear_forward(const Matrix<T>& weight, const Matrix<T>& bias, const Matrix<T>& x) {
  check_linear_shapes(weight, bias, x.cols());
  Matrix<T> y(x.rows(), weight.rows());
  if (weight.rows() > 0 && weight.cols() > 0) y = matmul_nt(x, weight);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < y.cols(); ++j) r[j] += bias(j, 0);
  }
  return y;
}

template <class T>
struct LinearGrads {
  Matrix<T> dx;  // empty when not requested
  Matrix<T> dweight;
  Matrix<T> dbias;
};

template <class T>
LinearGrads<T> linear_backward(const Matrix<T>& weight, const Matrix<T>& x, const Matrix<T>& dy,
                               bool need_dx = true) {
  if (dy.rows() != x.rows() || dy.cols() != weight.rows() || x.cols() != weight.cols()) {
    throw ShapeError("linear_backward: dy " + dy.shape() + ", x " + x.shape() + ", weight " +
                     weight.shape());
  }
  LinearGrads<T> g;
  g.dweight = Matrix<T>(weight.rows(), weight.cols());
  if (!dy.empty() && !x.empty()) g.dweight = matmul_tn(dy, x);
  g.dbias = column_sums(dy);
  if (need_dx) {
    g.dx = Matrix<T>(x.rows(), x.cols());
    if (!dy.empty() && !weight.empty()) g.dx = matmul(dy, weight);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Activations.

template <class T>
Matrix<T> relu_forward(Matrix<T> x) {
  for (auto& v : x.values()) v = v > T{0} ? v : T{0};
  return x;
}

/// dX given dY and the forward output Y.
template <class T>
Matrix<T> relu_backward(Matrix<T> dy, const Matrix<T>& y) {
  if (!dy.same_shape(y)) throw ShapeError("relu_backward: " + dy.shape() + " vs " + y.shape());
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(y.values()[i] > T{0})) dy.values()[i] = T{0};
  return dy;
}

template <class T>
struct DropoutResult {
  Matrix<T> y;
  Matrix<T> mask;  // per-entry scale (0 or 1/(1-p)); empty when dropout is inactive
};

inline void check_drop_probability(double p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw InvalidArgument("dropout: drop probability must lie in [0, 1), got " + std::to_string(p));
  }
}

/// Inverted dropout: kept entries are scaled by 1/(1-p) at train time, eval is the identity.
template <class T>
DropoutResult<T> dropout_forward(Matrix<T> x, double p, bool training, Rng& rng) {
  check_drop_probability(p);
  if (!training || p == 0.0) return {std::move(x), {}};
  Matrix<T> mask(x.rows(), x.cols());
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = rng.uniform() >= p ? scale : T{0};
    mask.values()[i] = m;
    x.values()[i] *= m;
  }
  return {std::move(x), std::move(mask)};
}

template <class T>
Matrix<T> dropout_backward(Matrix<T> dy, const Matrix<T>& mask) {
  if (mask.empty()) return dy;
  if (!dy.same_shape(mask)) throw ShapeError("dropout_backward: " + dy.shape() + " vs " + mask.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dy.values()[i] *= mask.values()[i];
  return dy;
}

}  // namespace morphnas::numkit
