#pragma once

#include <cstddef>

#include "morphnas/core/error.hpp"
#include "morphnas/numkit/matrix.hpp"

namespace morphnas::numkit {

/// Central-difference gradient of a scalar function of a matrix. Test oracle.
template <class T, class F>
Matrix<T> finite_diff_grad(F&& f, Matrix<T> x, T h) {
  if (!(h > T{0})) throw InvalidArgument("finite_diff_grad: step must be positive");
  Matrix<T> grad(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x.values()[i];
    x.values()[i] = saved + h;
    const T up = static_cast<T>(f(x));
    x.values()[i] = saved - h;
    const T down = static_cast<T>(f(x));
    x.values()[i] = saved;
    grad.values()[i] = (up - down) / (T{2} * h);
  }
  return grad;
}

/// |a - b| / max(|a|, |b|, floor).
template <class T>
T relative_error(T a, T b, T floor = T(1e-8)) {
  const T diff = a > b ? a - b : b - a;
  const T abs_a = a < T{0} ? -a : a;
  const T abs_b = b < T{0} ? -b : b;
  T denom = abs_a > abs_b ? abs_a : abs_b;
  if (denom < floor) denom = floor;
  return diff / denom;
}

}  // namespace morphnas::numkit
