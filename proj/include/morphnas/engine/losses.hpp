#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/datasets/dataset.hpp"
#include "morphnas/hresnet/propagate.hpp"

namespace morphnas::engine {

/// Summed loss over a batch, count of correct predictions, and dLoss/dOutput
/// scaled by `grad_scale` (1/batch for a mean loss, 1 for a summed one).
template <class T>
struct LossEval {
  double loss_sum = 0.0;
  std::size_t correct = 0;
  Matrix<T> grad;
};

template <class T>
LossEval<T> softmax_cross_entropy(const Matrix<T>& logits, std::span<const std::uint32_t> labels,
                                  bool need_grad, double grad_scale) {
  if (labels.size() != logits.rows())
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " + logits.shape());
  LossEval<T> out;
  if (need_grad) out.grad = Matrix<T>(logits.rows(), logits.cols());
  std::vector<double> p(logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const std::uint32_t y = labels[i];
    if (y >= z.size()) throw InvalidArgument("softmax_cross_entropy: label out of range");
    double zmax = z[0];
    std::size_t arg = 0;
    for (std::size_t j = 1; j < z.size(); ++j)
      if (z[j] > zmax) {
        zmax = z[j];
        arg = j;
      }
    double sum = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      p[j] = std::exp(static_cast<double>(z[j]) - zmax);
      sum += p[j];
    }
    out.loss_sum += std::log(sum) - (static_cast<double>(z[y]) - zmax);
    out.correct += arg == y ? 1 : 0;
    if (need_grad) {
      auto g = out.grad.row(i);
      for (std::size_t j = 0; j < z.size(); ++j)
        g[j] = static_cast<T>((p[j] / sum - (j == y ? 1.0 : 0.0)) * grad_scale);
    }
  }
  return out;
}

/// Squared error summed over outputs; the reported mean divides by rows * cols.
template <class T>
LossEval<T> squared_error(const Matrix<T>& y, const Matrix<T>& target, bool need_grad, double grad_scale) {
  if (!y.same_shape(target)) throw ShapeError("squared_error: " + y.shape() + " vs " + target.shape());
  LossEval<T> out;
  if (need_grad) out.grad = Matrix<T>(y.rows(), y.cols());
  const double k = static_cast<double>(y.cols());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = static_cast<double>(y.values()[i]) - static_cast<double>(target.values()[i]);
    out.loss_sum += e * e / k;
    if (need_grad) out.grad.values()[i] = static_cast<T>(2.0 * e / k * grad_scale);
  }
  return out;
}

template <class T>
LossEval<T> batch_loss(LossKind kind, const Matrix<T>& y, const data::Batch<T>& b, bool need_grad,
                       double grad_scale) {
  if (kind == LossKind::softmax_cross_entropy) return softmax_cross_entropy(y, std::span(b.labels), need_grad, grad_scale);
  return squared_error(y, b.targets, need_grad, grad_scale);
}

struct Metrics {
  double loss = 0.0;
  std::optional<double> accuracy;  // classification only
};

/// Eval-mode mean loss (and accuracy for classification) over a whole dataset.
template <class T>
Metrics evaluate(const Network<T>& net, const data::Dataset<T>& d, std::size_t batch_size = 1000) {
  if (d.input_dim() != net.input_dim())
    throw ShapeError("evaluate: network expects " + std::to_string(net.input_dim()) + " inputs, dataset has " +
                     std::to_string(d.input_dim()));
  if (d.size() == 0) throw InvalidArgument("evaluate: empty dataset");
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& rows : data::batches(d.size(), batch_size, 0, 0, false)) {
    const auto b = data::gather(d, rows);
    const auto y = predict(net, b.inputs);
    const auto e = batch_loss(net.loss, y, b, false, 1.0);
    loss += e.loss_sum;
    correct += e.correct;
  }
  Metrics m;
  m.loss = loss / static_cast<double>(d.size());
  if (d.task == data::Task::classification) m.accuracy = static_cast<double>(correct) / static_cast<double>(d.size());
  return m;
}

}  // namespace morphnas::engine
