#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/core/rng.hpp"
#include "morphnas/numkit/matrix.hpp"

namespace morphnas::data {

enum class Task { classification, regression };

/// Inputs plus either class labels or regression targets.
template <class T>
struct Dataset {
  Matrix<T> inputs;
  std::vector<std::uint32_t> labels;  // classification
  Matrix<T> targets;                  // regression, n x k
  std::size_t num_classes = 0;
  Task task = Task::classification;
  std::string split;
  std::uint64_t seed = 0;

  std::size_t size() const { return inputs.rows(); }
  std::size_t input_dim() const { return inputs.cols(); }
  std::size_t output_dim() const { return task == Task::classification ? num_classes : targets.cols(); }
};

/// Rows selected from a dataset.
template <class T>
struct Batch {
  Matrix<T> inputs;
  std::vector<std::uint32_t> labels;
  Matrix<T> targets;
  std::size_t size() const { return inputs.rows(); }
};

template <class T>
Batch<T> gather(const Dataset<T>& d, std::span<const std::size_t> rows) {
  Batch<T> b;
  b.inputs = Matrix<T>(rows.size(), d.input_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = d.inputs.row(rows[i]);
    std::copy(src.begin(), src.end(), b.inputs.row(i).begin());
  }
  if (d.task == Task::classification) {
    b.labels.reserve(rows.size());
    for (const auto r : rows) b.labels.push_back(d.labels[r]);
  } else {
    b.targets = Matrix<T>(rows.size(), d.targets.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto src = d.targets.row(rows[i]);
      std::copy(src.begin(), src.end(), b.targets.row(i).begin());
    }
  }
  return b;
}

/// Index batches for one epoch. Shuffled by a permutation that depends only
/// on (seed, epoch); the last partial batch is kept.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t shuffle_seed, std::uint64_t epoch,
                                                     bool shuffle = true) {
  if (batch_size == 0) throw InvalidArgument("batches: batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle && n > 1) {
    Rng rng(Rng::mix(shuffle_seed, epoch));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  }
  std::vector<std::vector<std::size_t>> out;
  out.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

/// Writes inputs followed by the label or target columns.
template <class T>
void write_csv(const std::filesystem::path& path, const Dataset<T>& d) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  for (std::size_t j = 0; j < d.input_dim(); ++j) out << (j ? "," : "") << "x" << j;
  if (d.task == Task::classification) {
    out << ",label\n";
  } else {
    for (std::size_t j = 0; j < d.targets.cols(); ++j) out << ",y" << j;
    out << "\n";
  }
  out.precision(9);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.input_dim(); ++j) out << (j ? "," : "") << d.inputs(i, j);
    if (d.task == Task::classification) {
      out << "," << d.labels[i];
    } else {
      for (std::size_t j = 0; j < d.targets.cols(); ++j) out << "," << d.targets(i, j);
    }
    out << "\n";
  }
}

}  // namespace morphnas::data
