#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>

#include "morphnas/core/error.hpp"
#include "morphnas/core/rng.hpp"
#include "morphnas/datasets/dataset.hpp"

namespace morphnas::data {

struct SpiralParams {
  std::size_t n_per_class = 500;
  double noise_sd = 0.02;
  double turns = 1.5;  // t ~ U[0, 2*pi*turns]
};

/// Two interleaved spirals. Class c: t ~ U[0, 3pi], radius t / 3pi,
/// angle t + c*pi, plus isotropic gaussian noise. Classes are balanced.
template <class T>
Dataset<T> gen_spiral(const SpiralParams& p, std::uint64_t seed, std::string split = "train") {
  if (p.n_per_class < 1) throw InvalidArgument("gen_spiral: n_per_class must be >= 1");
  Rng rng(seed);
  const double t_max = 2.0 * std::numbers::pi * p.turns;
  Dataset<T> d;
  d.task = Task::classification;
  d.num_classes = 2;
  d.split = std::move(split);
  d.seed = seed;
  d.inputs = Matrix<T>(2 * p.n_per_class, 2);
  d.labels.resize(2 * p.n_per_class);
  std::size_t row = 0;
  for (std::uint32_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < p.n_per_class; ++i, ++row) {
      const double t = rng.uniform(0.0, t_max);
      const double radius = t / t_max;
      const double angle = t + c * std::numbers::pi;
      const double nx = rng.normal(0.0, p.noise_sd);
      const double ny = rng.normal(0.0, p.noise_sd);
      d.inputs(row, 0) = static_cast<T>(radius * std::cos(angle) + nx);
      d.inputs(row, 1) = static_cast<T>(radius * std::sin(angle) + ny);
      d.labels[row] = c;
    }
  }
  return d;
}

template <class T>
Dataset<T> gen_spiral(std::size_t n_per_class, double noise_sd, std::uint64_t seed) {
  return gen_spiral<T>(SpiralParams{n_per_class, noise_sd, 1.5}, seed);
}

/// Regression surface used by the grid dataset.
inline double grid_surface(double x, double y) { return std::sin(3.0 * x) * std::cos(3.0 * y); }

/// Points uniform on [-1, 1]^2 with target sin(3x) cos(3y).
template <class T>
Dataset<T> gen_grid_regression(std::size_t n, std::uint64_t seed, std::string split = "train") {
  if (n < 1) throw InvalidArgument("gen_grid_regression: n must be >= 1");
  Rng rng(seed);
  Dataset<T> d;
  d.task = Task::regression;
  d.split = std::move(split);
  d.seed = seed;
  d.inputs = Matrix<T>(n, 2);
  d.targets = Matrix<T>(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    d.inputs(i, 0) = static_cast<T>(x);
    d.inputs(i, 1) = static_cast<T>(y);
    d.targets(i, 0) = static_cast<T>(grid_surface(x, y));
  }
  return d;
}

}  // namespace morphnas::data
