#pragma once

#include <filesystem>
#include <string>
#include <utility>

#include "morphnas/core/error.hpp"
#include "morphnas/datasets/dataset.hpp"
#include "morphnas/datasets/mnist.hpp"
#include "morphnas/datasets/synthetic.hpp"
#include "morphnas/engine/config.hpp"

namespace morphnas::engine {

template <class T>
struct DataSplits {
  data::Dataset<T> train;
  data::Dataset<T> test;
};

/// Builds the train and test sets a config describes. `data_dir`, when not
/// empty, overrides the configured MNIST directory.
template <class T>
DataSplits<T> load_datasets(const DatasetConfig& c, const std::filesystem::path& data_dir = {}) {
  if (c.kind == "spiral") {
    return {data::gen_spiral<T>({c.n_per_class, c.noise_sd, c.turns}, c.train_seed, "train"),
            data::gen_spiral<T>({c.test_per_class, c.noise_sd, c.turns}, c.test_seed, "test")};
  }
  if (c.kind == "grid") {
    return {data::gen_grid_regression<T>(c.n_train, c.train_seed, "train"),
            data::gen_grid_regression<T>(c.n_test, c.test_seed, "test")};
  }
  if (c.kind == "mnist") {
    const std::filesystem::path dir = data_dir.empty() ? std::filesystem::path(c.dir) : data_dir;
    if (dir.empty()) throw InvalidArgument("mnist dataset needs a data directory (dataset.dir or --data)");
    auto m = data::load_mnist<T>(dir);
    return {std::move(m.train), std::move(m.test)};
  }
  throw InvalidArgument("unknown dataset kind \"" + c.kind + "\"");
}

}  // namespace morphnas::engine
