#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "morphnas/core/error.hpp"
#include "morphnas/engine/meta.hpp"

namespace morphnas::engine {

struct DatasetConfig {
  std::string kind = "spiral";  // spiral | grid | mnist
  std::size_t n_per_class = 500;
  std::size_t test_per_class = 500;
  double noise_sd = 0.02;
  double turns = 1.5;
  std::size_t n_train = 4000;  // grid
  std::size_t n_test = 1000;   // grid
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
  std::string dir;  // mnist
};

struct ModelConfig {
  std::string initial = "linear";  // linear | residual
  std::size_t initial_hidden = 0;
  double dropout_p = 0.0;
  std::size_t seed_hidden = 2;
};

struct TrainingConfig {
  std::size_t batch_size = 64;
  std::size_t eval_batch_size = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;  // not implemented; must stay 0
  double grad_clip = 0.0;     // not implemented; must stay 0
  unsigned threads = 0;       // 0: hardware concurrency
};

struct SearchConfig {
  std::size_t max_iterations = 10;
  double ma_alpha = 0.5;
  double guided_share = 0.7;
  double firing_exponent = 33.0;
  double flatten_threshold = -5.0;
  double decay_target = 1e-3;
  std::size_t layer_floor = 1;
  std::size_t depth_floor = 10;
  std::optional<double> target_train_accuracy;  // clean stop once reached at an iteration end
};

struct RunConfig {
  DatasetConfig dataset;
  ModelConfig model;
  TrainingConfig training;
  SearchConfig search;
  MetaParams meta;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DatasetConfig, kind, n_per_class, test_per_class, noise_sd, turns,
                                                n_train, n_test, train_seed, test_seed, dir)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, initial, initial_hidden, dropout_p, seed_hidden)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainingConfig, batch_size, eval_batch_size, adam_beta1, adam_beta2,
                                                adam_eps, weight_decay, grad_clip, threads)

inline void to_json(json& j, const SearchConfig& s) {
  j = json{{"max_iterations", s.max_iterations},   {"ma_alpha", s.ma_alpha},
           {"guided_share", s.guided_share},       {"firing_exponent", s.firing_exponent},
           {"flatten_threshold", s.flatten_threshold}, {"decay_target", s.decay_target},
           {"layer_floor", s.layer_floor},         {"depth_floor", s.depth_floor},
           {"target_train_accuracy", s.target_train_accuracy ? json(*s.target_train_accuracy) : json(nullptr)}};
}

inline void from_json(const json& j, SearchConfig& s) {
  const SearchConfig d;
  s.max_iterations = j.value("max_iterations", d.max_iterations);
  s.ma_alpha = j.value("ma_alpha", d.ma_alpha);
  s.guided_share = j.value("guided_share", d.guided_share);
  s.firing_exponent = j.value("firing_exponent", d.firing_exponent);
  s.flatten_threshold = j.value("flatten_threshold", d.flatten_threshold);
  s.decay_target = j.value("decay_target", d.decay_target);
  s.layer_floor = j.value("layer_floor", d.layer_floor);
  s.depth_floor = j.value("depth_floor", d.depth_floor);
  s.target_train_accuracy.reset();
  if (j.contains("target_train_accuracy") && !j["target_train_accuracy"].is_null())
    s.target_train_accuracy = j["target_train_accuracy"].get<double>();
}

inline json to_json(const RunConfig& c) {
  return json{{"dataset", c.dataset}, {"model", c.model}, {"training", c.training},
              {"search", c.search},   {"meta", to_json(c.meta)}};
}

inline void check_config(const RunConfig& c) {
  const auto& d = c.dataset;
  if (d.kind != "spiral" && d.kind != "grid" && d.kind != "mnist")
    throw InvalidArgument("config: dataset.kind must be spiral, grid or mnist");
  if (c.model.initial != "linear" && c.model.initial != "residual")
    throw InvalidArgument("config: model.initial must be linear or residual");
  if (!(c.model.dropout_p >= 0.0 && c.model.dropout_p < 1.0))
    throw InvalidArgument("config: model.dropout_p must lie in [0, 1)");
  if (c.model.seed_hidden < 1) throw InvalidArgument("config: model.seed_hidden must be >= 1");
  if (c.training.batch_size == 0 || c.training.eval_batch_size == 0)
    throw InvalidArgument("config: batch sizes must be positive");
  if (c.training.weight_decay != 0.0) throw InvalidArgument("config: training.weight_decay is not supported");
  if (c.training.grad_clip != 0.0) throw InvalidArgument("config: training.grad_clip is not supported");
  if (!(c.search.ma_alpha >= 0.0 && c.search.ma_alpha <= 1.0))
    throw InvalidArgument("config: search.ma_alpha must lie in [0, 1]");
  if (!(c.search.guided_share >= 0.0 && c.search.guided_share <= 1.0))
    throw InvalidArgument("config: search.guided_share must lie in [0, 1]");
  if (!(c.search.decay_target > 0.0 && c.search.decay_target <= 1.0))
    throw InvalidArgument("config: search.decay_target must lie in (0, 1]");
}

/// Parses a config document; absent keys keep their defaults.
inline RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("config: document must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "dataset" && key != "model" && key != "training" && key != "search" && key != "meta")
      throw InvalidArgument("config: unknown section \"" + key + "\"");
  }
  RunConfig c;
  const json known = to_json(c);
  for (const auto& [section, body] : j.items()) {
    if (section == "meta") continue;
    if (!body.is_object()) throw InvalidArgument("config: section \"" + section + "\" must be an object");
    for (const auto& [key, _] : body.items()) {
      if (!known[section].contains(key))
        throw InvalidArgument("config: unknown key \"" + section + "." + key + "\"");
    }
  }
  try {
    if (j.contains("dataset")) c.dataset = j["dataset"].get<DatasetConfig>();
    if (j.contains("model")) c.model = j["model"].get<ModelConfig>();
    if (j.contains("training")) c.training = j["training"].get<TrainingConfig>();
    if (j.contains("search")) c.search = j["search"].get<SearchConfig>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (j.contains("meta")) c.meta = meta_from_json(j["meta"]);
  check_config(c);
  return c;
}

}  // namespace morphnas::engine
