#pragma once

#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphnas/engine/losses.hpp"
#include "morphnas/engine/meta.hpp"
#include "morphnas/hresnet/tree.hpp"

namespace morphnas::engine {

/// One record per training epoch (search epochs are numbered globally from 1).
struct HistoryEvent {
  double time = 0.0;  // seconds since the run first started
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  std::string phase;
  double train_loss = 0.0;
  std::optional<double> train_accuracy;
  double test_loss = 0.0;
  std::optional<double> test_accuracy;
  std::size_t param_count = 0;
  std::size_t depth = 0;
  std::size_t hidden = 0;
  double learning_rate = 0.0;
};

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> opt_double(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

inline json to_json(const HistoryEvent& e) {
  return json{{"time", e.time},
              {"epoch", e.epoch},
              {"iteration", e.iteration},
              {"phase", e.phase},
              {"train_loss", e.train_loss},
              {"train_accuracy", opt(e.train_accuracy)},
              {"test_loss", e.test_loss},
              {"test_accuracy", opt(e.test_accuracy)},
              {"param_count", e.param_count},
              {"depth", e.depth},
              {"hidden", e.hidden},
              {"learning_rate", e.learning_rate}};
}

inline HistoryEvent history_event_from_json(const json& j) {
  HistoryEvent e;
  e.time = j.at("time").get<double>();
  e.epoch = j.at("epoch").get<std::size_t>();
  e.iteration = j.at("iteration").get<std::size_t>();
  e.phase = j.at("phase").get<std::string>();
  e.train_loss = j.at("train_loss").get<double>();
  e.train_accuracy = opt_double(j, "train_accuracy");
  e.test_loss = j.at("test_loss").get<double>();
  e.test_accuracy = opt_double(j, "test_accuracy");
  e.param_count = j.at("param_count").get<std::size_t>();
  e.depth = j.at("depth").get<std::size_t>();
  e.hidden = j.value("hidden", std::size_t{0});
  e.learning_rate = j.at("learning_rate").get<double>();
  return e;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// CSV of the history without wall-clock time, so equal runs export equal bytes.
inline std::string history_csv(const std::vector<HistoryEvent>& events) {
  std::string out =
      "epoch,iteration,phase,train_loss,train_accuracy,test_loss,test_accuracy,param_count,depth,hidden,learning_rate\n";
  auto o = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& e : events) {
    out += std::to_string(e.epoch) + "," + std::to_string(e.iteration) + "," + e.phase + "," +
           format_real(e.train_loss) + "," + o(e.train_accuracy) + "," + format_real(e.test_loss) + "," +
           o(e.test_accuracy) + "," + std::to_string(e.param_count) + "," + std::to_string(e.depth) + "," +
           std::to_string(e.hidden) + "," + format_real(e.learning_rate) + "\n";
  }
  return out;
}

/// Neuron bookkeeping of one layer over an iteration.
struct LayerDelta {
  LayerId id{};
  std::size_t added = 0;    // P_i
  std::size_t removed = 0;  // M_i, including units dropped when the layer was removed
  long long delta() const { return static_cast<long long>(added) - static_cast<long long>(removed); }
};

struct IterationReport {
  std::size_t iteration = 0;
  std::size_t neurons_added = 0;    // P
  std::size_t prune_requested = 0;  // M asked for
  std::size_t pruned = 0;           // units removed by importance pruning
  std::size_t removed_with_layers = 0;  // units dropped when an empty layer was removed
  std::size_t prune_shortfall = 0;
  std::vector<LayerDelta> layers;
  std::vector<LayerId> grown;
  std::vector<LayerId> removed;
  std::size_t params_before = 0;
  std::size_t params_after = 0;
  long long morph_param_delta = 0;  // summed over every morphism report
  std::size_t depth_before = 0;
  std::size_t depth_after = 0;
  std::size_t hidden_before = 0;
  std::size_t hidden_after = 0;
  std::size_t train_epochs = 0;
  std::optional<double> fit_a;
  Metrics train;
  Metrics test;
  std::map<std::string, double> timings;
  MetaParams meta;
  std::string interrupted;  // phase at which a stop cut the iteration short

  long long delta_n() const {
    return static_cast<long long>(neurons_added) - static_cast<long long>(pruned + removed_with_layers);
  }
};

inline json to_json(const Metrics& m) { return json{{"loss", m.loss}, {"accuracy", opt(m.accuracy)}}; }

inline Metrics metrics_from_json(const json& j) { return {j.at("loss").get<double>(), opt_double(j, "accuracy")}; }

inline json to_json(const IterationReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers)
    layers.push_back({{"layer", to_string(l.id)}, {"P", l.added}, {"M", l.removed}, {"dN", l.delta()}});
  json grown = json::array(), removed = json::array();
  for (auto id : r.grown) grown.push_back(to_string(id));
  for (auto id : r.removed) removed.push_back(to_string(id));
  const bool finite_a = r.fit_a && std::isfinite(*r.fit_a);
  return json{{"iteration", r.iteration},
              {"P", r.neurons_added},
              {"M_requested", r.prune_requested},
              {"M", r.pruned},
              {"prune_shortfall", r.prune_shortfall},
              {"M_layers", r.removed_with_layers},
              {"dN", r.delta_n()},
              {"layers", layers},
              {"grown", grown},
              {"removed", removed},
              {"params_before", r.params_before},
              {"params_after", r.params_after},
              {"morph_param_delta", r.morph_param_delta},
              {"depth_before", r.depth_before},
              {"depth_after", r.depth_after},
              {"hidden_before", r.hidden_before},
              {"hidden_after", r.hidden_after},
              {"train_epochs", r.train_epochs},
              {"fit_a", finite_a ? json(*r.fit_a) : json(nullptr)},
              {"fit_flat", r.fit_a && !finite_a},
              {"train", to_json(r.train)},
              {"test", to_json(r.test)},
              {"timings", r.timings},
              {"meta", to_json(r.meta)},
              {"interrupted", r.interrupted}};
}

}  // namespace morphnas::engine
