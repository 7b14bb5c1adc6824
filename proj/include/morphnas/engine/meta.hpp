#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "morphnas/core/error.hpp"

namespace morphnas::engine {

using json = nlohmann::json;

/// Operator-steered controls of a search.
struct MetaParams {
  std::size_t neurons_to_add = 64;
  std::optional<std::size_t> prune_count;
  std::optional<double> prune_ratio;  // wins over prune_count when both are set
  double learning_rate = 1e-3;
  std::size_t max_train_epochs = 20;
  std::size_t decay_epochs = 2;
  std::uint64_t seed = 0;
  bool stop = false;

  /// Neurons to remove this iteration for `added` new ones.
  std::size_t prune_target(std::size_t added) const {
    if (prune_ratio) return static_cast<std::size_t>(std::llround(*prune_ratio * static_cast<double>(added)));
    return prune_count.value_or(0);
  }

  bool operator==(const MetaParams&) const = default;
};

struct FieldError {
  std::string field;
  std::string message;
};

inline std::string describe(const std::vector<FieldError>& errs) {
  std::string s;
  for (const auto& e : errs) s += (s.empty() ? "" : "; ") + e.field + ": " + e.message;
  return s;
}

inline json to_json(const MetaParams& m) {
  return json{{"neurons_to_add", m.neurons_to_add},
              {"prune_count", m.prune_count ? json(*m.prune_count) : json(nullptr)},
              {"prune_ratio", m.prune_ratio ? json(*m.prune_ratio) : json(nullptr)},
              {"learning_rate", m.learning_rate},
              {"max_train_epochs", m.max_train_epochs},
              {"decay_epochs", m.decay_epochs},
              {"seed", m.seed},
              {"stop", m.stop}};
}

namespace detail {

inline bool read_count(const json& v, const char* field, std::size_t min, std::size_t& out,
                       std::vector<FieldError>& errs) {
  if (!v.is_number_integer() && !(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())) {
    errs.push_back({field, "must be an integer"});
    return false;
  }
  const double d = v.get<double>();
  if (d < static_cast<double>(min) || d > 1e15) {
    errs.push_back({field, "must be an integer >= " + std::to_string(min)});
    return false;
  }
  out = static_cast<std::size_t>(d);
  return true;
}

}  // namespace detail

/// Applies the keys present in `update` on top of `base`. Either every key is
/// valid and the merged value is returned, or nothing is applied and `errs`
/// names each offending field. `null` clears prune_count / prune_ratio.
inline std::optional<MetaParams> merge_meta(const MetaParams& base, const json& update,
                                            std::vector<FieldError>& errs) {
  errs.clear();
  if (!update.is_object()) {
    errs.push_back({"(document)", "must be a JSON object"});
    return std::nullopt;
  }
  MetaParams m = base;
  for (const auto& [key, v] : update.items()) {
    if (key == "neurons_to_add") {
      detail::read_count(v, "neurons_to_add", 0, m.neurons_to_add, errs);
    } else if (key == "prune_count") {
      std::size_t n = 0;
      if (v.is_null()) m.prune_count.reset();
      else if (detail::read_count(v, "prune_count", 0, n, errs)) m.prune_count = n;
    } else if (key == "prune_ratio") {
      if (v.is_null()) {
        m.prune_ratio.reset();
      } else if (!v.is_number() || !(v.get<double>() >= 0.0 && v.get<double>() <= 1.0)) {
        errs.push_back({"prune_ratio", "must be a number in [0, 1]"});
      } else {
        m.prune_ratio = v.get<double>();
      }
    } else if (key == "learning_rate") {
      if (!v.is_number() || !std::isfinite(v.get<double>()) || !(v.get<double>() > 0.0))
        errs.push_back({"learning_rate", "must be a finite number > 0"});
      else
        m.learning_rate = v.get<double>();
    } else if (key == "max_train_epochs") {
      detail::read_count(v, "max_train_epochs", 1, m.max_train_epochs, errs);
    } else if (key == "decay_epochs") {
      detail::read_count(v, "decay_epochs", 0, m.decay_epochs, errs);
    } else if (key == "seed") {
      std::size_t s = 0;
      if (detail::read_count(v, "seed", 0, s, errs)) m.seed = s;
    } else if (key == "stop") {
      if (!v.is_boolean()) errs.push_back({"stop", "must be true or false"});
      else m.stop = v.get<bool>();
    } else {
      errs.push_back({key, "unknown meta-parameter"});
    }
  }
  if (!errs.empty()) return std::nullopt;
  return m;
}

inline MetaParams meta_from_json(const json& doc, const MetaParams& defaults = {}) {
  std::vector<FieldError> errs;
  auto m = merge_meta(defaults, doc, errs);
  if (!m) throw InvalidArgument("meta-parameters: " + describe(errs));
  return *m;
}

}  // namespace morphnas::engine
