#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/hresnet/inspect.hpp"
#include "morphnas/hresnet/morphism.hpp"
#include "morphnas/numkit/matrix.hpp"

namespace morphnas::heuristics {

inline constexpr double kDefaultFiringExponent = 33.0;

/// Running sums over a dataset pass, per hidden neuron of each residual node:
/// sum of |activation * activation gradient| and the count of samples where
/// the neuron fired.
class ImportanceAccumulator {
 public:
  struct LayerStats {
    std::vector<double> sum_abs_prod;
    std::vector<std::uint64_t> nonzero;
    std::uint64_t samples = 0;
  };

  template <class T>
  void accumulate(LayerId layer, const Matrix<T>& activations, const Matrix<T>& activation_grads) {
    if (!activations.same_shape(activation_grads)) {
      throw ShapeError("importance: activations " + activations.shape() + " vs gradients " +
                       activation_grads.shape());
    }
    auto& s = layers_[layer];
    const std::size_t h = activations.cols();
    if (s.samples == 0 && s.sum_abs_prod.empty()) {
      s.sum_abs_prod.assign(h, 0.0);
      s.nonzero.assign(h, 0);
    }
    if (s.sum_abs_prod.size() != h) {
      throw ShapeError("importance: " + to_string(layer) + " changed width from " +
                       std::to_string(s.sum_abs_prod.size()) + " to " + std::to_string(h) +
                       " without a reset");
    }
    for (std::size_t i = 0; i < activations.rows(); ++i) {
      const auto a = activations.row(i);
      const auto g = activation_grads.row(i);
      for (std::size_t j = 0; j < h; ++j) {
        s.sum_abs_prod[j] += std::abs(static_cast<double>(a[j]) * static_cast<double>(g[j]));
        if (a[j] > T{0}) ++s.nonzero[j];
      }
    }
    s.samples += activations.rows();
  }

  void reset() { layers_.clear(); }

  const std::map<LayerId, LayerStats>& layers() const { return layers_; }

  const LayerStats* find(LayerId layer) const {
    auto it = layers_.find(layer);
    return it == layers_.end() ? nullptr : &it->second;
  }

  bool operator==(const ImportanceAccumulator& o) const {
    if (layers_.size() != o.layers_.size()) return false;
    for (const auto& [id, s] : layers_) {
      auto it = o.layers_.find(id);
      if (it == o.layers_.end()) return false;
      if (s.sum_abs_prod != it->second.sum_abs_prod || s.nonzero != it->second.nonzero ||
          s.samples != it->second.samples)
        return false;
    }
    return true;
  }

 private:
  std::map<LayerId, LayerStats> layers_;
};

struct NeuronScore {
  NeuronRef ref;
  double score = 0.0;
};

/// score = A * (1 - B^exponent); A = sum |a * da|, B = firing fraction.
inline double importance_score(double sum_abs_prod, double firing_fraction,
                               double exponent = kDefaultFiringExponent) {
  return sum_abs_prod * (1.0 - std::pow(firing_fraction, exponent));
}

inline std::vector<NeuronScore> importance_scores(const ImportanceAccumulator& acc,
                                                  double exponent = kDefaultFiringExponent) {
  std::vector<NeuronScore> out;
  for (const auto& [id, s] : acc.layers()) {
    if (s.samples == 0) throw InvalidArgument("importance_scores: no samples accumulated for " + to_string(id));
    const double n = static_cast<double>(s.samples);
    for (std::size_t j = 0; j < s.sum_abs_prod.size(); ++j) {
      out.push_back({{id, j}, importance_score(s.sum_abs_prod[j], static_cast<double>(s.nonzero[j]) / n, exponent)});
    }
  }
  if (acc.layers().empty()) throw InvalidArgument("importance_scores: accumulator is empty");
  return out;
}

struct PruneSelection {
  std::vector<NeuronRef> victims;  // ascending score, ties by catalog order then neuron
  std::size_t shortfall = 0;       // requested minus available, when too many were asked for
};

/// The m globally least important neurons.
inline PruneSelection select_prune(std::span<const NeuronScore> scores, std::size_t m,
                                   const LayerCatalog& order) {
  std::map<LayerId, std::size_t> rank;
  for (std::size_t i = 0; i < order.size(); ++i) rank.emplace(order[i].id, i);
  std::vector<NeuronScore> sorted(scores.begin(), scores.end());
  for (const auto& s : sorted) {
    if (!rank.count(s.ref.layer)) throw InvalidArgument("select_prune: " + to_string(s.ref.layer) + " not in catalog");
  }
  std::sort(sorted.begin(), sorted.end(), [&rank](const NeuronScore& a, const NeuronScore& b) {
    if (a.score != b.score) return a.score < b.score;
    const auto ra = rank.at(a.ref.layer);
    const auto rb = rank.at(b.ref.layer);
    if (ra != rb) return ra < rb;
    return a.ref.neuron < b.ref.neuron;
  });
  PruneSelection sel;
  const std::size_t take = std::min(m, sorted.size());
  sel.shortfall = m - take;
  sel.victims.reserve(take);
  for (std::size_t i = 0; i < take; ++i) sel.victims.push_back(sorted[i].ref);
  return sel;
}

}  // namespace morphnas::heuristics
