#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "morphnas/core/error.hpp"
#include "morphnas/core/rng.hpp"
#include "morphnas/hresnet/inspect.hpp"

namespace morphnas::heuristics {

/// Spreads new neurons over layers. A share of them follows the exponential
/// moving average of each layer's net neuron change; the rest is uniform.
class GrowthAllocator {
 public:
  explicit GrowthAllocator(double alpha = 0.5, double guided_share = 0.7)
      : alpha_(alpha), guided_share_(guided_share) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("GrowthAllocator: alpha must lie in [0, 1]");
    if (!(guided_share >= 0.0 && guided_share <= 1.0))
      throw InvalidArgument("GrowthAllocator: guided share must lie in [0, 1]");
  }

  /// ma <- alpha * delta + (1 - alpha) * ma; unseen layers start from 0.
  void update_ma(const std::map<LayerId, long long>& delta) {
    for (const auto& [id, d] : delta) {
      double& ma = ma_[id];
      ma = alpha_ * static_cast<double>(d) + (1.0 - alpha_) * ma;
    }
  }

  /// Drops layers that no longer exist.
  void retain(const LayerCatalog& catalog) {
    std::map<LayerId, double> kept;
    for (const auto& e : catalog) {
      auto it = ma_.find(e.id);
      if (it != ma_.end()) kept.emplace(e.id, it->second);
    }
    ma_ = std::move(kept);
  }

  double moving_average(LayerId id) const {
    auto it = ma_.find(id);
    return it == ma_.end() ? 0.0 : it->second;
  }

  const std::map<LayerId, double>& averages() const { return ma_; }
  void set_average(LayerId id, double v) { ma_[id] = v; }

  double alpha() const { return alpha_; }
  double guided_share() const { return guided_share_; }

  /// floor(share * total) draws with p_i proportional to max(ma_i, 0) (uniform
  /// when no layer is positive), the rest uniform. Counts sum to `total`.
  std::map<LayerId, std::size_t> allocate(std::size_t total, const LayerCatalog& catalog, Rng& rng) const {
    if (catalog.empty()) throw InvalidArgument("allocate: empty layer catalog");
    std::map<LayerId, std::size_t> out;
    for (const auto& e : catalog) out[e.id] = 0;
    if (total == 0) return out;

    const std::size_t guided =
        static_cast<std::size_t>(std::floor(guided_share_ * static_cast<double>(total) + 1e-9));
    std::vector<double> cumulative(catalog.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      sum += std::max(moving_average(catalog[i].id), 0.0);
      cumulative[i] = sum;
    }
    const bool uniform = !(sum > 0.0);
    for (std::size_t n = 0; n < guided; ++n) {
      std::size_t pick;
      if (uniform) {
        pick = rng.below(catalog.size());
      } else {
        const double u = rng.uniform() * sum;
        pick = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                        cumulative.begin());
        if (pick >= catalog.size()) pick = catalog.size() - 1;
      }
      ++out[catalog[pick].id];
    }
    for (std::size_t n = guided; n < total; ++n) ++out[catalog[rng.below(catalog.size())].id];
    return out;
  }

 private:
  double alpha_;
  double guided_share_;
  std::map<LayerId, double> ma_;
};

}  // namespace morphnas::heuristics
