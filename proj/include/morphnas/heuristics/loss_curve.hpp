#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include "morphnas/core/error.hpp"

namespace morphnas::heuristics {

inline constexpr double kFlatteningThreshold = -5.0;

/// Fit of y = exp(a x) (1 - x) to a normalized loss curve.
struct LossCurveFit {
  double a = 0.0;
  double residual = 0.0;  // sum of squared errors at a

  bool flat_sentinel() const { return std::isinf(a) && a < 0; }
};

inline double loss_curve_model(double a, double x) { return std::exp(a * x) * (1.0 - x); }

/// Epoch index is mapped linearly to [0, 1] and losses min-max normalized;
/// `a` is found by a grid scan over [-50, 10] (step 0.25) refined by
/// golden-section search to 1e-3. Constant losses give a = -inf.
inline LossCurveFit fit_loss_curve(std::span<const double> losses) {
  const std::size_t n = losses.size();
  if (n < 3) throw InvalidArgument("fit_loss_curve: need at least 3 points");
  double lo = losses[0];
  double hi = losses[0];
  for (const double l : losses) {
    if (!std::isfinite(l)) throw InvalidArgument("fit_loss_curve: non-finite loss");
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  if (hi == lo) return {-std::numeric_limits<double>::infinity(), 0.0};

  auto sse = [&](double a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(n - 1);
      const double y = (losses[i] - lo) / (hi - lo);
      const double e = y - loss_curve_model(a, x);
      s += e * e;
    }
    return s;
  };

  constexpr double kLow = -50.0;
  constexpr double kHigh = 10.0;
  constexpr double kStep = 0.25;
  double best_a = kLow;
  double best = sse(kLow);
  for (int k = 1; kLow + k * kStep <= kHigh + 1e-12; ++k) {
    const double a = kLow + k * kStep;
    const double e = sse(a);
    if (e < best) {
      best = e;
      best_a = a;
    }
  }

  double left = std::max(kLow, best_a - kStep);
  double right = std::min(kHigh, best_a + kStep);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = right - inv_phi * (right - left);
  double d = left + inv_phi * (right - left);
  double fc = sse(c);
  double fd = sse(d);
  while (right - left > 1e-3) {
    if (fc < fd) {
      right = d;
      d = c;
      fd = fc;
      c = right - inv_phi * (right - left);
      fc = sse(c);
    } else {
      left = c;
      c = d;
      fc = fd;
      d = left + inv_phi * (right - left);
      fd = sse(d);
    }
  }
  const double a = 0.5 * (left + right);
  const double e = sse(a);
  if (e <= best) return {a, e};
  return {best_a, best};
}

/// Stop when the curve has flattened (a below threshold) or the epoch budget is spent.
inline bool should_stop(const LossCurveFit& fit, std::size_t epoch, std::size_t max_epochs,
                        double threshold = kFlatteningThreshold) {
  return fit.a < threshold || epoch >= max_epochs;
}

}  // namespace morphnas::heuristics
