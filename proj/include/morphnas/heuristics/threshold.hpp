#pragma once

#include <cmath>
#include <cstddef>

#include "morphnas/core/error.hpp"

namespace morphnas::heuristics {

/// Hidden width above which a residual node's inner connections become
/// residual themselves: cube root of fan_in * fan_out^2.
inline double growth_threshold(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) throw InvalidArgument("growth_threshold: dimensions must be >= 1");
  return std::cbrt(static_cast<double>(fan_in) * static_cast<double>(fan_out) *
                   static_cast<double>(fan_out));
}

/// H > (fan_in * fan_out^2)^(1/3), decided in exact integer arithmetic as
/// H^3 > fan_in * fan_out^2.
inline bool exceeds_growth_threshold(std::size_t hidden, std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) throw InvalidArgument("growth_threshold: dimensions must be >= 1");
  using wide = unsigned __int128;
  const wide h = hidden;
  return h * h * h > static_cast<wide>(fan_in) * fan_out * fan_out;
}

}  // namespace morphnas::heuristics
