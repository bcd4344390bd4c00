#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "damprd/errors.hpp"

namespace damprd::redispatch {

/// Allowed change of each feature over the next interval, for the total
/// increment (re-dispatch plus planned).
struct DispatchBounds {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> at_limit;  // sitting on a capacity bound

  std::size_t size() const { return lower.size(); }
};

/// Per-feature scheduling limits.
struct FeatureLimits {
  double x_min = 0.0;
  double x_max = 0.0;
  double ramp = 0.0;  // p.u. per interval
};

constexpr double reserve_fraction = 0.2;
constexpr double limit_tolerance = 1e-9;

/// Upper capacity bound, widened by the spinning-reserve share when asked.
inline double effective_max(const FeatureLimits& l, bool reserve) {
  return reserve ? l.x_max * (1.0 + reserve_fraction) : l.x_max;
}

inline DispatchBounds compute_bounds(std::span<const double> x, std::span<const FeatureLimits> limits, bool reserve) {
  if (x.size() != limits.size()) throw PreconditionError("bounds: dispatch and limits differ in length");
  DispatchBounds b;
  b.lower.resize(x.size());
  b.upper.resize(x.size());
  b.at_limit.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& l = limits[i];
    if (!(l.ramp >= 0.0) || !(l.x_max >= l.x_min)) throw PreconditionError("bounds: invalid feature limits");
    const double hi = effective_max(l, reserve);
    if (x[i] < l.x_min - limit_tolerance || x[i] > hi + limit_tolerance)
      throw PreconditionError("bounds: dispatch " + std::to_string(i) + " outside its capacity window");
    b.lower[i] = std::max(-l.ramp, l.x_min - x[i]);
    b.upper[i] = std::min(l.ramp, hi - x[i]);
    b.lower[i] = std::min(b.lower[i], 0.0);
    b.upper[i] = std::max(b.upper[i], 0.0);
    b.at_limit[i] = x[i] >= hi - limit_tolerance || x[i] <= l.x_min + limit_tolerance;
  }
  return b;
}

/// Moves the planned increments of at-limit features onto the others in
/// proportion to their remaining headroom in the direction of the spill.
/// The total planned increment is preserved.
inline std::vector<double> redistribute_planned(std::span<const double> planned, const std::vector<bool>& at_limit,
                                                const DispatchBounds& bounds) {
  const std::size_t n = planned.size();
  if (at_limit.size() != n || bounds.size() != n) throw PreconditionError("redistribution: length mismatch");
  std::vector<double> out(planned.begin(), planned.end());
  double spill = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!at_limit[i]) continue;
    spill += out[i];
    out[i] = 0.0;
  }
  if (spill == 0.0) return out;

  std::vector<double> room(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (at_limit[i]) continue;
    room[i] = spill > 0.0 ? std::max(0.0, bounds.upper[i] - out[i]) : std::max(0.0, out[i] - bounds.lower[i]);
    total += room[i];
  }
  if (total < std::abs(spill) - 1e-12)
    throw RedistributionError("redistribution: remaining features lack headroom for the planned increment");

  std::size_t last = n;
  double given = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (room[i] <= 0.0) continue;
    const double share = spill * room[i] / total;
    out[i] += share;
    given += share;
    last = i;
  }
  out[last] += spill - given;  // absorb rounding so the sum is exact
  return out;
}

}  // namespace damprd::redispatch
