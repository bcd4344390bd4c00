#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "damprd/errors.hpp"
#include "damprd/estimator/feature.hpp"
#include "damprd/grid/network_case.hpp"
#include "damprd/small_signal/modes.hpp"

namespace damprd::estimator {

/// Narrows the regression inputs for a mode: non-dispatchable units and the
/// slack machine are dropped, units of one station are merged, and the `budget`
/// features with the largest summed speed participation are kept.  The result
/// is in case order.  A merged feature takes the station id; a lone unit keeps
/// its generator id.
inline std::vector<Feature> reduce_features(const grid::NetworkCase& c, const small_signal::Mode& mode,
                                            std::size_t budget) {
  if (!mode.electromechanical()) throw PreconditionError("feature reduction: mode is not electromechanical");
  if (budget < 2) throw PreconditionError("feature reduction: budget must be at least 2");
  if (static_cast<std::size_t>(mode.participation.size()) != c.generators.size())
    throw PreconditionError("feature reduction: mode does not match the case");

  std::vector<Feature> groups;
  std::vector<std::string> stations;
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    const auto& gen = c.generators[g];
    if (!gen.dispatchable || c.on_slack_bus(g)) continue;
    auto it = std::find(stations.begin(), stations.end(), gen.station);
    if (it == stations.end()) {
      stations.push_back(gen.station);
      groups.push_back({gen.id, {g}, 0.0});
    } else {
      groups[static_cast<std::size_t>(it - stations.begin())].generators.push_back(g);
    }
  }
  for (std::size_t k = 0; k < groups.size(); ++k) {
    auto& f = groups[k];
    if (f.generators.size() > 1) f.id = stations[k];
    for (auto g : f.generators) f.participation += mode.participation[static_cast<Eigen::Index>(g)];
  }
  if (groups.size() < 2) throw FeatureReductionError("feature reduction: fewer than two dispatchable features");
  if (groups.size() <= budget) return groups;

  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return groups[a].participation > groups[b].participation; });
  order.resize(budget);
  std::sort(order.begin(), order.end());
  std::vector<Feature> kept;
  for (auto k : order) kept.push_back(groups[k]);
  return kept;
}

}  // namespace damprd::estimator
