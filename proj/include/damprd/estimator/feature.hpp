#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "damprd/grid/network_case.hpp"

namespace damprd {

/// One regression input: a single generator or a station aggregate whose
/// injection is the sum of its members.
struct Feature {
  std::string id;
  std::vector<std::size_t> generators;  // positions in NetworkCase::generators
  double participation = 0.0;

  bool operator==(const Feature&) const = default;
};

inline double feature_value(const Feature& f, const std::vector<double>& gen_values) {
  double s = 0.0;
  for (auto g : f.generators) s += gen_values[g];
  return s;
}

inline double feature_capacity(const Feature& f, const grid::NetworkCase& c) {
  double s = 0.0;
  for (auto g : f.generators) s += c.generators[g].p_max;
  return s;
}

inline double feature_minimum(const Feature& f, const grid::NetworkCase& c) {
  double s = 0.0;
  for (auto g : f.generators) s += c.generators[g].p_min;
  return s;
}

/// One feature per generator, in case order.
inline std::vector<Feature> single_generator_features(const grid::NetworkCase& c, const std::vector<std::size_t>& gens) {
  std::vector<Feature> out;
  for (auto g : gens) out.push_back({c.generators[g].id, {g}, 0.0});
  return out;
}

}  // namespace damprd
