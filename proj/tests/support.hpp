#pragma once

#include <string>

#include "damprd/grid/network_case.hpp"
#include "damprd/io/case_file.hpp"

namespace damprd::test {

inline std::string data_path(const std::string& rel) { return std::string(DAMPRD_DATA_DIR) + "/" + rel; }

inline grid::NetworkCase load_case(const std::string& name) {
  return io::parse_case_file(data_path("cases/" + name + ".case"));
}

/// Two buses joined by one branch; bus 1 is the slack.
inline grid::NetworkCase two_bus(double x = 0.5) {
  grid::NetworkCase c;
  c.buses = {{1, grid::BusKind::slack, 20.0, 1.0}, {2, grid::BusKind::pq, 20.0, 1.0}};
  c.branches = {{1, 2, 0.0, x, 0.0, true}};
  return c;
}

}  // namespace damprd::test
