#pragma once

#include <complex>

#include <Eigen/Dense>

#include "damprd/errors.hpp"
#include "damprd/grid/network_case.hpp"

namespace damprd::grid {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Bus admittance matrix from the pi-model of every in-service branch.
/// Buses are ordered as in `c.buses`.
inline ComplexMatrix build_admittance(const NetworkCase& c) {
  const auto n = static_cast<Eigen::Index>(c.buses.size());
  if (!is_connected(c)) throw TopologyError("admittance: in-service branch graph is not connected");

  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    const auto f = static_cast<Eigen::Index>(c.bus_index(br.from));
    const auto t = static_cast<Eigen::Index>(c.bus_index(br.to));
    const Complex series = 1.0 / Complex(br.r, br.x);
    const Complex half_shunt(0.0, br.b / 2.0);
    y(f, f) += series + half_shunt;
    y(t, t) += series + half_shunt;
    y(f, t) -= series;
    y(t, f) -= series;
  }
  return y;
}

}  // namespace damprd::grid
