#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "damprd/errors.hpp"
#include "damprd/grid/admittance.hpp"
#include "damprd/grid/network_case.hpp"
#include "damprd/grid/power_flow.hpp"

namespace damprd::small_signal {

using grid::Complex;
using grid::ComplexMatrix;
using grid::ComplexVector;

/// Shunt added at one bus, e.g. a bolted fault.
struct BusShunt {
  std::size_t bus = 0;  // position in NetworkCase::buses
  Complex admittance;
};

/// The network seen from the generator internal nodes.  When the slack bus
/// carries no machine it is kept as an extra node with fixed voltage (an
/// infinite bus); `y` is then (n+1) x (n+1) with the infinite bus last.
struct ReducedNetwork {
  ComplexMatrix y;
  ComplexVector emf;  // machine internal EMFs at the operating point
  std::optional<Complex> infinite_bus;

  Eigen::Index machines() const { return emf.size(); }
};

/// Internal EMF of every machine: E = V + j x_d' I.
inline ComplexVector internal_emfs(const grid::NetworkCase& c, const grid::OperatingPoint& op) {
  const auto gen_bus = c.generator_buses();
  ComplexVector e(static_cast<Eigen::Index>(c.generators.size()));
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    const Complex vt = op.voltage(gen_bus[g]);
    const Complex current = std::conj(Complex(op.gen_p[g], op.gen_q[g]) / vt);
    e[static_cast<Eigen::Index>(g)] = vt + Complex(0.0, c.generators[g].xd_prime) * current;
  }
  return e;
}

/// Kron reduction to the machine internal nodes with loads converted to
/// constant admittances at the operating-point voltage.
inline ReducedNetwork reduce_network(const grid::NetworkCase& c, const grid::OperatingPoint& op,
                                     std::span<const BusShunt> shunts = {}) {
  const auto nb = static_cast<Eigen::Index>(c.buses.size());
  const auto ng = static_cast<Eigen::Index>(c.generators.size());
  const auto gen_bus = c.generator_buses();
  const auto load_bus = c.load_buses();
  const auto slack = static_cast<Eigen::Index>(c.slack_index());

  bool slack_has_machine = false;
  for (auto b : gen_bus)
    if (static_cast<Eigen::Index>(b) == slack) slack_has_machine = true;

  ComplexMatrix ybus = grid::build_admittance(c);
  for (std::size_t l = 0; l < c.loads.size(); ++l) {
    const auto b = static_cast<Eigen::Index>(load_bus[l]);
    const double vm = op.v[b];
    ybus(b, b) += Complex(op.load_p[l], -op.load_q[l]) / (vm * vm);
  }
  for (const auto& s : shunts) {
    const auto b = static_cast<Eigen::Index>(s.bus);
    ybus(b, b) += s.admittance;
  }

  // Kept nodes: machine internal nodes (+ infinite bus); eliminated: all
  // other network buses.
  const Eigen::Index nkeep = ng + (slack_has_machine ? 0 : 1);
  std::vector<Eigen::Index> elim;
  for (Eigen::Index i = 0; i < nb; ++i)
    if (slack_has_machine || i != slack) elim.push_back(i);
  const auto ne = static_cast<Eigen::Index>(elim.size());
  std::vector<Eigen::Index> elim_pos(static_cast<std::size_t>(nb), -1);
  for (Eigen::Index k = 0; k < ne; ++k) elim_pos[static_cast<std::size_t>(elim[static_cast<std::size_t>(k)])] = k;

  ComplexMatrix ykk = ComplexMatrix::Zero(nkeep, nkeep);
  ComplexMatrix yke = ComplexMatrix::Zero(nkeep, ne);
  ComplexMatrix yee(ne, ne);
  for (Eigen::Index a = 0; a < ne; ++a)
    for (Eigen::Index b = 0; b < ne; ++b) yee(a, b) = ybus(elim[static_cast<std::size_t>(a)], elim[static_cast<std::size_t>(b)]);

  for (Eigen::Index g = 0; g < ng; ++g) {
    const Complex yg = 1.0 / Complex(0.0, c.generators[static_cast<std::size_t>(g)].xd_prime);
    const Eigen::Index e = elim_pos[gen_bus[static_cast<std::size_t>(g)]];
    ykk(g, g) += yg;
    yke(g, e) -= yg;
    yee(e, e) += yg;
  }
  if (!slack_has_machine) {
    const Eigen::Index k = ng;
    ykk(k, k) = ybus(slack, slack);
    for (Eigen::Index a = 0; a < ne; ++a) yke(k, a) = ybus(slack, elim[static_cast<std::size_t>(a)]);
  }

  Eigen::PartialPivLU<ComplexMatrix> lu(yee);
  if (!(lu.rcond() > 1e-13)) throw ReductionError("network reduction: singular bus admittance block");
  ComplexMatrix yred = ykk - yke * lu.solve(yke.transpose());

  ReducedNetwork out;
  out.y = std::move(yred);
  out.emf = internal_emfs(c, op);
  if (!slack_has_machine) out.infinite_bus = op.voltage(static_cast<std::size_t>(slack));
  return out;
}

/// Electrical power out of each machine for the given rotor angles, keeping
/// EMF magnitudes fixed.
inline Eigen::VectorXd electrical_power(const ReducedNetwork& net, const Eigen::VectorXd& delta) {
  const Eigen::Index n = net.machines();
  const Eigen::Index nn = net.y.rows();
  ComplexVector e(nn);
  for (Eigen::Index i = 0; i < n; ++i) e[i] = std::polar(std::abs(net.emf[i]), delta[i]);
  if (net.infinite_bus) e[n] = *net.infinite_bus;
  const ComplexVector current = net.y * e;
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = (e[i] * std::conj(current[i])).real();
  return p;
}

/// Linearised classical-model dynamics about an operating point.
/// State ordering: (d_delta_1..d_delta_n, d_omega_1..d_omega_n), speeds in p.u.
struct StateMatrix {
  Eigen::MatrixXd a;
  Eigen::MatrixXd synchronizing;  // K = dPe/d_delta
  std::size_t machines = 0;
  Eigen::VectorXd inertia;  // H per machine, s
  grid::OperatingPoint at;
};

/// K_ik = dPe_i / d delta_k of the reduced network.
inline Eigen::MatrixXd synchronizing_matrix(const ReducedNetwork& net) {
  const Eigen::Index n = net.machines();
  const Eigen::Index nn = net.y.rows();
  std::vector<Complex> e(static_cast<std::size_t>(nn));
  for (Eigen::Index i = 0; i < n; ++i) e[static_cast<std::size_t>(i)] = net.emf[i];
  if (net.infinite_bus) e[static_cast<std::size_t>(n)] = *net.infinite_bus;

  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ei = std::abs(e[static_cast<std::size_t>(i)]);
    const double di = std::arg(e[static_cast<std::size_t>(i)]);
    double diag = 0.0;
    for (Eigen::Index j = 0; j < nn; ++j) {
      if (j == i) continue;
      const double ej = std::abs(e[static_cast<std::size_t>(j)]);
      const double dij = di - std::arg(e[static_cast<std::size_t>(j)]);
      const double g = net.y(i, j).real(), b = net.y(i, j).imag();
      const double dp = ei * ej * (g * std::sin(dij) - b * std::cos(dij));
      if (j < n) k(i, j) = dp;
      diag -= dp;
    }
    k(i, i) = diag;
  }
  return k;
}

/// Assembles A from 2H_i dw_i/dt = -sum_k K_ik d_delta_k - D_i dw_i and
/// d delta_i/dt = omega_s dw_i.
inline StateMatrix linearize(const grid::NetworkCase& c, const grid::OperatingPoint& op) {
  const auto net = reduce_network(c, op);
  const Eigen::MatrixXd k = synchronizing_matrix(net);
  const auto n = static_cast<Eigen::Index>(c.generators.size());
  const double omega_s = 2.0 * std::numbers::pi * c.frequency;

  StateMatrix sm;
  sm.machines = static_cast<std::size_t>(n);
  sm.a = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    sm.a(i, n + i) = omega_s;
    for (Eigen::Index j = 0; j < n; ++j) sm.a(n + i, j) = -k(i, j) / (2.0 * g.h);
    sm.a(n + i, n + i) = -g.d / (2.0 * g.h);
  }
  sm.synchronizing = k;
  sm.inertia.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) sm.inertia[i] = c.generators[static_cast<std::size_t>(i)].h;
  sm.at = op;
  return sm;
}

}  // namespace damprd::small_signal
