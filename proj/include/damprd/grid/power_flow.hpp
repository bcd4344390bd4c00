#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "damprd/errors.hpp"
#include "damprd/grid/admittance.hpp"
#include "damprd/grid/network_case.hpp"

namespace damprd::grid {

struct PowerFlowOptions {
  double tolerance = 1e-8;  // max |mismatch|, p.u.
  int max_iterations = 50;
  /// Setpoints may exceed P_max by this fraction of P_max (spinning reserve).
  double capacity_margin = 0.0;
};

/// A converged AC power-flow solution together with the injections that
/// produced it.  Bus vectors follow `NetworkCase::buses`, generator and load
/// vectors follow their case order.
struct OperatingPoint {
  Eigen::VectorXd p;      // net bus injection (generation - load)
  Eigen::VectorXd q;
  Eigen::VectorXd v;      // magnitude
  Eigen::VectorXd theta;  // angle, rad
  std::vector<double> gen_p;
  std::vector<double> gen_q;
  std::vector<double> load_p;
  std::vector<double> load_q;
  double t = 0.0;
  int iterations = 0;
  double mismatch = 0.0;

  Complex voltage(std::size_t bus) const {
    return std::polar(v[static_cast<Eigen::Index>(bus)], theta[static_cast<Eigen::Index>(bus)]);
  }
};

namespace detail {

struct BusPowers {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

inline BusPowers bus_powers(const ComplexMatrix& y, const Eigen::VectorXd& v, const Eigen::VectorXd& theta) {
  const auto n = v.size();
  ComplexVector vc(n);
  for (Eigen::Index i = 0; i < n; ++i) vc[i] = std::polar(v[i], theta[i]);
  const ComplexVector s = vc.cwiseProduct((y * vc).conjugate());
  return {s.real(), s.imag()};
}

}  // namespace detail

/// Newton-Raphson power flow in polar coordinates with a full Jacobian
/// refactorisation every iteration.  `gen_p` holds one setpoint per generator;
/// setpoints of generators on the slack bus are ignored except when several
/// machines share that bus, in which case only the first one balances.
/// `warm` (optional) supplies the starting voltages.
inline OperatingPoint solve_power_flow(const NetworkCase& c, std::span<const double> gen_p,
                                       const LoadLevels& loads, const PowerFlowOptions& opt = {},
                                       const OperatingPoint* warm = nullptr) {
  const std::size_t nb = c.buses.size();
  const std::size_t ng = c.generators.size();
  if (gen_p.size() != ng) throw PreconditionError("power flow: one setpoint per generator required");
  if (loads.p.size() != c.loads.size() || loads.q.size() != c.loads.size())
    throw PreconditionError("power flow: one P/Q pair per load required");

  const auto gen_bus = c.generator_buses();
  const auto load_bus = c.load_buses();
  const std::size_t slack = c.slack_index();

  // First generator on the slack bus (if any) balances the system.
  std::ptrdiff_t balancing = -1;
  for (std::size_t g = 0; g < ng; ++g) {
    if (gen_bus[g] == slack) {
      if (balancing < 0) balancing = static_cast<std::ptrdiff_t>(g);
      continue;
    }
  }
  for (std::size_t g = 0; g < ng; ++g) {
    if (static_cast<std::ptrdiff_t>(g) == balancing) continue;
    const auto& gen = c.generators[g];
    const double hi = gen.p_max * (1.0 + opt.capacity_margin);
    if (!(gen_p[g] >= gen.p_min - 1e-9 && gen_p[g] <= hi + 1e-9))
      throw PreconditionError("power flow: setpoint " + std::to_string(gen_p[g]) + " of generator " + gen.id +
                              " outside [" + std::to_string(gen.p_min) + ", " + std::to_string(hi) + "]");
  }

  const ComplexMatrix y = build_admittance(c);
  const Eigen::MatrixXd gm = y.real();
  const Eigen::MatrixXd bm = y.imag();

  Eigen::VectorXd p_spec = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
  Eigen::VectorXd q_spec = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
  for (std::size_t g = 0; g < ng; ++g)
    if (static_cast<std::ptrdiff_t>(g) != balancing) p_spec[static_cast<Eigen::Index>(gen_bus[g])] += gen_p[g];
  for (std::size_t l = 0; l < c.loads.size(); ++l) {
    p_spec[static_cast<Eigen::Index>(load_bus[l])] -= loads.p[l];
    q_spec[static_cast<Eigen::Index>(load_bus[l])] -= loads.q[l];
  }

  // Unknowns: angles of all non-slack buses, magnitudes of PQ buses.
  std::vector<Eigen::Index> ang, mag;
  for (std::size_t i = 0; i < nb; ++i) {
    if (c.buses[i].kind != BusKind::slack) ang.push_back(static_cast<Eigen::Index>(i));
    if (c.buses[i].kind == BusKind::pq) mag.push_back(static_cast<Eigen::Index>(i));
  }
  const auto na = static_cast<Eigen::Index>(ang.size());
  const auto nm = static_cast<Eigen::Index>(mag.size());

  Eigen::VectorXd v(static_cast<Eigen::Index>(nb));
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));
  if (warm != nullptr && static_cast<std::size_t>(warm->v.size()) == nb) {
    v = warm->v;
    theta = warm->theta;
  } else {
    for (std::size_t i = 0; i < nb; ++i) v[static_cast<Eigen::Index>(i)] = 1.0;
  }
  for (std::size_t i = 0; i < nb; ++i)
    if (c.buses[i].kind != BusKind::pq) v[static_cast<Eigen::Index>(i)] = c.buses[i].v_set;
  theta[static_cast<Eigen::Index>(slack)] = 0.0;

  auto mismatch = [&](const detail::BusPowers& s) {
    Eigen::VectorXd f(na + nm);
    for (Eigen::Index k = 0; k < na; ++k) f[k] = p_spec[ang[k]] - s.p[ang[k]];
    for (Eigen::Index k = 0; k < nm; ++k) f[na + k] = q_spec[mag[k]] - s.q[mag[k]];
    return f;
  };

  std::vector<Eigen::Index> ang_pos(nb, -1), mag_pos(nb, -1);
  for (Eigen::Index k = 0; k < na; ++k) ang_pos[static_cast<std::size_t>(ang[k])] = k;
  for (Eigen::Index k = 0; k < nm; ++k) mag_pos[static_cast<std::size_t>(mag[k])] = k;

  int iter = 0;
  detail::BusPowers s = detail::bus_powers(y, v, theta);
  Eigen::VectorXd f = mismatch(s);
  double norm = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  while (norm > opt.tolerance) {
    if (iter >= opt.max_iterations || !std::isfinite(norm))
      throw DivergenceError("power flow did not converge in " + std::to_string(iter) +
                                " iterations (max mismatch " + std::to_string(norm) + ")",
                            norm, iter);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(na + nm, na + nm);
    const auto n = static_cast<Eigen::Index>(nb);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index rp = ang_pos[static_cast<std::size_t>(i)];
      const Eigen::Index rq = mag_pos[static_cast<std::size_t>(i)];
      if (rp < 0 && rq < 0) continue;
      for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index cp = ang_pos[static_cast<std::size_t>(k)];
        const Eigen::Index cq = mag_pos[static_cast<std::size_t>(k)];
        if (cp < 0 && cq < 0) continue;
        double dp_dth, dp_dv, dq_dth, dq_dv;
        if (i == k) {
          dp_dth = -s.q[i] - bm(i, i) * v[i] * v[i];
          dp_dv = s.p[i] / v[i] + gm(i, i) * v[i];
          dq_dth = s.p[i] - gm(i, i) * v[i] * v[i];
          dq_dv = s.q[i] / v[i] - bm(i, i) * v[i];
        } else {
          if (gm(i, k) == 0.0 && bm(i, k) == 0.0) continue;
          const double t = theta[i] - theta[k];
          const double ct = std::cos(t), st = std::sin(t);
          dp_dth = v[i] * v[k] * (gm(i, k) * st - bm(i, k) * ct);
          dp_dv = v[i] * (gm(i, k) * ct + bm(i, k) * st);
          dq_dth = -v[i] * v[k] * (gm(i, k) * ct + bm(i, k) * st);
          dq_dv = v[i] * (gm(i, k) * st - bm(i, k) * ct);
        }
        if (rp >= 0 && cp >= 0) jac(rp, cp) = dp_dth;
        if (rp >= 0 && cq >= 0) jac(rp, na + cq) = dp_dv;
        if (rq >= 0 && cp >= 0) jac(na + rq, cp) = dq_dth;
        if (rq >= 0 && cq >= 0) jac(na + rq, na + cq) = dq_dv;
      }
    }
    const Eigen::VectorXd dx = jac.partialPivLu().solve(f);
    for (Eigen::Index k = 0; k < na; ++k) theta[ang[k]] += dx[k];
    for (Eigen::Index k = 0; k < nm; ++k) v[mag[k]] += dx[na + k];
    ++iter;
    s = detail::bus_powers(y, v, theta);
    f = mismatch(s);
    norm = f.cwiseAbs().maxCoeff();
  }

  OperatingPoint op;
  op.p = s.p;
  op.q = s.q;
  op.v = v;
  op.theta = theta;
  op.iterations = iter;
  op.mismatch = norm;
  op.load_p = loads.p;
  op.load_q = loads.q;

  // Generator outputs: bus injection plus local load, Q shared by capacity.
  Eigen::VectorXd gen_bus_p = s.p, gen_bus_q = s.q;
  for (std::size_t l = 0; l < c.loads.size(); ++l) {
    gen_bus_p[static_cast<Eigen::Index>(load_bus[l])] += loads.p[l];
    gen_bus_q[static_cast<Eigen::Index>(load_bus[l])] += loads.q[l];
  }
  op.gen_p.assign(gen_p.begin(), gen_p.end());
  op.gen_q.assign(ng, 0.0);
  std::vector<double> bus_cap(nb, 0.0);
  for (std::size_t g = 0; g < ng; ++g) bus_cap[gen_bus[g]] += c.generators[g].p_max;
  if (balancing >= 0) {
    const auto b = static_cast<Eigen::Index>(slack);
    double others = 0.0;
    for (std::size_t g = 0; g < ng; ++g)
      if (gen_bus[g] == slack && static_cast<std::ptrdiff_t>(g) != balancing) others += gen_p[g];
    op.gen_p[static_cast<std::size_t>(balancing)] = gen_bus_p[b] - others;
  }
  for (std::size_t g = 0; g < ng; ++g)
    op.gen_q[g] = gen_bus_q[static_cast<Eigen::Index>(gen_bus[g])] * c.generators[g].p_max / bus_cap[gen_bus[g]];
  return op;
}

inline OperatingPoint solve_power_flow(const NetworkCase& c, const PowerFlowOptions& opt = {}) {
  const auto dispatch = c.base_dispatch();
  return solve_power_flow(c, dispatch, LoadLevels::base(c), opt);
}

/// Active power losses: total injection summed over buses.
inline double losses(const OperatingPoint& op) { return op.p.sum(); }

}  // namespace damprd::grid
