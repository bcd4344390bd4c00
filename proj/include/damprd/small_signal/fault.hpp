#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "damprd/errors.hpp"
#include "damprd/grid/network_case.hpp"
#include "damprd/grid/power_flow.hpp"
#include "damprd/small_signal/state_matrix.hpp"

namespace damprd::small_signal {

/// Three-phase fault applied as a near-short shunt at one bus.
struct FaultSpec {
  int bus = 0;             // bus id
  double start = 1.0;      // s
  double clear = 1.1;      // s
  double horizon = 20.0;   // s
  double step = 0.01;      // s
  Complex impedance{0.0, 1e-4};

  double duration() const { return clear - start; }
};

inline void validate(const FaultSpec& f) {
  if (f.start < 0.0) throw PreconditionError("fault: start time must be non-negative");
  if (f.duration() < 0.0 || f.duration() > 0.3 + 1e-12)
    throw PreconditionError("fault: clearing time minus start time must lie in [0, 0.3] s");
  if (!(f.step > 0.0) || f.step > 0.01 + 1e-12) throw PreconditionError("fault: integration step must be in (0, 0.01] s");
  if (!(f.horizon > f.clear)) throw PreconditionError("fault: horizon must extend past clearing");
  if (std::abs(f.impedance) == 0.0) throw PreconditionError("fault: impedance must be non-zero");
}

/// Rotor angle (rad) and speed deviation (p.u.) per machine on a fixed grid.
struct Trajectory {
  std::vector<double> t;
  Eigen::MatrixXd delta;  // samples x machines
  Eigen::MatrixXd omega;
  bool unstable = false;
  double clear_time = 0.0;

  std::size_t samples() const { return t.size(); }
};

namespace detail {

struct SwingModel {
  const ReducedNetwork* net;
  Eigen::VectorXd p_mech;
  Eigen::VectorXd two_h;
  Eigen::VectorXd damping;
  double omega_s;

  void derivative(const Eigen::VectorXd& delta, const Eigen::VectorXd& omega, Eigen::VectorXd& d_delta,
                  Eigen::VectorXd& d_omega) const {
    const Eigen::VectorXd pe = electrical_power(*net, delta);
    d_delta = omega_s * omega;
    d_omega = (p_mech - pe - damping.cwiseProduct(omega)).cwiseQuotient(two_h);
  }
};

inline void rk4(const SwingModel& m, Eigen::VectorXd& delta, Eigen::VectorXd& omega, double h) {
  Eigen::VectorXd k1d, k1w, k2d, k2w, k3d, k3w, k4d, k4w;
  m.derivative(delta, omega, k1d, k1w);
  m.derivative(delta + 0.5 * h * k1d, omega + 0.5 * h * k1w, k2d, k2w);
  m.derivative(delta + 0.5 * h * k2d, omega + 0.5 * h * k2w, k3d, k3w);
  m.derivative(delta + h * k3d, omega + h * k3w, k4d, k4w);
  delta += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
  omega += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
}

}  // namespace detail

/// Nonlinear classical-model response to a bus fault, integrated with fixed
/// step RK4.  Steps that straddle the fault or clearing instant are split so
/// the switching happens exactly on time.  Integration stops early, with
/// `unstable` set, once any centre-of-inertia angle deviation exceeds 10 rad.
inline Trajectory fault_simulate(const grid::NetworkCase& c, const grid::OperatingPoint& op, const FaultSpec& fault) {
  validate(fault);
  const std::size_t fault_bus = c.bus_index(fault.bus);
  const auto n = static_cast<Eigen::Index>(c.generators.size());

  const ReducedNetwork pre = reduce_network(c, op);
  const BusShunt shunt{fault_bus, 1.0 / fault.impedance};
  const ReducedNetwork faulted = reduce_network(c, op, std::span<const BusShunt>(&shunt, 1));

  Eigen::VectorXd delta(n), omega = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) delta[i] = std::arg(pre.emf[i]);
  const Eigen::VectorXd delta0 = delta;

  detail::SwingModel model;
  model.p_mech = electrical_power(pre, delta);
  model.two_h.resize(n);
  model.damping.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.two_h[i] = 2.0 * c.generators[static_cast<std::size_t>(i)].h;
    model.damping[i] = c.generators[static_cast<std::size_t>(i)].d;
  }
  model.omega_s = 2.0 * std::numbers::pi * c.frequency;
  const double total_h = model.two_h.sum();

  const auto steps = static_cast<Eigen::Index>(std::llround(fault.horizon / fault.step));
  Trajectory tr;
  tr.clear_time = fault.clear;
  tr.t.reserve(static_cast<std::size_t>(steps + 1));
  tr.delta.resize(steps + 1, n);
  tr.omega.resize(steps + 1, n);

  auto record = [&](Eigen::Index k, double t) {
    tr.t.push_back(t);
    tr.delta.row(k) = delta.transpose();
    tr.omega.row(k) = omega.transpose();
  };
  record(0, 0.0);

  const bool has_fault = fault.duration() > 0.0;
  Eigen::Index k = 0;
  for (; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * fault.step;
    const double t1 = static_cast<double>(k + 1) * fault.step;
    std::vector<double> cuts{t0};
    if (has_fault) {
      for (double ev : {fault.start, fault.clear})
        if (ev > t0 + 1e-12 && ev < t1 - 1e-12) cuts.push_back(ev);
    }
    cuts.push_back(t1);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const double mid = 0.5 * (cuts[s] + cuts[s + 1]);
      model.net = (has_fault && mid >= fault.start && mid < fault.clear) ? &faulted : &pre;
      detail::rk4(model, delta, omega, cuts[s + 1] - cuts[s]);
    }
    record(k + 1, t1);

    const Eigen::VectorXd dev = delta - delta0;
    const double coi = dev.dot(model.two_h) / total_h;
    if (!dev.allFinite() || (dev.array() - coi).abs().maxCoeff() > 10.0) {
      tr.unstable = true;
      ++k;
      break;
    }
  }
  const Eigen::Index kept = static_cast<Eigen::Index>(tr.t.size());
  tr.delta.conservativeResize(kept, n);
  tr.omega.conservativeResize(kept, n);
  return tr;
}

/// delta_a - delta_b minus its pre-fault value, scaled to max |.| = 1.
inline std::vector<double> relative_angle(const Trajectory& tr, std::size_t a, std::size_t b) {
  std::vector<double> out(tr.samples());
  if (out.empty()) return out;
  const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
  const double ref = tr.delta(0, ia) - tr.delta(0, ib);
  double peak = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    out[k] = tr.delta(r, ia) - tr.delta(r, ib) - ref;
    peak = std::max(peak, std::abs(out[k]));
  }
  if (peak > 0.0)
    for (auto& v : out) v /= peak;
  return out;
}

/// Inertia-weighted mean angle of the machines with non-negative real
/// `shape` minus that of the rest, centred and scaled like relative_angle.
/// Local swings inside either group largely cancel.
inline std::vector<double> group_angle(const Trajectory& tr, const grid::NetworkCase& c,
                                       const Eigen::VectorXcd& shape) {
  const auto n = static_cast<Eigen::Index>(c.generators.size());
  if (shape.size() != n || tr.delta.cols() != n) throw PreconditionError("group angle: one shape entry per machine required");
  Eigen::VectorXd wa = Eigen::VectorXd::Zero(n), wb = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) (shape[i].real() >= 0.0 ? wa : wb)[i] = c.generators[static_cast<std::size_t>(i)].h;
  if (wa.sum() <= 0.0 || wb.sum() <= 0.0) throw PreconditionError("group angle: mode shape has no opposing groups");
  wa /= wa.sum();
  wb /= wb.sum();
  std::vector<double> out(tr.samples());
  if (out.empty()) return out;
  const double ref = tr.delta.row(0).dot(wa - wb);
  double peak = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = tr.delta.row(static_cast<Eigen::Index>(k)).dot(wa - wb) - ref;
    peak = std::max(peak, std::abs(out[k]));
  }
  if (peak > 0.0)
    for (auto& v : out) v /= peak;
  return out;
}

struct DecayEstimate {
  double zeta = 0.0;
  std::vector<double> peak_times;
  std::vector<double> peak_values;
};

/// Damping ratio from the logarithmic decrement of successive positive
/// peaks of `y` at or after `t_from`.  Peaks closer than 0.7 periods of the
/// frequency hint are merged, keeping the larger one.
inline DecayEstimate trajectory_damping(std::span<const double> t, std::span<const double> y, double frequency_hint,
                                        double t_from = 0.0) {
  if (t.size() != y.size()) throw PreconditionError("trajectory damping: time and value lengths differ");
  if (!(frequency_hint > 0.0)) throw PreconditionError("trajectory damping: frequency hint must be positive");
  const double min_gap = 0.7 / frequency_hint;

  DecayEstimate est;
  for (std::size_t k = 1; k + 1 < y.size(); ++k) {
    if (t[k] < t_from || y[k] <= 0.0) continue;
    if (!(y[k] >= y[k - 1] && y[k] > y[k + 1])) continue;
    const double ym = y[k - 1], y0 = y[k], yp = y[k + 1];
    const double denom = ym - 2.0 * y0 + yp;
    double offset = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    const double value = y0 - 0.25 * (ym - yp) * offset;
    const double time = t[k] + offset * (t[k + 1] - t[k]);
    if (!est.peak_times.empty() && time - est.peak_times.back() < min_gap) {
      if (value > est.peak_values.back()) {
        est.peak_times.back() = time;
        est.peak_values.back() = value;
      }
      continue;
    }
    est.peak_times.push_back(time);
    est.peak_values.push_back(value);
  }
  if (est.peak_values.size() < 2)
    throw EstimationError("trajectory damping: fewer than two positive peaks detected");

  double sum = 0.0;
  const std::size_t pairs = est.peak_values.size() - 1;
  for (std::size_t k = 0; k < pairs; ++k) {
    const double dec = std::log(est.peak_values[k] / est.peak_values[k + 1]);
    sum += dec / std::sqrt(4.0 * std::numbers::pi * std::numbers::pi + dec * dec);
  }
  est.zeta = sum / static_cast<double>(pairs);
  return est;
}

/// CSV with header t,gen_<id>_delta,gen_<id>_omega,...; millisecond timestamps.
inline void write_trajectory_csv(std::ostream& os, const grid::NetworkCase& c, const Trajectory& tr) {
  os << "t";
  for (const auto& g : c.generators) os << ",gen_" << g.id << "_delta,gen_" << g.id << "_omega";
  os << '\n';
  char buf[64];
  for (std::size_t k = 0; k < tr.samples(); ++k) {
    std::snprintf(buf, sizeof buf, "%.3f", tr.t[k]);
    os << buf;
    for (Eigen::Index g = 0; g < tr.delta.cols(); ++g) {
      const auto r = static_cast<Eigen::Index>(k);
      std::snprintf(buf, sizeof buf, ",%.9e,%.9e", tr.delta(r, g), tr.omega(r, g));
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace damprd::small_signal
