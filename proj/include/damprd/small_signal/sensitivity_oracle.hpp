#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "damprd/errors.hpp"
#include "damprd/estimator/feature.hpp"
#include "damprd/grid/power_flow.hpp"
#include "damprd/small_signal/modes.hpp"
#include "damprd/small_signal/state_matrix.hpp"

namespace damprd::small_signal {

/// Finite-difference gradient of a scalar function of x.  Central
/// differences where x +- h stays inside [lower, upper], one-sided otherwise.
template <class Fn>
Eigen::VectorXd finite_difference(Fn&& f, std::span<const double> x0, double h, std::span<const double> lower,
                                  std::span<const double> upper) {
  if (!(h > 0.0)) throw PreconditionError("finite difference: step must be positive");
  const std::size_t m = x0.size();
  Eigen::VectorXd grad(static_cast<Eigen::Index>(m));
  std::vector<double> x(x0.begin(), x0.end());
  double f0 = 0.0;
  bool have_f0 = false;
  auto centre = [&]() {
    if (!have_f0) {
      f0 = f(std::span<const double>(x0.data(), m));
      have_f0 = true;
    }
    return f0;
  };
  for (std::size_t i = 0; i < m; ++i) {
    const bool up_ok = x0[i] + h <= upper[i] + 1e-12;
    const bool down_ok = x0[i] - h >= lower[i] - 1e-12;
    double d;
    if (up_ok && down_ok) {
      x[i] = x0[i] + h;
      const double fp = f(std::span<const double>(x));
      x[i] = x0[i] - h;
      const double fm = f(std::span<const double>(x));
      d = (fp - fm) / (2.0 * h);
    } else if (down_ok) {
      x[i] = x0[i] - h;
      d = (centre() - f(std::span<const double>(x))) / h;
    } else if (up_ok) {
      x[i] = x0[i] + h;
      d = (f(std::span<const double>(x)) - centre()) / h;
    } else {
      throw PreconditionError("finite difference: step larger than the feasible interval");
    }
    x[i] = x0[i];
    grad[static_cast<Eigen::Index>(i)] = d;
  }
  return grad;
}

struct OracleOptions {
  double step = 0.01;  // p.u.
  double correlation_threshold = 0.8;
  TargetModes target = TargetModes::electromechanical;
  ModalOptions modal;
  grid::PowerFlowOptions power_flow{1e-11, 50, 0.0};
};

/// Damping of the mode matched to `reference` at the operating point reached
/// by moving feature injections to `x` (slack generator balancing).
class PerturbedDamping {
 public:
  PerturbedDamping(const grid::NetworkCase& c, const grid::OperatingPoint& op, std::span<const Feature> features,
                   Eigen::VectorXcd reference, const OracleOptions& opt)
      : case_(c), op_(op), features_(features), reference_(std::move(reference)), opt_(opt) {}

  double operator()(std::span<const double> x) const {
    std::vector<double> dispatch = op_.gen_p;
    for (std::size_t f = 0; f < features_.size(); ++f) {
      const auto& feat = features_[f];
      const double shift = x[f] - feature_value(feat, op_.gen_p);
      const double cap = feature_capacity(feat, case_);
      for (auto g : feat.generators) dispatch[g] += shift * case_.generators[g].p_max / cap;
    }
    const grid::LoadLevels loads{op_.load_p, op_.load_q};
    const auto pf = grid::solve_power_flow(case_, dispatch, loads, opt_.power_flow, &op_);
    const auto sm = linearize(case_, pf);
    const auto modes = eigen_modes(sm, case_, opt_.modal);
    return match_mode(modes, reference_, opt_.correlation_threshold).damping;
  }

 private:
  const grid::NetworkCase& case_;
  const grid::OperatingPoint& op_;
  std::span<const Feature> features_;
  Eigen::VectorXcd reference_;
  OracleOptions opt_;
};

/// Model-based damping sensitivity d(zeta)/d(P) of the least-damped target
/// mode, one entry per feature, by perturbing each feature by +-h and
/// re-solving power flow and eigen-analysis.
inline Eigen::VectorXd perturbation_sensitivity(const grid::NetworkCase& c, const grid::OperatingPoint& op,
                                                std::span<const Feature> features, const OracleOptions& opt = {}) {
  if (features.empty()) throw PreconditionError("sensitivity oracle: empty feature set");
  const auto base_modes = eigen_modes(linearize(c, op), c, opt.modal);
  const Mode& target = min_damping_mode(base_modes, opt.target);

  std::vector<double> x0, lo, hi;
  for (const auto& f : features) {
    x0.push_back(feature_value(f, op.gen_p));
    lo.push_back(feature_minimum(f, c));
    hi.push_back(feature_capacity(f, c) * (1.0 + opt.power_flow.capacity_margin));
  }
  PerturbedDamping zeta(c, op, features, target.right_vector, opt);
  return finite_difference(zeta, x0, opt.step, lo, hi);
}

}  // namespace damprd::small_signal
