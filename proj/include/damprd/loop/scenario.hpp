#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "damprd/errors.hpp"
#include "damprd/estimator/naer.hpp"
#include "damprd/grid/network_case.hpp"

namespace damprd::loop {

/// Piecewise-linear time series sampled in minutes, held flat past its ends.
struct Profile {
  std::vector<double> t_min;
  std::vector<double> value;

  bool empty() const { return t_min.empty(); }

  double at(double t_s) const {
    if (t_min.empty()) return 1.0;
    const double m = t_s / 60.0;
    if (m <= t_min.front()) return value.front();
    if (m >= t_min.back()) return value.back();
    const auto hi = static_cast<std::size_t>(std::upper_bound(t_min.begin(), t_min.end(), m) - t_min.begin());
    const std::size_t lo = hi - 1;
    const double w = (m - t_min[lo]) / (t_min[hi] - t_min[lo]);
    return value[lo] + w * (value[hi] - value[lo]);
  }
};

/// Scheduled setpoint increments of one generator: delta_p at t_min, applied
/// at the dispatch event of the interval containing t_min.
struct PlannedSchedule {
  std::vector<double> t_min;
  std::vector<double> delta;

  double increment(double from_s, double to_s) const {
    double s = 0.0;
    for (std::size_t i = 0; i < t_min.size(); ++i) {
      const double t = t_min[i] * 60.0;
      if (t >= from_s && t < to_s) s += delta[i];
    }
    return s;
  }
};

enum class SensitivitySource { naer, oracle };

struct Scenario {
  grid::NetworkCase network;
  std::string case_path;
  std::vector<Profile> load_profiles;       // one per load; empty = flat 1.0
  std::vector<PlannedSchedule> planned;     // one per generator
  double horizon = 86400.0;                 // s
  double t1 = 900.0;                        // s, dispatch interval
  double threshold = 0.03;
  double sample_period = 1.0;               // s
  double noise_zeta = 0.002;                // absolute std on measured zeta
  double noise_zeta_tau = 0.0;              // s, AR(1) correlation time; 0 = white
  double load_fluctuation = 0.01;           // fraction of profile load
  double gen_fluctuation = 0.01;            // fraction of unit capacity
  std::uint64_t seed = 1;
  bool reserve = false;
  std::size_t feature_budget = 8;
  double ramp_fraction = 0.05;              // per interval, of capacity
  double ramp_time = 300.0;                 // s to traverse a full ramp step
  bool balance = true;
  std::size_t min_samples = 60;
  SensitivitySource sensitivity = SensitivitySource::naer;
  estimator::EstimatorConfig estimator;

  void validate() const {
    if (!(t1 > 0.0)) throw PreconditionError("scenario: T1 must be positive");
    if (!(threshold > 0.0 && threshold < 0.2)) throw PreconditionError("scenario: threshold must lie in (0, 0.2)");
    if (!(horizon >= 0.0)) throw PreconditionError("scenario: horizon must be non-negative");
    const double intervals = horizon / t1;
    if (std::abs(intervals - std::round(intervals)) > 1e-9)
      throw PreconditionError("scenario: horizon must be a multiple of T1");
    if (!(sample_period > 0.0)) throw PreconditionError("scenario: sample period must be positive");
    const double per = t1 / sample_period;
    if (std::abs(per - std::round(per)) > 1e-9)
      throw PreconditionError("scenario: T1 must be a multiple of the sample period");
    if (noise_zeta < 0.0 || noise_zeta_tau < 0.0 || load_fluctuation < 0.0 || gen_fluctuation < 0.0)
      throw PreconditionError("scenario: noise levels must be non-negative");
    if (feature_budget < 2) throw PreconditionError("scenario: feature budget must be at least 2");
    if (!(ramp_fraction > 0.0) || !(ramp_time > 0.0)) throw PreconditionError("scenario: ramp must be positive");
    if (load_profiles.size() != network.loads.size())
      throw PreconditionError("scenario: one load profile slot per load required");
    if (planned.size() != network.generators.size())
      throw PreconditionError("scenario: one planned schedule slot per generator required");
    estimator.validate();
  }

  std::size_t intervals() const { return static_cast<std::size_t>(std::llround(horizon / t1)); }
};

/// Scenario over a case with flat profiles and no planned increments.
inline Scenario default_scenario(grid::NetworkCase c) {
  Scenario s;
  s.load_profiles.resize(c.loads.size());
  s.planned.resize(c.generators.size());
  s.network = std::move(c);
  return s;
}

}  // namespace damprd::loop
