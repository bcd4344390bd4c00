#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "damprd/errors.hpp"
#include "damprd/estimator/feature.hpp"
#include "damprd/estimator/naer.hpp"
#include "damprd/estimator/reduce.hpp"
#include "damprd/estimator/window.hpp"
#include "damprd/grid/power_flow.hpp"
#include "damprd/loop/ambient.hpp"
#include "damprd/loop/scenario.hpp"
#include "damprd/redispatch/bounds.hpp"
#include "damprd/redispatch/lp.hpp"
#include "damprd/small_signal/modes.hpp"
#include "damprd/small_signal/sensitivity_oracle.hpp"
#include "damprd/small_signal/state_matrix.hpp"

namespace damprd::loop {

struct MinuteRecord {
  double t = 0.0;
  double zeta_true = 0.0;  // at this second, ambient fluctuations included
  double zeta_est = 0.0;   // 60 s mean of the noisy readings
  std::vector<double> dispatch;
};

/// One dispatch event at the start of an interval.
struct IntervalRecord {
  std::size_t index = 0;
  double t = 0.0;
  double zeta_model = 0.0;  // noise-free, at setpoints and profile loads
  double zeta_est = 0.0;
  bool triggered = false;
  std::string action = "none";  // none | redispatch | skip
  std::string reason;
  std::vector<std::string> features;
  std::optional<estimator::SensitivityEstimate> estimate;
  std::optional<estimator::SampleWindow> samples;  // feature-level window given to the estimator
  std::optional<redispatch::RedispatchSolution> solution;
  std::vector<double> setpoint_before;  // per generator
  std::vector<double> planned;          // applied planned increment
  std::vector<double> redispatch;       // committed re-dispatch
  std::vector<double> setpoint_after;
  double spilled = 0.0;  // planned increment no unit could absorb
  double t2 = 0.0;
  std::size_t window = 0;
};

struct SimulationLog {
  std::vector<std::string> generator_ids;
  std::vector<MinuteRecord> minutes;
  std::vector<IntervalRecord> intervals;
  bool aborted = false;
  std::string abort_reason;
};

/// Discrete-event form of the three threads: ambient measurements and noisy
/// damping readings every sample period, a dispatch decision every T1.  Each
/// thread draws from its own seeded stream, so the log depends only on the
/// scenario and its seed.
class ClosedLoop {
 public:
  explicit ClosedLoop(Scenario s)
      : s_(std::move(s)),
        c_(s_.network),
        n_(c_.generators.size()),
        ambient_rng_(make_stream(s_.seed, 1)),
        meter_rng_(make_stream(s_.seed, 2)),
        meter_(s_.noise_zeta, s_.noise_zeta_tau, s_.sample_period) {
    s_.validate();
    if (s_.ramp_time > s_.t1) throw PreconditionError("scenario: ramp time must not exceed T1");
    std::vector<std::string> ids;
    for (const auto& g : c_.generators) ids.push_back(g.id);
    log_.generator_ids = ids;
    raw_ = estimator::SampleWindow(ids);
    pf_opts_.capacity_margin = s_.reserve ? redispatch::reserve_fraction : 0.0;

    start_ = c_.base_dispatch();
    target_ = start_;
    rate_.resize(n_);
    for (std::size_t g = 0; g < n_; ++g) {
      const auto& gen = c_.generators[g];
      rate_[g] = s_.ramp_fraction * gen.p_max / s_.ramp_time;
      if (!c_.on_slack_bus(g) && (start_[g] < gen.p_min - 1e-9 || start_[g] > upper(g) + 1e-9))
        throw PreconditionError("scenario: initial dispatch of " + gen.id + " outside its capacity window");
    }
    if (s_.horizon > 0.0) tick(0.0);
  }

  ClosedLoop(const ClosedLoop&) = delete;
  ClosedLoop& operator=(const ClosedLoop&) = delete;

  bool done() const { return log_.aborted || k_ >= s_.intervals(); }
  const SimulationLog& log() const { return log_; }
  const Scenario& scenario() const { return s_; }
  std::vector<double> setpoints() const { return target_; }

  /// Drops all buffered regression samples, e.g. after a topology change.
  void reset_window() { raw_.clear(); }

  /// Dispatch decision at the start of the next interval, then its samples.
  const IntervalRecord& step() {
    if (done()) throw PreconditionError("closed loop: scenario already finished");
    const double tau = static_cast<double>(k_) * s_.t1;
    IntervalRecord rec;
    rec.index = k_;
    rec.t = tau;
    rec.setpoint_before = target_;
    try {
      decide(tau, rec);
      log_.intervals.push_back(std::move(rec));
      const auto per = static_cast<long>(std::llround(s_.t1 / s_.sample_period));
      for (long i = 1; i <= per; ++i) tick(tau + static_cast<double>(i) * s_.sample_period);
    } catch (const Error& e) {
      if (log_.intervals.empty() || log_.intervals.back().index != k_) log_.intervals.push_back(std::move(rec));
      log_.aborted = true;
      log_.abort_reason = e.what();
    }
    ++k_;
    return log_.intervals.back();
  }

  SimulationLog run() {
    while (!done()) step();
    return log_;
  }

 private:
  double upper(std::size_t g) const {
    const double pmax = c_.generators[g].p_max;
    return s_.reserve ? pmax * (1.0 + redispatch::reserve_fraction) : pmax;
  }

  bool movable(std::size_t g) const { return !c_.on_slack_bus(g); }

  double setpoint_at(std::size_t g, double t) const {
    const double d = target_[g] - start_[g];
    const double moved = std::min(std::abs(d), rate_[g] * std::max(0.0, t - ramp_t0_));
    return start_[g] + std::copysign(moved, d);
  }

  grid::LoadLevels profile_loads(double t) const {
    grid::LoadLevels out;
    for (std::size_t l = 0; l < c_.loads.size(); ++l) {
      const double f = s_.load_profiles[l].at(t);
      out.p.push_back(c_.loads[l].p * f);
      out.q.push_back(c_.loads[l].q * f);
    }
    return out;
  }

  void tick(double t) {
    const grid::LoadLevels loads = generate_ambient(s_, t, ambient_rng_);
    std::vector<double> p(n_);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t g = 0; g < n_; ++g) {
      const auto& gen = c_.generators[g];
      p[g] = setpoint_at(g, t);
      if (!movable(g)) continue;
      if (s_.gen_fluctuation > 0.0) p[g] += s_.gen_fluctuation * gen.p_max * nd(ambient_rng_);
      p[g] = std::clamp(p[g], gen.p_min, upper(g));
    }
    op_ = grid::solve_power_flow(c_, p, loads, pf_opts_, op_ ? &*op_ : nullptr);
    op_->t = t;
    const auto modes = small_signal::eigen_modes(small_signal::linearize(c_, *op_), c_);
    const double z = true_min_damping(modes, small_signal::TargetModes::inter_area);
    const double zm = meter_.read(z, meter_rng_);

    if (have_prev_ && t - s_.sample_period >= window_start_ - 1e-9) {
      std::vector<double> dx(n_);
      for (std::size_t g = 0; g < n_; ++g) dx[g] = op_->gen_p[g] - prev_p_[g];
      raw_.push(dx, zm - prev_meas_, t);
    }
    prev_p_ = op_->gen_p;
    prev_meas_ = zm;
    have_prev_ = true;

    recent_.push_back(zm);
    const auto keep = static_cast<std::size_t>(std::llround(60.0 / s_.sample_period));
    while (recent_.size() > std::max<std::size_t>(keep, 1)) recent_.pop_front();

    if (std::abs(std::remainder(t, 60.0)) < 1e-9) {
      MinuteRecord m;
      m.t = t;
      m.zeta_true = z;
      m.zeta_est = recent_mean();
      m.dispatch = op_->gen_p;
      log_.minutes.push_back(std::move(m));
    }
  }

  double recent_mean() const {
    double s = 0.0;
    for (double v : recent_) s += v;
    return recent_.empty() ? 0.0 : s / static_cast<double>(recent_.size());
  }

  /// Planned increments, clipped to each unit's capacity and ramp, with the
  /// clipped part handed to the other dispatchable units by headroom.
  std::vector<double> legal_planned(double tau, double& spilled) const {
    std::vector<double> inc(n_, 0.0), lo(n_, 0.0), hi(n_, 0.0);
    double spill = 0.0;
    for (std::size_t g = 0; g < n_; ++g) {
      if (!movable(g)) continue;
      const auto& gen = c_.generators[g];
      const double ramp = s_.ramp_fraction * gen.p_max;
      lo[g] = std::max(gen.p_min, target_[g] - ramp) - target_[g];
      hi[g] = std::min(upper(g), target_[g] + ramp) - target_[g];
      const double want = s_.planned[g].increment(tau, tau + s_.t1);
      inc[g] = std::clamp(want, lo[g], hi[g]);
      spill += want - inc[g];
    }
    if (spill != 0.0) {
      double room = 0.0;
      std::vector<double> r(n_, 0.0);
      for (std::size_t g = 0; g < n_; ++g) {
        if (!movable(g) || !c_.generators[g].dispatchable) continue;
        r[g] = spill > 0.0 ? hi[g] - inc[g] : inc[g] - lo[g];
        room += r[g];
      }
      const double take = std::min(room, std::abs(spill));
      if (room > 0.0)
        for (std::size_t g = 0; g < n_; ++g) inc[g] += std::copysign(take * r[g] / room, spill);
      spill -= std::copysign(take, spill);
    }
    spilled = spill;
    return inc;
  }

  void decide(double tau, IntervalRecord& rec) {
    rec.zeta_est = recent_mean();
    rec.planned = legal_planned(tau, rec.spilled);
    rec.redispatch.assign(n_, 0.0);
    rec.window = raw_.size();

    const grid::OperatingPoint model = grid::solve_power_flow(c_, target_, profile_loads(tau), pf_opts_, op_ ? &*op_ : nullptr);
    const auto modes = small_signal::eigen_modes(small_signal::linearize(c_, model), c_);
    rec.zeta_model = true_min_damping(modes, small_signal::TargetModes::inter_area);

    rec.triggered = rec.zeta_est < s_.threshold;
    if (rec.triggered) {
      try {
        optimise(model, modes, rec);
      } catch (const DivergenceError&) {
        throw;
      } catch (const Error& e) {
        rec.action = "skip";
        rec.reason = e.what();
      }
    }
    commit(tau, rec);
  }

  void optimise(const grid::OperatingPoint& model, const std::vector<small_signal::Mode>& modes,
                IntervalRecord& rec) {
    const auto& mode = small_signal::min_damping_mode(modes, small_signal::TargetModes::inter_area);
    const auto features = estimator::reduce_features(c_, mode, s_.feature_budget);
    const std::size_t m = features.size();
    for (const auto& f : features) rec.features.push_back(f.id);

    estimator::SensitivityEstimate est;
    if (s_.sensitivity == SensitivitySource::oracle) {
      small_signal::OracleOptions opt;
      opt.target = small_signal::TargetModes::inter_area;
      opt.power_flow.capacity_margin = pf_opts_.capacity_margin;
      est.psi = small_signal::perturbation_sensitivity(c_, model, features, opt);
      est.feature_ids = rec.features;
      est.spread = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
      est.replicates = 1;
    } else {
      if (raw_.size() < std::max(s_.min_samples, m + 1)) {
        rec.action = "skip";
        rec.reason = "insufficient data: " + std::to_string(raw_.size()) + " samples in window";
        return;
      }
      estimator::SampleWindow win(rec.features);
      const Eigen::MatrixXd x = raw_.design();
      const Eigen::VectorXd z = raw_.response();
      const auto ts = raw_.timestamps();
      std::vector<double> row(m);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (std::size_t f = 0; f < m; ++f) {
          row[f] = 0.0;
          for (auto g : features[f].generators) row[f] += x(i, static_cast<Eigen::Index>(g));
        }
        win.push(row, z[i], ts[static_cast<std::size_t>(i)]);
      }
      auto cfg = s_.estimator;
      cfg.seed = s_.seed * 1000003ULL + rec.index;
      est = estimator::naer_estimate(win, cfg);
      rec.samples = std::move(win);
      if (est.flagged) {
        rec.estimate = est;
        rec.action = "skip";
        rec.reason = "ill-conditioned window (condition " + std::to_string(est.condition) + ")";
        return;
      }
    }
    rec.estimate = est;

    std::vector<double> x(m), planned(m, 0.0);
    std::vector<redispatch::FeatureLimits> limits(m);
    for (std::size_t f = 0; f < m; ++f) {
      for (auto g : features[f].generators) {
        x[f] += target_[g];
        planned[f] += rec.planned[g];
      }
      limits[f].x_min = feature_minimum(features[f], c_);
      limits[f].x_max = feature_capacity(features[f], c_);
      limits[f].ramp = s_.ramp_fraction * limits[f].x_max;
    }
    const auto bounds = redispatch::compute_bounds(x, limits, s_.reserve);
    const bool any_limit = std::any_of(bounds.at_limit.begin(), bounds.at_limit.end(), [](bool b) { return b; });
    std::vector<double> adjusted = planned;
    if (any_limit) adjusted = redispatch::redistribute_planned(planned, bounds.at_limit, bounds);

    std::vector<double> psi(est.psi.data(), est.psi.data() + est.psi.size());
    const auto lp = redispatch::build_lp(rec.features, psi, bounds, adjusted, s_.balance);
    const auto sol = redispatch::solve_lp(lp);
    rec.solution = sol;
    if (!sol.feasible()) {
      rec.action = "skip";
      rec.reason = "re-dispatch LP infeasible";
      return;
    }

    // Planned moves between features follow the redistribution.
    for (std::size_t f = 0; f < m; ++f) {
      const double shift = adjusted[f] - planned[f];
      const double cap = feature_capacity(features[f], c_);
      for (auto g : features[f].generators) rec.planned[g] += shift * c_.generators[g].p_max / cap;
    }
    double moved = 0.0;
    for (double v : sol.dx_r) moved = std::max(moved, std::abs(v));
    if (moved <= 1e-9) {
      rec.action = "skip";
      rec.reason = "zero re-dispatch capacity";
      return;
    }
    for (std::size_t f = 0; f < m; ++f) {
      const double cap = feature_capacity(features[f], c_);
      for (auto g : features[f].generators) rec.redispatch[g] += sol.dx_r[f] * c_.generators[g].p_max / cap;
    }
    // Security check: the new setpoints must have a power-flow solution at
    // both ends of the interval's load profile.
    std::vector<double> proposed(n_);
    for (std::size_t g = 0; g < n_; ++g)
      proposed[g] = movable(g) ? std::clamp(target_[g] + rec.planned[g] + rec.redispatch[g], c_.generators[g].p_min,
                                            upper(g))
                               : target_[g];
    try {
      for (double t : {rec.t, std::min(rec.t + s_.t1, s_.horizon)})
        grid::solve_power_flow(c_, proposed, profile_loads(t), pf_opts_, &model);
    } catch (const DivergenceError&) {
      rec.redispatch.assign(n_, 0.0);
      rec.action = "skip";
      rec.reason = "re-dispatch rejected: no power-flow solution at the new setpoints";
      return;
    }
    rec.action = "redispatch";
  }

  void commit(double tau, IntervalRecord& rec) {
    start_ = target_;
    double t2 = 0.0;
    for (std::size_t g = 0; g < n_; ++g) {
      if (!movable(g)) continue;
      const auto& gen = c_.generators[g];
      target_[g] = std::clamp(start_[g] + rec.planned[g] + rec.redispatch[g], gen.p_min, upper(g));
      t2 = std::max(t2, std::abs(target_[g] - start_[g]) / rate_[g]);
    }
    ramp_t0_ = tau;
    rec.t2 = t2;
    rec.setpoint_after = target_;
    window_start_ = tau + t2;
    raw_.set_start(window_start_);
  }

  Scenario s_;
  const grid::NetworkCase& c_;
  std::size_t n_;
  Rng ambient_rng_;
  Rng meter_rng_;
  DampingMeter meter_;
  grid::PowerFlowOptions pf_opts_;

  std::vector<double> start_, target_, rate_;
  double ramp_t0_ = 0.0;
  double window_start_ = 0.0;

  std::optional<grid::OperatingPoint> op_;
  std::vector<double> prev_p_;
  double prev_meas_ = 0.0;
  bool have_prev_ = false;
  std::deque<double> recent_;
  estimator::SampleWindow raw_;

  std::size_t k_ = 0;
  SimulationLog log_;
};

inline SimulationLog run(const Scenario& s) {
  ClosedLoop loop(s);
  return loop.run();
}

}  // namespace damprd::loop
