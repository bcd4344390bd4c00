#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include "damprd/errors.hpp"
#include "damprd/grid/network_case.hpp"
#include "damprd/loop/scenario.hpp"
#include "damprd/small_signal/modes.hpp"

namespace damprd::loop {

using Rng = std::mt19937_64;

/// Independent generator for one logical thread of the loop.
inline Rng make_stream(std::uint64_t seed, std::uint32_t stream, std::uint32_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream, sub};
  return Rng(seq);
}

inline double true_min_damping(std::span<const small_signal::Mode> modes, small_signal::TargetModes target) {
  try {
    return small_signal::min_damping_mode(modes, target).damping;
  } catch (const ClassificationError&) {
    if (target == small_signal::TargetModes::electromechanical) throw;
    return small_signal::min_damping_mode(modes).damping;
  }
}

/// Noisy thread-2 reading: true minimum damping plus Gaussian noise,
/// clamped to (-1, 1).
inline double measure_damping(std::span<const small_signal::Mode> modes, double noise_std, Rng& rng,
                              small_signal::TargetModes target = small_signal::TargetModes::electromechanical) {
  const double z = true_min_damping(modes, target);
  double noisy = z;
  if (noise_std > 0.0) noisy += noise_std * std::normal_distribution<double>(0.0, 1.0)(rng);
  return std::clamp(noisy, -1.0 + 1e-12, 1.0 - 1e-12);
}

/// Estimation error with a correlation time: AR(1) with stationary std
/// `noise_std`; white when tau is zero.
class DampingMeter {
 public:
  DampingMeter(double noise_std, double tau, double dt)
      : std_(noise_std), phi_(tau > 0.0 ? std::exp(-dt / tau) : 0.0) {}

  double read(double true_zeta, Rng& rng) {
    const double n = std::normal_distribution<double>(0.0, 1.0)(rng);
    if (!started_) {
      err_ = std_ * n;
      started_ = true;
    } else {
      err_ = phi_ * err_ + std_ * std::sqrt(1.0 - phi_ * phi_) * n;
    }
    return std::clamp(true_zeta + err_, -1.0 + 1e-12, 1.0 - 1e-12);
  }

 private:
  double std_;
  double phi_;
  double err_ = 0.0;
  bool started_ = false;
};

/// Instantaneous loads: profile x base x (1 + fluctuation), Q following P.
inline grid::LoadLevels generate_ambient(const Scenario& s, double t, Rng& rng) {
  if (t < 0.0 || t > s.horizon) throw PreconditionError("ambient: time outside the scenario horizon");
  grid::LoadLevels out;
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t l = 0; l < s.network.loads.size(); ++l) {
    const auto& load = s.network.loads[l];
    double f = s.load_profiles[l].at(t);
    if (s.load_fluctuation > 0.0) f *= 1.0 + s.load_fluctuation * nd(rng);
    out.p.push_back(load.p * f);
    out.q.push_back(load.q * f);
  }
  return out;
}

}  // namespace damprd::loop
