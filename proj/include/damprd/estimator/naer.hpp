#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "damprd/errors.hpp"
#include "damprd/estimator/ridge.hpp"
#include "damprd/estimator/window.hpp"

namespace damprd::estimator {

struct EstimatorConfig {
  double ridge_k = 0.0;
  double forgetting = 0.99;
  int ensemble = 100;
  double noise_fraction = 0.1;  // of each column's std
  std::uint64_t seed = 1;
  double condition_cap = 1e8;

  void validate() const {
    if (!(ridge_k >= 0.0)) throw PreconditionError("estimator: ridge k must be non-negative");
    if (!(forgetting > 0.0 && forgetting <= 1.0)) throw PreconditionError("estimator: forgetting factor must lie in (0, 1]");
    if (ensemble < 1) throw PreconditionError("estimator: ensemble size must be at least 1");
    if (!(noise_fraction >= 0.0)) throw PreconditionError("estimator: noise fraction must be non-negative");
  }
};

struct SensitivityEstimate {
  Eigen::VectorXd psi;
  std::vector<std::string> feature_ids;
  std::size_t samples = 0;
  double condition = 0.0;
  Eigen::VectorXd spread;  // per-feature std across replicates
  int replicates = 0;      // non-singular replicates aggregated
  std::uint64_t seed = 0;
  bool flagged = false;    // condition above the cap

  bool operator==(const SensitivityEstimate&) const = default;
};

namespace detail {

inline double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline Eigen::VectorXd column_std(const Eigen::MatrixXd& x) {
  Eigen::VectorXd s(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    const double ss = (x.col(j).array() - mean).square().sum();
    s[j] = x.rows() > 1 ? std::sqrt(ss / static_cast<double>(x.rows() - 1)) : 0.0;
  }
  return s;
}

}  // namespace detail

/// Noise-assisted ensemble regression.  Replicate e perturbs the design with
/// its own random stream (seed, e), so replicates are independent of the
/// order they are evaluated in.  Aggregate is the entrywise median.
inline SensitivityEstimate naer_estimate(const SampleWindow& window, const EstimatorConfig& cfg) {
  cfg.validate();
  if (window.empty()) throw EstimationError("estimator: empty sample window");
  const Eigen::MatrixXd x = window.design();
  const Eigen::VectorXd z = window.response();
  const Eigen::VectorXd w = forgetting_weights(x.rows(), cfg.forgetting);
  const Eigen::VectorXd sigma = cfg.noise_fraction * detail::column_std(x);
  const Eigen::Index m = x.cols();

  SensitivityEstimate est;
  est.feature_ids = window.feature_ids();
  est.samples = window.size();
  est.seed = cfg.seed;
  est.condition = normal_condition(x, w, cfg.ridge_k);
  est.flagged = !(est.condition <= cfg.condition_cap);

  std::vector<Eigen::VectorXd> reps;
  reps.reserve(static_cast<std::size_t>(cfg.ensemble));
  for (int e = 0; e < cfg.ensemble; ++e) {
    Eigen::MatrixXd xe = x;
    if (cfg.noise_fraction > 0.0) {
      std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                        static_cast<std::uint32_t>(e)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < xe.rows(); ++i) xe(i, j) += sigma[j] * normal(rng);
    }
    try {
      reps.push_back(weighted_ridge(xe, z, w, cfg.ridge_k).psi);
    } catch (const SingularityError&) {
    }
  }
  if (reps.empty()) throw EstimationError("estimator: every ensemble replicate was singular");

  est.replicates = static_cast<int>(reps.size());
  est.psi.resize(m);
  est.spread.resize(m);
  std::vector<double> col(reps.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < reps.size(); ++r) {
      col[r] = reps[r][j];
      mean += col[r];
    }
    mean /= static_cast<double>(reps.size());
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    est.spread[j] = reps.size() > 1 ? std::sqrt(ss / static_cast<double>(reps.size() - 1)) : 0.0;
    est.psi[j] = detail::median(col);
  }
  return est;
}

}  // namespace damprd::estimator
