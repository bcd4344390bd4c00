#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "damprd/errors.hpp"

namespace damprd::estimator {

/// Regression samples (dx, dzeta, t) collected since the last dispatch
/// completion.  Samples before the start boundary are evicted on push.
class SampleWindow {
 public:
  SampleWindow() = default;
  explicit SampleWindow(std::vector<std::string> feature_ids) : ids_(std::move(feature_ids)) {}

  const std::vector<std::string>& feature_ids() const { return ids_; }
  std::size_t features() const { return ids_.size(); }
  std::size_t size() const { return t_.size(); }
  bool empty() const { return t_.empty(); }
  double start() const { return start_; }
  std::span<const double> timestamps() const { return {t_.data(), t_.size()}; }

  void push(std::span<const double> dx, double dzeta, double t) {
    if (dx.size() != ids_.size()) throw PreconditionError("sample window: feature count mismatch");
    if (!t_.empty() && !(t > t_.back())) throw OrderingError("sample window: timestamps must be strictly increasing");
    if (!std::isfinite(dzeta) || !std::isfinite(t)) throw PreconditionError("sample window: non-finite sample");
    evict();
    t_.push_back(t);
    dz_.push_back(dzeta);
    dx_.insert(dx_.end(), dx.begin(), dx.end());
    evict();
  }

  /// Samples stamped before t0 are dropped on the next push.
  void set_start(double t0) { start_ = t0; }

  void clear() {
    t_.clear();
    dz_.clear();
    dx_.clear();
    start_ = -std::numeric_limits<double>::infinity();
  }

  Eigen::MatrixXd design() const {
    const auto n = static_cast<Eigen::Index>(t_.size()), m = static_cast<Eigen::Index>(ids_.size());
    Eigen::MatrixXd x(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) x(i, j) = dx_[static_cast<std::size_t>(i * m + j)];
    return x;
  }

  Eigen::VectorXd response() const {
    return Eigen::Map<const Eigen::VectorXd>(dz_.data(), static_cast<Eigen::Index>(dz_.size()));
  }

 private:
  void evict() {
    std::size_t drop = 0;
    while (drop < t_.size() && t_[drop] < start_) ++drop;
    if (drop == 0) return;
    t_.erase(t_.begin(), t_.begin() + static_cast<std::ptrdiff_t>(drop));
    dz_.erase(dz_.begin(), dz_.begin() + static_cast<std::ptrdiff_t>(drop));
    dx_.erase(dx_.begin(), dx_.begin() + static_cast<std::ptrdiff_t>(drop * ids_.size()));
  }

  std::vector<std::string> ids_;
  std::vector<double> t_;
  std::vector<double> dz_;
  std::vector<double> dx_;  // row-major N x m
  double start_ = -std::numeric_limits<double>::infinity();
};

}  // namespace damprd::estimator
