#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "damprd/errors.hpp"

namespace damprd::estimator {

struct RidgeResult {
  Eigen::VectorXd psi;
  double condition = 0.0;  // of X'WX + kI
};

/// Condition number of the (symmetric, PSD) normal matrix X'WX + kI.
inline double normal_condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, double k) {
  const Eigen::Index m = x.cols();
  Eigen::MatrixXd normal = x.transpose() * w.asDiagonal() * x;
  normal.diagonal().array() += k;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || m == 0) return std::numeric_limits<double>::infinity();
  const double lo = es.eigenvalues()[0], hi = es.eigenvalues()[m - 1];
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

/// Minimiser of ||X psi - z||_W^2 + k ||psi||^2.  Solved as the stacked
/// least-squares problem [sqrt(W) X; sqrt(k) I] psi = [sqrt(W) z; 0] with a
/// pivoted QR, so the normal matrix is never inverted explicitly.
inline RidgeResult weighted_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& w,
                                  double k, double singular_condition = 1e14) {
  const Eigen::Index n = x.rows(), m = x.cols();
  if (m == 0) throw PreconditionError("ridge: no features");
  if (z.size() != n || w.size() != n) throw PreconditionError("ridge: dimension mismatch");
  if (!(k >= 0.0)) throw PreconditionError("ridge: coefficient k must be non-negative");
  if ((w.array() < 0.0).any()) throw PreconditionError("ridge: weights must be non-negative");

  RidgeResult out;
  out.condition = normal_condition(x, w, k);
  if (!(out.condition <= singular_condition))
    throw SingularityError("ridge: normal matrix is singular or numerically rank deficient", out.condition);

  const Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::MatrixXd a(n + (k > 0.0 ? m : 0), m);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(a.rows());
  a.topRows(n) = sw.asDiagonal() * x;
  b.head(n) = sw.cwiseProduct(z);
  if (k > 0.0) a.bottomRows(m) = std::sqrt(k) * Eigen::MatrixXd::Identity(m, m);
  out.psi = a.colPivHouseholderQr().solve(b);
  if (!out.psi.allFinite()) throw SingularityError("ridge: non-finite solution", out.condition);
  return out;
}

/// w_i = lambda^(N - i), i = 1..N: the newest sample has weight 1.
inline Eigen::VectorXd forgetting_weights(Eigen::Index n, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw PreconditionError("forgetting factor must lie in (0, 1]");
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = std::pow(lambda, static_cast<double>(n - 1 - i));
  return w;
}

}  // namespace damprd::estimator
