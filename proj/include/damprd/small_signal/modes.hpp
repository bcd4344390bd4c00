#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "damprd/errors.hpp"
#include "damprd/grid/network_case.hpp"
#include "damprd/small_signal/state_matrix.hpp"

namespace damprd::small_signal {

enum class ModeClass { inter_area, local, non_electromechanical };

inline std::string_view to_string(ModeClass k) {
  switch (k) {
    case ModeClass::inter_area: return "inter-area";
    case ModeClass::local: return "local";
    case ModeClass::non_electromechanical: return "non-electromechanical";
  }
  return "?";
}

/// One eigenvalue of A.  Oscillatory modes are stored once (omega > 0).
struct Mode {
  Complex eigenvalue;
  double damping = 0.0;    // zeta = -sigma / |lambda|
  double frequency = 0.0;  // Hz
  Eigen::VectorXcd shape;          // rotor-speed components, largest = 1 at 0 deg
  Eigen::VectorXd participation;   // speed-state participation per machine
  Eigen::VectorXcd right_vector;   // full right eigenvector, unit norm
  ModeClass kind = ModeClass::non_electromechanical;

  bool electromechanical() const { return kind != ModeClass::non_electromechanical; }
};

struct ModalOptions {
  double f_min = 0.1;  // Hz, electromechanical band
  double f_max = 3.0;
  double min_speed_participation = 0.25;  // share of the mode in speed states
  double shape_significance = 0.25;       // |shape| below this is ignored for grouping
  double reference_tolerance = 1e-6;      // |lambda| of the angle-reference mode
};

inline double damping_ratio(Complex lambda) {
  const double mag = std::abs(lambda);
  return mag == 0.0 ? 0.0 : -lambda.real() / mag;
}

namespace detail {

/// Inter-area when the significant shape components split into two opposing
/// groups whose area sets do not overlap.  The shape is taken relative to the
/// inertia-weighted mean so a common-mode drift does not hide the split.
inline bool splits_areas(const Eigen::VectorXcd& shape, std::span<const std::string> areas, double significance,
                         const Eigen::VectorXd& inertia = {}) {
  Eigen::VectorXd rel = shape.real();
  if (inertia.size() == rel.size() && inertia.sum() > 0.0) rel.array() -= rel.dot(inertia) / inertia.sum();
  const double peak = rel.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) return false;
  rel /= peak;
  std::set<std::string> pos, neg;
  for (Eigen::Index i = 0; i < rel.size(); ++i) {
    if (std::abs(rel[i]) < significance) continue;
    (rel[i] >= 0.0 ? pos : neg).insert(areas[static_cast<std::size_t>(i)]);
  }
  if (pos.empty() || neg.empty()) return false;
  for (const auto& a : pos)
    if (neg.count(a)) return false;
  return true;
}

}  // namespace detail

/// Eigen-analysis of a classical-model state matrix.  `areas` gives the area
/// label of every machine and drives the inter-area/local split.
inline std::vector<Mode> eigen_modes(const StateMatrix& sm, std::span<const std::string> areas,
                                     const ModalOptions& opt = {}) {
  const auto& a = sm.a;
  if (!a.allFinite()) throw NumericError("eigen analysis: state matrix has non-finite entries");
  const auto n = static_cast<Eigen::Index>(sm.machines);
  if (areas.size() != sm.machines) throw PreconditionError("eigen analysis: one area label per machine required");

  Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
  if (es.info() != Eigen::Success) throw NumericError("eigen analysis: eigen solver did not converge");
  const Eigen::VectorXcd lambda = es.eigenvalues();
  const Eigen::MatrixXcd right = es.eigenvectors();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(right);
  const Eigen::MatrixXcd left = lu.inverse();  // rows are left eigenvectors

  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  std::vector<Mode> modes;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const Complex l = lambda[k];
    if (std::abs(l) <= opt.reference_tolerance) continue;
    if (l.imag() < -1e-12 * scale) continue;
    const bool oscillatory = l.imag() > 1e-12 * scale;

    Mode m;
    m.eigenvalue = oscillatory ? l : Complex(l.real(), 0.0);
    m.damping = damping_ratio(m.eigenvalue);
    m.frequency = m.eigenvalue.imag() / (2.0 * std::numbers::pi);
    m.right_vector = right.col(k).normalized();

    Eigen::VectorXd part(2 * n);
    for (Eigen::Index s = 0; s < 2 * n; ++s) part[s] = std::abs(right(s, k) * left(k, s));
    const double total = part.sum();
    if (total > 0.0) part /= total;
    m.participation = part.tail(n);

    Eigen::VectorXcd shape = right.col(k).tail(n);
    Eigen::Index imax = 0;
    shape.cwiseAbs().maxCoeff(&imax);
    if (std::abs(shape[imax]) > 0.0) shape /= shape[imax];
    m.shape = shape;

    const bool in_band = oscillatory && m.frequency >= opt.f_min && m.frequency <= opt.f_max;
    if (in_band && m.participation.sum() >= opt.min_speed_participation) {
      m.kind = detail::splits_areas(m.shape, areas, opt.shape_significance, sm.inertia) ? ModeClass::inter_area
                                                                             : ModeClass::local;
    }
    modes.push_back(std::move(m));
  }
  std::sort(modes.begin(), modes.end(), [](const Mode& x, const Mode& y) {
    if (x.frequency != y.frequency) return x.frequency < y.frequency;
    return x.eigenvalue.real() < y.eigenvalue.real();
  });
  return modes;
}

inline std::vector<std::string> machine_areas(const grid::NetworkCase& c) {
  std::vector<std::string> out;
  out.reserve(c.generators.size());
  for (const auto& g : c.generators) out.push_back(g.area());
  return out;
}

inline std::vector<Mode> eigen_modes(const StateMatrix& sm, const grid::NetworkCase& c, const ModalOptions& opt = {}) {
  const auto areas = machine_areas(c);
  return eigen_modes(sm, areas, opt);
}

/// Which modes compete for "minimum damping".
enum class TargetModes { electromechanical, inter_area };

inline bool is_target(const Mode& m, TargetModes target) {
  return target == TargetModes::inter_area ? m.kind == ModeClass::inter_area : m.electromechanical();
}

/// The least-damped target mode; ties go to the lower frequency.
inline const Mode& min_damping_mode(std::span<const Mode> modes, TargetModes target = TargetModes::electromechanical) {
  const Mode* best = nullptr;
  for (const auto& m : modes) {
    if (!is_target(m, target)) continue;
    if (best == nullptr || m.damping < best->damping - 1e-12 ||
        (std::abs(m.damping - best->damping) <= 1e-12 && m.frequency < best->frequency))
      best = &m;
  }
  if (best == nullptr)
    throw ClassificationError(target == TargetModes::inter_area ? "no inter-area mode found"
                                                                : "no electromechanical mode found");
  return *best;
}

/// |<u, v>| / (|u| |v|).
inline double vector_correlation(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) {
  const double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::abs(u.dot(v)) / (nu * nv);
}

/// Mode whose right eigenvector is most parallel to `reference` among the
/// oscillatory modes.  Throws TrackingError below `threshold`.
inline const Mode& match_mode(std::span<const Mode> modes, const Eigen::VectorXcd& reference, double threshold = 0.8) {
  const Mode* best = nullptr;
  double best_corr = -1.0;
  for (const auto& m : modes) {
    if (m.frequency <= 0.0) continue;
    const double corr = vector_correlation(m.right_vector, reference);
    if (corr > best_corr) {
      best_corr = corr;
      best = &m;
    }
  }
  if (best == nullptr || best_corr < threshold)
    throw TrackingError("mode lost under perturbation (best eigenvector correlation " + std::to_string(best_corr) + ")");
  return *best;
}

}  // namespace damprd::small_signal
