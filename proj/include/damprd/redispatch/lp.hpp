#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "damprd/errors.hpp"
#include "damprd/redispatch/bounds.hpp"

namespace damprd::redispatch {

/// max delta  s.t.  psi . (dx_R + dx_O) >= delta,
///                  lower <= dx_R + dx_O <= upper,
///                  dx_R = 0 on fixed features,
///                  sum dx_R = 0 (when balanced).
struct LinearProgram {
  std::vector<std::string> ids;
  std::vector<double> psi;
  std::vector<double> lower;    // on the total increment
  std::vector<double> upper;
  std::vector<double> planned;  // dx_O, a known constant
  std::vector<bool> fixed;
  bool balance = true;

  std::size_t size() const { return ids.size(); }

  /// Box on dx_R alone.
  double var_lower(std::size_t i) const { return fixed[i] ? 0.0 : lower[i] - planned[i]; }
  double var_upper(std::size_t i) const { return fixed[i] ? 0.0 : upper[i] - planned[i]; }
};

enum class LpStatus { optimal, degenerate, infeasible };

inline std::string_view to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::degenerate: return "degenerate";
    case LpStatus::infeasible: return "infeasible";
  }
  return "?";
}

struct RedispatchSolution {
  LpStatus status = LpStatus::infeasible;
  double delta = 0.0;
  std::vector<double> dx_r;
  std::vector<std::string> binding;

  bool feasible() const { return status != LpStatus::infeasible; }
};

inline LinearProgram build_lp(std::span<const std::string> ids, std::span<const double> psi,
                              const DispatchBounds& bounds, std::span<const double> planned, bool balance) {
  const std::size_t n = ids.size();
  if (n == 0) throw BuildError("lp: empty feature set");
  if (psi.size() != n || bounds.size() != n || planned.size() != n) throw BuildError("lp: dimension mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(psi[i])) throw BuildError("lp: non-finite sensitivity for " + ids[i]);
    if (!(bounds.lower[i] <= bounds.upper[i])) throw BuildError("lp: inverted bounds for " + ids[i]);
  }
  LinearProgram lp;
  lp.ids.assign(ids.begin(), ids.end());
  lp.psi.assign(psi.begin(), psi.end());
  lp.lower = bounds.lower;
  lp.upper = bounds.upper;
  lp.planned.assign(planned.begin(), planned.end());
  lp.fixed = bounds.at_limit;
  lp.balance = balance;
  return lp;
}

/// Human-readable rows with round-trippable coefficients.
inline void dump(std::ostream& os, const LinearProgram& lp) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "max delta\n";
  double rhs = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    os << (i ? " + " : "") << num(lp.psi[i]) << "*dxR_" << lp.ids[i];
    rhs -= lp.psi[i] * lp.planned[i];
  }
  os << " - delta >= " << num(rhs) << '\n';
  for (std::size_t i = 0; i < lp.size(); ++i) {
    if (lp.fixed[i]) {
      os << "dxR_" << lp.ids[i] << " = 0\n";
      continue;
    }
    os << "dxR_" << lp.ids[i] << " >= " << num(lp.var_lower(i)) << '\n';
    os << "dxR_" << lp.ids[i] << " <= " << num(lp.var_upper(i)) << '\n';
  }
  if (lp.balance) {
    for (std::size_t i = 0; i < lp.size(); ++i) os << (i ? " + " : "") << "dxR_" << lp.ids[i];
    os << " = 0\n";
  }
}

namespace detail {

/// Minimum-norm y with sum y = s and l <= y <= u: y_i = clamp(nu, l_i, u_i)
/// for the nu that meets the sum.  The sum is piecewise linear in nu, so nu is
/// found exactly on the segment between consecutive breakpoints.
inline std::vector<double> min_norm_fill(std::span<const double> l, std::span<const double> u, double s) {
  const std::size_t n = l.size();
  auto total = [&](double nu) {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += std::clamp(nu, l[i], u[i]);
    return t;
  };
  std::vector<double> knots;
  for (std::size_t i = 0; i < n; ++i) {
    knots.push_back(l[i]);
    knots.push_back(u[i]);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  double nu = knots.front();
  if (s >= total(knots.back())) {
    nu = knots.back();
  } else if (s > total(knots.front())) {
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
      const double a = knots[k], b = knots[k + 1];
      if (s > total(b)) continue;
      // On [a, b] the free entries all equal nu; the rest sit on a bound.
      double pinned = 0.0;
      int free = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (u[i] <= a) pinned += u[i];
        else if (l[i] >= b) pinned += l[i];
        else ++free;
      }
      nu = free > 0 ? std::clamp((s - pinned) / free, a, b) : a;
      break;
    }
  }
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::clamp(nu, l[i], u[i]);
  return y;
}

}  // namespace detail

/// Exact optimum of the structured LP.  Unbalanced, each variable goes to the
/// bound favoured by the sign of psi.  Balanced, the optimum is a threshold
/// rule around a multiplier mu equal to one of the psi values: features above
/// mu sit at their upper bound, below mu at their lower bound, and the tie set
/// at mu absorbs the remainder.  Among alternative optima the minimum-norm
/// dx_R is returned.
inline RedispatchSolution solve_lp(const LinearProgram& lp) {
  const std::size_t n = lp.size();
  RedispatchSolution sol;
  std::vector<double> l(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = lp.var_lower(i);
    u[i] = lp.var_upper(i);
    const bool planned_fits = lp.planned[i] >= lp.lower[i] - 1e-12 && lp.planned[i] <= lp.upper[i] + 1e-12;
    if (l[i] > u[i] + 1e-12 || (lp.fixed[i] && !planned_fits)) {
      sol.binding.push_back("box dxR_" + lp.ids[i] + " empty");
      return sol;
    }
    u[i] = std::max(u[i], l[i]);
  }

  std::vector<double> y(n, 0.0);
  bool unique = true;
  if (!lp.balance) {
    for (std::size_t i = 0; i < n; ++i) {
      if (lp.psi[i] > 0.0) y[i] = u[i];
      else if (lp.psi[i] < 0.0) y[i] = l[i];
      else {
        y[i] = std::clamp(0.0, l[i], u[i]);
        if (u[i] > l[i]) unique = false;
      }
    }
  } else {
    const double sum_l = std::accumulate(l.begin(), l.end(), 0.0);
    const double sum_u = std::accumulate(u.begin(), u.end(), 0.0);
    if (sum_l > 1e-12 || sum_u < -1e-12) {
      sol.binding.push_back("balance row unreachable within boxes");
      return sol;
    }
    std::vector<double> levels(lp.psi);
    std::sort(levels.begin(), levels.end(), std::greater<>());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    // Largest mu whose tie set can close the balance.
    double mu = levels.back();
    for (double v : levels) {
      double hi = 0.0;
      for (std::size_t i = 0; i < n; ++i) hi += lp.psi[i] >= v ? u[i] : l[i];
      if (hi >= 0.0) {
        mu = v;
        break;
      }
    }
    std::vector<std::size_t> ties;
    double rest = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (lp.psi[i] > mu) y[i] = u[i];
      else if (lp.psi[i] < mu) y[i] = l[i];
      else {
        ties.push_back(i);
        continue;
      }
      rest += y[i];
    }
    std::vector<double> tl, tu;
    for (auto i : ties) {
      tl.push_back(l[i]);
      tu.push_back(u[i]);
    }
    const double target = -rest;
    const double room_lo = std::accumulate(tl.begin(), tl.end(), 0.0);
    const double room_hi = std::accumulate(tu.begin(), tu.end(), 0.0);
    const auto fill = detail::min_norm_fill(tl, tu, std::clamp(target, room_lo, room_hi));
    for (std::size_t k = 0; k < ties.size(); ++k) y[ties[k]] = fill[k];
    if (room_hi - room_lo > 1e-12 && target > room_lo + 1e-12 && target < room_hi - 1e-12) unique = false;
    sol.binding.push_back("balance");
  }

  sol.dx_r = y;
  sol.delta = 0.0;
  for (std::size_t i = 0; i < n; ++i) sol.delta += lp.psi[i] * (y[i] + lp.planned[i]);
  sol.status = unique ? LpStatus::optimal : LpStatus::degenerate;
  sol.binding.insert(sol.binding.begin(), "damping");
  for (std::size_t i = 0; i < n; ++i) {
    if (lp.fixed[i]) sol.binding.push_back("dxR_" + lp.ids[i] + " fixed");
    else if (y[i] >= u[i] - 1e-12) sol.binding.push_back("dxR_" + lp.ids[i] + " upper");
    else if (y[i] <= l[i] + 1e-12) sol.binding.push_back("dxR_" + lp.ids[i] + " lower");
  }
  return sol;
}

}  // namespace damprd::redispatch
