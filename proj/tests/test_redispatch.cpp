#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "damprd/redispatch/bounds.hpp"
#include "damprd/redispatch/lp.hpp"
#include "lp_oracle.hpp"

using namespace damprd;
using namespace damprd::redispatch;

namespace {

DispatchBounds box(std::vector<double> lo, std::vector<double> hi) {
  DispatchBounds b;
  b.lower = std::move(lo);
  b.upper = std::move(hi);
  b.at_limit.assign(b.lower.size(), false);
  return b;
}

LinearProgram make_lp(std::vector<double> psi, const DispatchBounds& b, std::vector<double> planned, bool balance) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < psi.size(); ++i) ids.push_back("G" + std::to_string(i + 1));
  return build_lp(ids, psi, b, planned, balance);
}

void expect_feasible(const LinearProgram& lp, const RedispatchSolution& s) {
  double sum = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    EXPECT_GE(s.dx_r[i], lp.var_lower(i) - 1e-9);
    EXPECT_LE(s.dx_r[i], lp.var_upper(i) + 1e-9);
    if (lp.fixed[i]) {
      EXPECT_EQ(s.dx_r[i], 0.0);
    }
    sum += s.dx_r[i];
    dot += lp.psi[i] * (s.dx_r[i] + lp.planned[i]);
  }
  if (lp.balance) {
    EXPECT_NEAR(sum, 0.0, 1e-9);
  }
  EXPECT_GE(dot, s.delta - 1e-9);
}

}  // namespace

TEST(Bounds, AtCapacityHasNoHeadroom) {
  const std::vector<double> x{9.0};
  const std::vector<FeatureLimits> lim{{1.8, 9.0, 0.45}};
  const auto b = compute_bounds(x, lim, false);
  EXPECT_EQ(b.upper[0], 0.0);
  EXPECT_EQ(b.lower[0], -0.45);
  EXPECT_TRUE(b.at_limit[0]);
}

TEST(Bounds, RampBindsFarFromLimits) {
  const std::vector<double> x{5.0};
  const std::vector<FeatureLimits> lim{{1.8, 9.0, 0.05 * 9.0}};
  const auto b = compute_bounds(x, lim, false);
  EXPECT_DOUBLE_EQ(b.lower[0], -0.45);
  EXPECT_DOUBLE_EQ(b.upper[0], 0.45);
  EXPECT_FALSE(b.at_limit[0]);
}

TEST(Bounds, ReserveWidensButRampStillBinds) {
  const std::vector<double> x{9.0};
  const std::vector<FeatureLimits> lim{{1.8, 9.0, 0.05 * 9.0}};
  const auto b = compute_bounds(x, lim, true);
  EXPECT_DOUBLE_EQ(b.upper[0], 0.05 * 9.0);  // min(0.45, 10.8 - 9)
  EXPECT_FALSE(b.at_limit[0]);
}

TEST(Bounds, OutsideWindowRejected) {
  const std::vector<double> x{9.5};
  const std::vector<FeatureLimits> lim{{1.8, 9.0, 0.45}};
  EXPECT_THROW(compute_bounds(x, lim, false), PreconditionError);
  EXPECT_NO_THROW(compute_bounds(x, lim, true));
}

TEST(Lp, AntisymmetricBalancedOptimum) {
  const auto lp = make_lp({1.0, -1.0}, box({-1, -1}, {1, 1}), {0, 0}, true);
  const auto s = solve_lp(lp);
  EXPECT_EQ(s.status, LpStatus::optimal);
  EXPECT_DOUBLE_EQ(s.dx_r[0], 1.0);
  EXPECT_DOUBLE_EQ(s.dx_r[1], -1.0);
  EXPECT_DOUBLE_EQ(s.delta, 2.0);
}

TEST(Lp, ZeroSensitivityReturnsZeroByMinNorm) {
  for (bool balance : {true, false}) {
    const auto lp = make_lp({0.0, 0.0, 0.0}, box({-1, -0.5, -2}, {1, 0.3, 2}), {0, 0, 0}, balance);
    const auto s = solve_lp(lp);
    EXPECT_EQ(s.status, LpStatus::degenerate);
    EXPECT_EQ(s.delta, 0.0);
    for (double v : s.dx_r) EXPECT_EQ(v, 0.0);
  }
}

TEST(Lp, SingleVariableUnbalanced) {
  const auto lp = make_lp({0.5}, box({-2}, {2}), {0}, false);
  const auto s = solve_lp(lp);
  EXPECT_DOUBLE_EQ(s.dx_r[0], 2.0);
  EXPECT_DOUBLE_EQ(s.delta, 1.0);
}

TEST(Lp, FixedFeatureWithForcedPlannedSpillIsInfeasible) {
  auto b = box({-0.1, -0.45}, {0.0, 0.45});
  b.at_limit[0] = true;
  // Planned +0.2 on the pinned unit exceeds its box while dx_R is held at 0.
  const auto lp = make_lp({1.0, -1.0}, b, {0.2, 0.0}, true);
  const auto s = solve_lp(lp);
  EXPECT_EQ(s.status, LpStatus::infeasible);
  EXPECT_FALSE(s.feasible());
}

TEST(Lp, BalanceUnreachableIsInfeasible) {
  const auto lp = make_lp({1.0, 2.0}, box({0.1, 0.2}, {0.5, 0.6}), {0, 0}, true);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::infeasible);
}

TEST(Lp, TieSetGetsMinimumNorm) {
  // psi ties on the top two: 1.0 of headroom must be split, min norm -> 0.5 each.
  const auto lp = make_lp({1.0, 1.0, -1.0}, box({-1, -1, -1}, {1, 1, 1}), {0, 0, 0}, true);
  const auto s = solve_lp(lp);
  EXPECT_EQ(s.status, LpStatus::degenerate);
  EXPECT_NEAR(s.dx_r[0], 0.5, 1e-15);
  EXPECT_NEAR(s.dx_r[1], 0.5, 1e-15);
  EXPECT_NEAR(s.dx_r[2], -1.0, 1e-15);
  EXPECT_NEAR(s.delta, 2.0, 1e-15);
}

TEST(Lp, EmptyFeatureSetIsBuildError) {
  EXPECT_THROW(make_lp({}, box({}, {}), {}, true), BuildError);
}

TEST(Lp, MatchesVertexEnumeration) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 3);
    std::vector<double> psi(n), lo(n), hi(n), planned(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      psi[i] = trial % 7 == 0 ? std::round(u(rng) * 2) / 2 : u(rng);
      lo[i] = -pos(rng);
      hi[i] = pos(rng);
      if (trial % 3 == 1) planned[i] = 0.5 * u(rng) * (hi[i] - lo[i]);
    }
    auto b = box(lo, hi);
    if (trial % 5 == 0) b.at_limit[0] = true;
    const bool balance = trial % 2 == 0;
    const auto lp = make_lp(psi, b, planned, balance);
    const auto s = solve_lp(lp);
    const double oracle = test::vertex_enumeration(lp);
    if (std::isinf(oracle)) {
      EXPECT_EQ(s.status, LpStatus::infeasible) << "trial " << trial;
      continue;
    }
    ASSERT_TRUE(s.feasible()) << "trial " << trial;
    EXPECT_NEAR(s.delta, oracle, 1e-9) << "trial " << trial;
    expect_feasible(lp, s);
  }
}

TEST(Lp, NonNegativePredictionWhenZeroIsFeasible) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
    std::vector<double> psi(n), lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
      psi[i] = u(rng);
      lo[i] = -pos(rng);
      hi[i] = pos(rng);
    }
    const auto s = solve_lp(make_lp(psi, box(lo, hi), std::vector<double>(n, 0.0), trial % 2 == 0));
    EXPECT_GE(s.delta, -1e-15);
  }
}

TEST(Lp, ScalingPsiScalesDelta) {
  const auto a = solve_lp(make_lp({0.3, -0.7, 0.1}, box({-1, -1, -1}, {1, 0.5, 1}), {0, 0, 0}, true));
  const auto b = solve_lp(make_lp({0.9, -2.1, 0.3}, box({-1, -1, -1}, {1, 0.5, 1}), {0, 0, 0}, true));
  EXPECT_NEAR(b.delta, 3.0 * a.delta, 1e-12);
  EXPECT_EQ(a.dx_r, b.dx_r);
}

TEST(Lp, DumpListsRows) {
  const auto lp = make_lp({1.5, -0.25}, box({-1, -1}, {1, 1}), {0.1, 0.0}, true);
  std::ostringstream os;
  dump(os, lp);
  const std::string expected =
      "max delta\n"
      "1.5*dxR_G1 + -0.25*dxR_G2 - delta >= -0.15000000000000002\n"
      "dxR_G1 >= -1.1000000000000001\n"
      "dxR_G1 <= 0.90000000000000002\n"
      "dxR_G2 >= -1\n"
      "dxR_G2 <= 1\n"
      "dxR_G1 + dxR_G2 = 0\n";
  EXPECT_EQ(os.str(), expected);
}

TEST(Redistribute, NothingAtLimit) {
  const std::vector<double> planned{0.1, -0.2};
  const auto out = redistribute_planned(planned, {false, false}, box({-1, -1}, {1, 1}));
  EXPECT_EQ(out, planned);
}

TEST(Redistribute, TwoFeatures) {
  const std::vector<double> planned{0.1, 0.0};
  const auto out = redistribute_planned(planned, {true, false}, box({-1, -1}, {0, 1}));
  EXPECT_DOUBLE_EQ(out[0], 0.0);
  EXPECT_DOUBLE_EQ(out[1], 0.1);
}

TEST(Redistribute, ProportionalToHeadroom) {
  const std::vector<double> planned{0.0, 0.0, 0.06};
  const auto out = redistribute_planned(planned, {false, false, true}, box({-1, -1, -1}, {0.2, 0.1, 0.0}));
  EXPECT_NEAR(out[0], 0.04, 1e-15);
  EXPECT_NEAR(out[1], 0.02, 1e-15);
  EXPECT_EQ(out[2], 0.0);
  EXPECT_NEAR(std::accumulate(out.begin(), out.end(), 0.0), 0.06, 1e-12);
}

TEST(Redistribute, NoHeadroomFails) {
  const std::vector<double> planned{0.5, 0.0};
  EXPECT_THROW(redistribute_planned(planned, {true, false}, box({-1, -1}, {0, 0.1})), RedistributionError);
}
