#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "damprd/estimator/naer.hpp"
#include "damprd/estimator/reduce.hpp"
#include "damprd/estimator/ridge.hpp"
#include "damprd/estimator/window.hpp"
#include "damprd/grid/power_flow.hpp"
#include "damprd/small_signal/modes.hpp"
#include "support.hpp"

using namespace damprd;
using namespace damprd::estimator;

namespace {

Eigen::MatrixXd random_design(Eigen::Index n, Eigen::Index m, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd x(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) x(i, j) = nd(rng);
  return x;
}

SampleWindow window_from(const Eigen::MatrixXd& x, const Eigen::VectorXd& z) {
  std::vector<std::string> ids;
  for (Eigen::Index j = 0; j < x.cols(); ++j) ids.push_back("F" + std::to_string(j));
  SampleWindow w(ids);
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
    w.push(row, z[i], static_cast<double>(i));
  }
  return w;
}

}  // namespace

TEST(Window, PushAndOrdering) {
  SampleWindow w({"a", "b"});
  std::vector<double> dx{0.1, 0.2};
  w.push(dx, 0.001, 1.0);
  EXPECT_EQ(w.size(), 1u);
  EXPECT_THROW(w.push(dx, 0.0, 1.0), OrderingError);
  EXPECT_THROW(w.push(dx, 0.0, 0.5), OrderingError);
  std::vector<double> wrong{0.1};
  EXPECT_THROW(w.push(wrong, 0.0, 2.0), PreconditionError);
}

TEST(Window, BoundaryEvictsOnNextPush) {
  SampleWindow w({"a"});
  std::vector<double> dx{0.1};
  w.push(dx, 0.0, 1.0);
  w.push(dx, 0.0, 2.0);
  w.set_start(5.0);
  EXPECT_EQ(w.size(), 2u);
  w.push(dx, 0.0, 6.0);
  EXPECT_EQ(w.size(), 1u);
  EXPECT_EQ(w.timestamps()[0], 6.0);
  w.clear();
  EXPECT_TRUE(w.empty());
}

TEST(Window, FifteenMinuteStreamHoldsAtMost900) {
  SampleWindow w({"a"});
  std::vector<double> dx{0.0};
  for (int t = 1; t <= 3000; ++t) {
    if (t % 900 == 1) w.set_start(t);
    w.push(dx, 0.0, t);
    EXPECT_LE(w.size(), 900u);
  }
}

TEST(Ridge, IdentityDesign) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd z = Eigen::Vector2d(0.5, -0.3);
  const auto r = weighted_ridge(x, z, Eigen::VectorXd::Ones(2), 0.0);
  EXPECT_NEAR(r.psi[0], 0.5, 1e-15);
  EXPECT_NEAR(r.psi[1], -0.3, 1e-15);
  EXPECT_NEAR(r.condition, 1.0, 1e-12);
}

TEST(Ridge, LargeKShrinksToZero) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd z = Eigen::Vector2d(0.5, -0.3);
  const auto r = weighted_ridge(x, z, Eigen::VectorXd::Ones(2), 1e12);
  EXPECT_LT(r.psi.cwiseAbs().maxCoeff(), 1e-12);
  // Closed form for the identity design: z / (1 + k).
  const auto r1 = weighted_ridge(x, z, Eigen::VectorXd::Ones(2), 3.0);
  EXPECT_NEAR(r1.psi[0], 0.125, 1e-15);
}

TEST(Ridge, ExactRecoveryOfAffinePlant) {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const Eigen::Index m = 2 + seed % 7;
    const Eigen::MatrixXd x = random_design(2 * m, m, seed);
    const Eigen::VectorXd a = random_design(m, 1, seed + 100).col(0) * 1e-3;
    const Eigen::VectorXd w = forgetting_weights(2 * m, 0.9);
    const auto r = weighted_ridge(x, x * a, w, 0.0);
    EXPECT_LE((r.psi - a).cwiseAbs().maxCoeff(), 1e-10) << "seed " << seed;
  }
}

TEST(Ridge, CollinearColumnsAreSingular) {
  Eigen::MatrixXd x = random_design(20, 3, 7);
  x.col(2) = 2.0 * x.col(0) - x.col(1);
  try {
    weighted_ridge(x, x.col(0), Eigen::VectorXd::Ones(20), 0.0);
    FAIL() << "expected singularity";
  } catch (const SingularityError& e) {
    EXPECT_GT(e.condition(), 1e14);
  }
  EXPECT_NO_THROW(weighted_ridge(x, x.col(0), Eigen::VectorXd::Ones(20), 1e-3));
}

TEST(Ridge, NormDecreasesWithK) {
  const Eigen::MatrixXd x = random_design(50, 4, 11);
  const Eigen::VectorXd z = random_design(50, 1, 12).col(0);
  const Eigen::VectorXd w = forgetting_weights(50, 0.99);
  double prev = 1e300;
  for (double k : {1e-4, 1e-2, 1.0, 10.0, 1e3}) {
    const double norm = weighted_ridge(x, z, w, k).psi.norm();
    EXPECT_LE(norm, prev + 1e-15);
    prev = norm;
  }
}

TEST(Ridge, WeightScalingInvariance) {
  const Eigen::MatrixXd x = random_design(40, 3, 21);
  const Eigen::VectorXd z = random_design(40, 1, 22).col(0);
  const Eigen::VectorXd w = forgetting_weights(40, 0.95);
  const auto a = weighted_ridge(x, z, w, 0.0).psi;
  const auto b = weighted_ridge(x, z, 7.5 * w, 0.0).psi;
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
  const auto c = weighted_ridge(x, z, w, 0.3).psi;
  const auto d = weighted_ridge(x, z, 7.5 * w, 0.3 * 7.5).psi;
  EXPECT_LE((c - d).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ridge, ForgettingWeights) {
  const auto w = forgetting_weights(3, 0.5);
  EXPECT_DOUBLE_EQ(w[0], 0.25);
  EXPECT_DOUBLE_EQ(w[2], 1.0);
  EXPECT_THROW(forgetting_weights(3, 0.0), PreconditionError);
}

TEST(Naer, DegenerateEnsembleEqualsRidge) {
  const Eigen::MatrixXd x = random_design(30, 3, 31);
  const Eigen::VectorXd z = random_design(30, 1, 32).col(0);
  const auto win = window_from(x, z);
  EstimatorConfig cfg;
  cfg.ensemble = 1;
  cfg.noise_fraction = 0.0;
  const auto est = naer_estimate(win, cfg);
  const auto ref = weighted_ridge(x, z, forgetting_weights(30, cfg.forgetting), 0.0);
  EXPECT_EQ(est.psi, ref.psi);
  EXPECT_EQ(est.samples, 30u);
  EXPECT_NEAR(est.condition, ref.condition, 1e-9 * ref.condition);
  EXPECT_FALSE(est.flagged);
}

TEST(Naer, SameSeedSameEstimate) {
  const Eigen::MatrixXd x = random_design(60, 4, 41);
  const Eigen::VectorXd z = random_design(60, 1, 42).col(0);
  const auto win = window_from(x, z);
  EstimatorConfig cfg;
  cfg.seed = 99;
  const auto a = naer_estimate(win, cfg);
  const auto b = naer_estimate(win, cfg);
  EXPECT_TRUE(a == b);
  cfg.seed = 100;
  EXPECT_FALSE(naer_estimate(win, cfg).psi == a.psi);
}

// Monte-Carlo oracle: affine plant with additive noise on dzeta; every
// coefficient well above its sampling std must come back with its sign.
TEST(Naer, SignAgreementUnderNoise) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  const Eigen::Index n = 400, m = 5;
  const Eigen::MatrixXd x = random_design(n, m, 51) * 0.01;
  const Eigen::VectorXd a = (Eigen::VectorXd(m) << 0.0016, -0.0013, 0.0008, 0.0, -0.0004).finished();
  Eigen::VectorXd z = x * a;
  for (Eigen::Index i = 0; i < n; ++i) z[i] += 2e-6 * nd(rng);
  const auto est = naer_estimate(window_from(x, z), EstimatorConfig{});
  const Eigen::VectorXd w = forgetting_weights(n, 0.99);
  const Eigen::MatrixXd cov =
      (x.transpose() * w.asDiagonal() * x).inverse() * (x.transpose() * w.cwiseAbs2().asDiagonal() * x) *
      (x.transpose() * w.asDiagonal() * x).inverse() * 4e-12;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (std::abs(a[j]) > 2.0 * std::sqrt(cov(j, j))) {
      EXPECT_EQ(std::signbit(est.psi[j]), std::signbit(a[j])) << "feature " << j;
    }
  }
  EXPECT_GT(est.spread.minCoeff(), 0.0);
}

TEST(Naer, AllSingularReplicatesFail) {
  Eigen::MatrixXd x = random_design(20, 2, 61);
  x.col(1) = x.col(0);
  EstimatorConfig cfg;
  cfg.noise_fraction = 0.0;
  cfg.ensemble = 5;
  const auto win = window_from(x, x.col(0));
  EXPECT_THROW(naer_estimate(win, cfg), EstimationError);
}

TEST(Naer, ConditionCapFlags) {
  Eigen::MatrixXd x = random_design(50, 2, 71);
  x.col(1) = x.col(0) + 1e-5 * x.col(1);
  EstimatorConfig cfg;
  const auto est = naer_estimate(window_from(x, x.col(0)), cfg);
  EXPECT_GT(est.condition, 1e8);
  EXPECT_TRUE(est.flagged);
}

TEST(ReduceFeatures, SmallCaseKeepsEveryDispatchableUnit) {
  const auto c = test::load_case("kundur_2area");
  const auto modes = small_signal::eigen_modes(small_signal::linearize(c, grid::solve_power_flow(c)), c);
  const auto& mode = small_signal::min_damping_mode(modes, small_signal::TargetModes::inter_area);
  const auto f = reduce_features(c, mode, 4);
  ASSERT_EQ(f.size(), 3u);  // G3 holds the slack bus
  EXPECT_EQ(f[0].id, "G1");
  EXPECT_EQ(f[1].id, "G2");
  EXPECT_EQ(f[2].id, "G4");
}

TEST(ReduceFeatures, SixteenMachineBudgetEight) {
  const auto c = test::load_case("sixteen_machine");
  const auto modes = small_signal::eigen_modes(small_signal::linearize(c, grid::solve_power_flow(c)), c);
  const auto& mode = small_signal::min_damping_mode(modes, small_signal::TargetModes::inter_area);
  const auto kept = reduce_features(c, mode, 8);
  ASSERT_EQ(kept.size(), 8u);

  // Brute force: rebuild every candidate and compare participations.
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    const auto& gen = c.generators[g];
    if (!gen.dispatchable || c.on_slack_bus(g)) continue;
    const std::string id = gen.station == "N-S5" ? "N-S5" : gen.id;
    auto it = std::find_if(all.begin(), all.end(), [&](auto& p) { return p.first == id; });
    if (it == all.end()) all.emplace_back(id, mode.participation[static_cast<Eigen::Index>(g)]);
    else it->second += mode.participation[static_cast<Eigen::Index>(g)];
  }
  EXPECT_EQ(all.size(), 13u);
  double min_kept = 1e9, max_dropped = -1.0;
  for (const auto& [id, p] : all) {
    const bool in = std::any_of(kept.begin(), kept.end(), [&](const Feature& f) { return f.id == id; });
    if (in) min_kept = std::min(min_kept, p);
    else max_dropped = std::max(max_dropped, p);
  }
  EXPECT_GT(min_kept, max_dropped);
  for (const auto& f : kept) EXPECT_NE(f.id, "G9");
}

TEST(ReduceFeatures, StationUnitsMerge) {
  const auto c = test::load_case("sixteen_machine");
  const auto modes = small_signal::eigen_modes(small_signal::linearize(c, grid::solve_power_flow(c)), c);
  const auto& mode = small_signal::min_damping_mode(modes, small_signal::TargetModes::inter_area);
  const auto all = reduce_features(c, mode, 100);
  auto it = std::find_if(all.begin(), all.end(), [](const Feature& f) { return f.id == "N-S5"; });
  ASSERT_NE(it, all.end());
  EXPECT_EQ(it->generators.size(), 2u);
  EXPECT_EQ(std::count_if(all.begin(), all.end(), [](const Feature& f) { return f.id == "G5a"; }), 0);
}

TEST(ReduceFeatures, TooFewDispatchable) {
  auto c = test::load_case("kundur_2area");
  const auto modes = small_signal::eigen_modes(small_signal::linearize(c, grid::solve_power_flow(c)), c);
  const auto mode = small_signal::min_damping_mode(modes, small_signal::TargetModes::inter_area);
  c.generators[0].dispatchable = false;
  c.generators[1].dispatchable = false;
  EXPECT_THROW(reduce_features(c, mode, 4), FeatureReductionError);
  EXPECT_THROW(reduce_features(c, mode, 1), PreconditionError);
}
