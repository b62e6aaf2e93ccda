#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "resalloc/errors.hpp"
#include "resalloc/halfspace.hpp"
#include "resalloc/harness.hpp"
#include "resalloc/linear_design.hpp"
#include "resalloc/support_alloc.hpp"

using namespace resalloc;

namespace {
SimulationSpec spec(std::uint64_t seed, std::size_t trials = 100000, std::size_t threads = 0) {
  SimulationSpec s;
  s.seed = seed;
  s.trials = trials;
  s.threads = threads;
  return s;
}
}  // namespace

TEST(SimulateMse, SingleSource) {
  const std::vector<double> l = {1.0}, theta = {0.5, -1.0, 2.0};
  const auto r = simulate_mse(l, theta, WeightRule::Optimal, spec(1));
  EXPECT_EQ(r.check, "mse");
  EXPECT_DOUBLE_EQ(r.predicted_risk, 1.0);
  EXPECT_TRUE(r.pass) << r.empirical_risk << " +- " << r.std_error;
  EXPECT_TRUE(coordinates_unbiased(r));
}

TEST(SimulateMse, TwoEqualSources) {
  const std::vector<double> l = {1.0, 1.0}, theta = {0.0, 3.0};
  const auto r = simulate_mse(l, theta, WeightRule::Optimal, spec(2));
  EXPECT_DOUBLE_EQ(r.predicted_risk, 0.5);
  EXPECT_NEAR(r.empirical_risk, 0.5, 3 * r.std_error);
}

TEST(SimulateMse, UniformWorseThanOptimal) {
  const std::vector<double> l = {1.0, 4.0}, theta = {1.0, 1.0, 1.0};
  const auto opt = simulate_mse(l, theta, WeightRule::Optimal, spec(3));
  const auto uni = simulate_mse(l, theta, WeightRule::Uniform, spec(4));
  EXPECT_NEAR(opt.predicted_risk, 0.8, 1e-15);
  EXPECT_NEAR(uni.predicted_risk, 1.25, 1e-15);
  EXPECT_TRUE(opt.pass);
  EXPECT_TRUE(uni.pass);
  EXPECT_GT(uni.empirical_risk - opt.empirical_risk,
            3 * std::hypot(uni.std_error, opt.std_error));
}

TEST(SimulateMse, BitIdenticalForAnyThreadCount) {
  const std::vector<double> l = {0.5, 2.0, 3.0}, theta = {1.0, -1.0};
  const auto a = simulate_mse(l, theta, WeightRule::Optimal, spec(99, 50000, 1));
  const auto b = simulate_mse(l, theta, WeightRule::Optimal, spec(99, 50000, 3));
  const auto c = simulate_mse(l, theta, WeightRule::Optimal, spec(99, 50000, 8));
  EXPECT_EQ(a.empirical_risk, b.empirical_risk);
  EXPECT_EQ(a.empirical_risk, c.empirical_risk);
  EXPECT_EQ(a.std_error, c.std_error);
  EXPECT_EQ(a.coordinate_mean, c.coordinate_mean);
}

TEST(SimulateMse, DisjointSeedsAgreeStatistically) {
  const std::vector<double> l = {0.7, 1.9}, theta = {0.0, 0.0, 0.0, 0.0};
  const auto a = simulate_mse(l, theta, WeightRule::Optimal, spec(11));
  const auto b = simulate_mse(l, theta, WeightRule::Optimal, spec(12));
  EXPECT_NE(a.empirical_risk, b.empirical_risk);
  EXPECT_LE(std::abs(a.empirical_risk - b.empirical_risk),
            6 * std::hypot(a.std_error, b.std_error));
}

TEST(SimulateMse, StdErrorPositiveFromTwoTrials) {
  const std::vector<double> l = {1.0}, theta = {0.0};
  EXPECT_GT(simulate_mse(l, theta, WeightRule::Optimal, spec(5, 2)).std_error, 0.0);
}

TEST(SimulateMse, SupportedSources) {
  std::vector<SourceModel> src = {
      SourceModel({0, 1}, TradeoffFunction::linear_precision(1.0)),
      SourceModel({1, 2}, TradeoffFunction::power_precision(2.0, 0.6)),
      SourceModel({0, 2}, TradeoffFunction::linear_precision(3.0))};
  SupportProblem p(3, src, SimplexConstraint::with_budget(1.0));
  const auto r = solve_support(p).allocation;
  const std::vector<double> theta = {1.0, 2.0, -0.5};
  const auto rep = simulate_mse(p, r, theta, spec(6));
  EXPECT_NEAR(rep.predicted_risk, p.objective(r), 1e-12);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(coordinates_unbiased(rep));
}

TEST(SimulateMse, LinearDesignEstimatorUnbiased) {
  std::vector<PrecisionEntry> map;
  for (std::size_t n = 0; n < 6; ++n) map.push_back({n % 3, TradeoffFunction::linear_precision(1.0 + n)});
  DesignProblem p(oracle::gaussian_matrix(6, 3), map, SimplexConstraint::with_budget(3.0));
  const std::vector<double> r = {1.0, 1.0, 1.0}, theta = {0.5, -0.2, 1.0};
  const auto rep = simulate_mse(p, r, theta, spec(7));
  EXPECT_NEAR(rep.predicted_risk, design_objective(p, r), 1e-12);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(coordinates_unbiased(rep));
}

TEST(SimulateDecision, SingleRegionFlipRate) {
  const double eta = 0.2;
  const double r0 = -2.0 * std::log(0.2) / (eta * eta);  // l(r0) = 0.1
  const auto p = ElectionProblem::indirect({1.0}, {eta}, 0.4, SimplexConstraint::with_budget(r0));
  const std::vector<double> r = {r0}, theta = {1.0};
  const auto rep = simulate_decision(p, r, theta, spec(8));
  EXPECT_NEAR(rep.empirical_risk, 0.1, 3 * std::sqrt(0.1 * 0.9 / 100000.0));
  EXPECT_TRUE(rep.one_sided);
  EXPECT_FALSE(rep.advisory);
}

TEST(SimulateDecision, OverwhelmingAdvantageNeverErrs) {
  std::vector<TradeoffFunction> fs(3, TradeoffFunction::linear_precision(1.0));
  const auto p = ElectionProblem::direct({0.2, 0.3, 0.5}, fs, 0.45,
                                         SimplexConstraint::with_budget(3000.0));
  const std::vector<double> r = {1000.0, 1000.0, 1000.0};
  const auto rep = simulate_decision(p, r, default_decision_theta(p), spec(9));
  EXPECT_EQ(rep.empirical_risk, 0.0);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(rep.advisory);  // Gaussian estimates are unbounded
  EXPECT_GT(rep.std_error, 0.0);
}

TEST(SimulateDecision, DefaultThetaMeetsAdvantage) {
  const auto p = ElectionProblem::indirect({5, 3, 2, 1, 1}, {0.1, 0.1, 0.1, 0.1, 0.1}, 0.2,
                                           SimplexConstraint::with_budget(100.0));
  const auto theta = default_decision_theta(p);
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    EXPECT_TRUE(theta[i] == 0.0 || theta[i] == 1.0);
    s += theta[i] * p.weights()[i];
  }
  EXPECT_GE(s, 0.7 - 1e-12);
  const std::vector<double> low(5, 0.0), r(5, 20.0);
  EXPECT_THROW(simulate_decision(p, r, low, spec(1)), DomainError);
}

TEST(SimulateDecision, IndirectBoundHoldsOnRandomScenarios) {
  int checked = 0;
  for (int t = 0; checked < 5 && t < 50; ++t) {
    const auto n = static_cast<std::size_t>(oracle::uniform_int(3, 10));
    const auto p = ElectionProblem::indirect(
        oracle::uniform_vec(n, 0.2, 1.0), oracle::uniform_vec(n, 0.05, 0.4), 0.2,
        SimplexConstraint::with_budget(oracle::uniform(200.0, 2000.0)));
    const auto sol = solve_indirect(p);
    if (!sol.feasible) continue;
    ++checked;
    const auto rep = simulate_decision(p, sol.allocation, default_decision_theta(p), spec(100 + t));
    EXPECT_NEAR(rep.predicted_risk, sol.bound_value, 1e-12);
    EXPECT_TRUE(rep.pass) << rep.empirical_risk << " > " << rep.predicted_risk;
  }
  EXPECT_EQ(checked, 5);
}

TEST(SimulateTail, IdentityAndRandomDesigns) {
  std::vector<PrecisionEntry> idmap = {{0, TradeoffFunction::linear_precision(1.0)},
                                       {1, TradeoffFunction::linear_precision(1.0)}};
  DesignProblem id(Eigen::MatrixXd::Identity(2, 2), idmap, SimplexConstraint::with_budget(2.0));
  const std::vector<double> r1 = {1.0, 1.0}, th1 = {0.0, 0.0}, d1 = {0.5};
  const auto a = simulate_tail(id, r1, th1, d1, spec(20));
  EXPECT_TRUE(a[0].pass);
  EXPECT_LE(a[0].empirical_risk, 0.5);

  std::vector<PrecisionEntry> map;
  for (std::size_t n = 0; n < 6; ++n) map.push_back({n, TradeoffFunction::power_precision(1.0, 0.8)});
  DesignProblem p(oracle::gaussian_matrix(6, 3), map, SimplexConstraint::with_budget(1.0));
  const auto r = oracle::uniform_vec(6, 0.05, 0.3);
  const std::vector<double> theta = {1.0, 2.0, 3.0}, deltas = {0.1, 0.01};
  const auto reps = simulate_tail(p, r, theta, deltas, spec(21));
  ASSERT_EQ(reps.size(), 2u);
  for (const auto& rep : reps) {
    EXPECT_EQ(rep.check, "tail");
    EXPECT_TRUE(rep.pass) << rep.delta << ": " << rep.empirical_risk;
    EXPECT_NEAR(rep.predicted_risk, rep.delta, 0.0);
  }
}

TEST(SimulateTail, ReproducibleForSameSeed) {
  std::vector<PrecisionEntry> map = {{0, TradeoffFunction::linear_precision(1.0)},
                                     {1, TradeoffFunction::linear_precision(2.0)},
                                     {0, TradeoffFunction::linear_precision(3.0)}};
  Eigen::MatrixXd x(3, 2);
  x << 1, 0, 0, 1, 1, 1;
  DesignProblem p(x, map, SimplexConstraint::with_budget(1.0));
  const std::vector<double> r = {0.4, 0.6}, theta = {0.0, 1.0}, deltas = {0.1};
  const auto a = simulate_tail(p, r, theta, deltas, spec(77, 30000, 2));
  const auto b = simulate_tail(p, r, theta, deltas, spec(77, 30000, 5));
  EXPECT_EQ(a[0].empirical_risk, b[0].empirical_risk);
}

TEST(Harness, RejectsZeroTrials) {
  const std::vector<double> l = {1.0}, theta = {0.0};
  EXPECT_THROW(simulate_mse(l, theta, WeightRule::Optimal, spec(1, 0)), DomainError);
}
