#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "resalloc/aggregation.hpp"
#include "resalloc/errors.hpp"

using namespace resalloc;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<SourceModel> paper_sources() {
  const std::vector<Support> s = {{2, 4, 6, 9}, {4, 7, 9}, {1, 6}, {0, 1, 3, 5, 6, 8}, {2, 3, 6}};
  std::vector<SourceModel> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    out.emplace_back(s[i], TradeoffFunction::linear_precision(static_cast<double>(i + 1)));
  return out;
}
}  // namespace

TEST(Aggregation, SingleExamples) {
  std::vector<double> l1 = {1.0, 1.0};
  auto w = optimal_weights_single(l1);
  EXPECT_DOUBLE_EQ(w.weight(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(w.total_loss, 0.5);

  std::vector<double> l2 = {1.0, 3.0};
  w = optimal_weights_single(l2);
  EXPECT_NEAR(w.weight(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(w.weight(0, 1), 0.25, 1e-15);
  EXPECT_NEAR(w.total_loss, 0.75, 1e-15);

  std::vector<double> l3 = {2.0, kInf};
  w = optimal_weights_single(l3);
  EXPECT_DOUBLE_EQ(w.weight(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(w.weight(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(w.total_loss, 2.0);
}

TEST(Aggregation, GridOracleForOneThree) {
  // lambda^2 * 1 + (1 - lambda)^2 * 3 over lambda in [0, 1], step 1e-6.
  double best = kInf, arg = 0.0;
  for (int k = 0; k <= 1000000; ++k) {
    const double lam = k * 1e-6;
    const double v = lam * lam + 3.0 * (1 - lam) * (1 - lam);
    if (v < best) best = v, arg = lam;
  }
  std::vector<double> l = {1.0, 3.0};
  const auto w = optimal_weights_single(l);
  EXPECT_NEAR(w.weight(0, 0), arg, 1e-6);
  EXPECT_NEAR(w.total_loss, best, 1e-10);
}

TEST(Aggregation, AllInfiniteThrows) {
  std::vector<double> l = {kInf, kInf};
  EXPECT_THROW(optimal_weights_single(l), NoInformationError);
}

TEST(Aggregation, DominatesUniformWeights) {
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(oracle::uniform_int(1, 8));
    const auto l = oracle::uniform_vec(n, 0.01, 100.0);
    const auto w = optimal_weights_single(l);
    double uniform = 0.0;
    for (double x : l) uniform += x / static_cast<double>(n * n);
    EXPECT_LE(w.total_loss, uniform * (1 + 1e-12));
    EXPECT_LE(w.total_loss, *std::min_element(l.begin(), l.end()) * (1 + 1e-12));
  }
}

TEST(Aggregation, MatchesSimplexGridSearch) {
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = static_cast<std::size_t>(oracle::uniform_int(2, 3));
    const auto l = oracle::uniform_vec(n, 0.1, 10.0);
    const auto grid = oracle::grid_minimize(
        [&](std::span<const double> lam) {
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += lam[i] * lam[i] * l[i];
          return s;
        },
        n, 1.0, 1e-3);
    const auto w = optimal_weights_single(l);
    EXPECT_LE(w.total_loss, grid.value + 1e-12);
    EXPECT_NEAR(w.total_loss, grid.value, 1e-5);
  }
}

TEST(Aggregation, WeightedLossOfOptimalWeights) {
  std::vector<double> l = {0.5, 2.0, 4.0};
  const auto w = optimal_weights_single(l);
  std::vector<double> lam = {w.weight(0, 0), w.weight(0, 1), w.weight(0, 2)};
  EXPECT_NEAR(weighted_loss(lam, l), w.total_loss, 1e-15);
}

TEST(Aggregation, SupportedDisjoint) {
  std::vector<SourceModel> s = {SourceModel({0}, TradeoffFunction::linear_precision(2.0)),
                                SourceModel({1}, TradeoffFunction::linear_precision(5.0))};
  std::vector<double> r = {1.0, 1.0};
  const auto w = optimal_weights_supported(s, r, 2);
  EXPECT_DOUBLE_EQ(w.weight(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(w.weight(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(w.weight(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(w.total_loss, 7.0);
}

TEST(Aggregation, SupportedSharedCoordinate) {
  std::vector<SourceModel> s = {SourceModel({0}, TradeoffFunction::linear_precision(1.0)),
                                SourceModel({0}, TradeoffFunction::linear_precision(1.0))};
  std::vector<double> r = {1.0, 1.0};
  const auto w = optimal_weights_supported(s, r, 1);
  EXPECT_DOUBLE_EQ(w.weight(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(w.weight(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(w.total_loss, 0.5);
}

TEST(Aggregation, SupportedMatchesSummationOracle) {
  const auto src = paper_sources();
  std::vector<double> r(5, 0.2);
  const auto w = optimal_weights_supported(src, r, 10);
  // Coordinate by coordinate: which sources see it, with q = r / sigma^2.
  const std::vector<std::vector<int>> who = {{4}, {3, 4}, {1, 5}, {4, 5}, {1, 2}, {4},
                                             {1, 3, 4, 5}, {2}, {4}, {1, 2}};
  double expected = 0.0;
  for (std::size_t j = 0; j < who.size(); ++j) {
    double q = 0.0;
    for (int i : who[j]) q += 0.2 / i;
    expected += 1.0 / q;
    EXPECT_NEAR(w.per_coord_loss[j], 1.0 / q, 1e-12);
  }
  EXPECT_NEAR(w.total_loss, expected, 1e-12);
}

TEST(Aggregation, RowsAreProbabilityVectorsOnReciprocalSets) {
  const auto src = paper_sources();
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = oracle::uniform_vec(5, 0.01, 1.0);
    const auto w = optimal_weights_supported(src, r, 10);
    const auto dense = w.dense(5);
    double total = 0.0;
    for (std::size_t j = 0; j < 10; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < 5; ++i) {
        const double x = dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        EXPECT_GE(x, 0.0);
        if (src[i].position_of(j) == SourceModel::npos) {
          EXPECT_EQ(x, 0.0);
        }
        s += x;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
      total += w.per_coord_loss[j];
    }
    EXPECT_NEAR(w.total_loss, total, 1e-12 * total);
  }
}

TEST(Aggregation, ZeroAllocationGetsZeroWeight) {
  const auto src = paper_sources();
  std::vector<double> r = {0.3, 0.3, 0.0, 0.4, 0.0};
  const auto w = optimal_weights_supported(src, r, 10);
  for (std::size_t j = 0; j < 10; ++j) {
    EXPECT_EQ(w.weight(j, 2), 0.0);
    EXPECT_EQ(w.weight(j, 4), 0.0);
  }
}

TEST(Aggregation, UnobservableCoordinateNamed) {
  std::vector<SourceModel> s = {SourceModel({0, 2}, TradeoffFunction::linear_precision(1.0))};
  std::vector<double> r = {1.0};
  try {
    optimal_weights_supported(s, r, 3);
    FAIL();
  } catch (const UnobservableCoordinate& e) {
    EXPECT_EQ(e.coordinate(), 1u);
  }
  // Observed only by a source without resource.
  std::vector<SourceModel> s2 = {SourceModel({0}, TradeoffFunction::linear_precision(1.0)),
                                 SourceModel({1}, TradeoffFunction::linear_precision(1.0))};
  std::vector<double> r2 = {1.0, 0.0};
  EXPECT_THROW(optimal_weights_supported(s2, r2, 2), UnobservableCoordinate);
}

TEST(Aggregation, UniformSupportedLoss) {
  const auto src = paper_sources();
  std::vector<double> r(5, 0.2);
  const auto u = uniform_weights_supported(src, r, 10);
  const auto o = optimal_weights_supported(src, r, 10);
  EXPECT_GE(u.total_loss, o.total_loss);
  // Coordinate 7 (0-based 6): sources 1, 3, 4, 5.
  const double expect = (5.0 + 15.0 + 20.0 + 25.0) / 16.0;
  EXPECT_NEAR(u.per_coord_loss[6], expect, 1e-12);
}

TEST(Aggregation, EstimateExamples) {
  std::vector<double> one = {7.0};
  std::vector<std::vector<double>> e1 = {{1.0, 2.0, 3.0}};
  const auto w1 = optimal_weights_single(one);
  EXPECT_EQ(aggregate_estimates(e1, w1), (std::vector<double>{1.0, 2.0, 3.0}));

  std::vector<double> eq = {1.0, 1.0};
  std::vector<std::vector<double>> e2 = {{2.0}, {4.0}};
  EXPECT_DOUBLE_EQ(aggregate_estimates(e2, optimal_weights_single(eq))[0], 3.0);

  std::vector<double> l13 = {1.0, 3.0};
  std::vector<std::vector<double>> e3 = {{0.0}, {4.0}};
  EXPECT_NEAR(aggregate_estimates(e3, optimal_weights_single(l13))[0], 1.0, 1e-15);
}

TEST(Aggregation, SupportedEstimatesAndLengthCheck) {
  std::vector<SourceModel> s = {SourceModel({0, 1}, TradeoffFunction::linear_precision(1.0)),
                                SourceModel({1}, TradeoffFunction::linear_precision(3.0))};
  std::vector<double> r = {1.0, 1.0};
  const auto w = optimal_weights_supported(s, r, 2);
  std::vector<Support> sup = {s[0].support(), s[1].support()};
  std::vector<std::vector<double>> est = {{5.0, 0.0}, {4.0}};
  const auto out = aggregate_estimates(est, sup, w);
  EXPECT_DOUBLE_EQ(out[0], 5.0);
  EXPECT_NEAR(out[1], 1.0, 1e-15);
  std::vector<std::vector<double>> bad = {{5.0}, {4.0}};
  EXPECT_THROW(aggregate_estimates(bad, sup, w), DimensionMismatch);
}
