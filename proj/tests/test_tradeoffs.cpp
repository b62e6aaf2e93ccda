#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "resalloc/errors.hpp"
#include "resalloc/tradeoffs.hpp"

using namespace resalloc;

namespace {

std::vector<TradeoffFunction> catalog() {
  return {
      TradeoffFunction::linear_precision(2.0),
      TradeoffFunction::power_precision(1.5, 0.6),
      TradeoffFunction::power_precision(0.7, 1.0),
      TradeoffFunction::log_channel_precision(1.2, 0.8, 3.0),
      TradeoffFunction::exp_margin_loss(0.2),
      TradeoffFunction::custom_convex_loss({{0.0, 4.0}, {1.0, 2.0}, {3.0, 1.0}, {7.0, 0.5}}),
  };
}

std::vector<double> grid() {
  std::vector<double> g;
  for (double r = 0.0; r <= 50.0; r += 0.25) g.push_back(r);
  return g;
}

}  // namespace

TEST(Tradeoffs, PrecisionExamples) {
  EXPECT_DOUBLE_EQ(TradeoffFunction::linear_precision(2.0).precision(1.0), 0.5);
  EXPECT_DOUBLE_EQ(TradeoffFunction::power_precision(1.0, 0.5).precision(4.0), 2.0);
  EXPECT_DOUBLE_EQ(TradeoffFunction::log_channel_precision(1.0, 1.0, 1.0).precision(0.0), 1.0);
}

TEST(Tradeoffs, LossExamples) {
  EXPECT_DOUBLE_EQ(TradeoffFunction::linear_precision(3.0).loss(1.0), 3.0);
  EXPECT_DOUBLE_EQ(TradeoffFunction::exp_margin_loss(0.1).loss(0.0), 0.5);
  const double l0 = TradeoffFunction::linear_precision(1.0).loss(0.0);
  EXPECT_TRUE(std::isinf(l0));
  EXPECT_GT(l0, 0.0);
  EXPECT_EQ(TradeoffFunction::power_precision(1.0, 0.5).precision(0.0), 0.0);
}

TEST(Tradeoffs, DerivativeExamples) {
  EXPECT_DOUBLE_EQ(TradeoffFunction::linear_precision(2.0).precision_derivative(5.0), 0.5);
  EXPECT_DOUBLE_EQ(TradeoffFunction::power_precision(1.0, 0.5).precision_derivative(1.0), 0.5);
  const auto ch = TradeoffFunction::log_channel_precision(1.0, 1.0, 1.0);
  const double fd = (ch.precision(1.0 + 1e-6) - ch.precision(1.0 - 1e-6)) / 2e-6;
  EXPECT_NEAR(ch.precision_derivative(1.0), 0.5, 1e-12);
  EXPECT_NEAR(fd, 0.5, 1e-8);
}

TEST(Tradeoffs, PowerDerivativeSingularAtZero) {
  const auto f = TradeoffFunction::power_precision(1.0, 0.5);
  EXPECT_THROW(f.precision_derivative(0.0), DerivativeSingularity);
  EXPECT_DOUBLE_EQ(f.precision_derivative_capped(0.0, 1e12), 1e12);
}

TEST(Tradeoffs, NonFiniteResourceRejected) {
  for (const auto& f : catalog()) {
    EXPECT_THROW(f.precision(std::numeric_limits<double>::quiet_NaN()), DomainError);
    EXPECT_THROW(f.loss(std::numeric_limits<double>::infinity()), DomainError);
  }
}

TEST(Tradeoffs, ConstructorValidation) {
  EXPECT_THROW(TradeoffFunction::linear_precision(0.0), DomainError);
  EXPECT_THROW(TradeoffFunction::power_precision(1.0, 1.5), DomainError);
  EXPECT_THROW(TradeoffFunction::power_precision(1.0, 0.0), DomainError);
  EXPECT_THROW(TradeoffFunction::log_channel_precision(1.0, -1.0, 1.0), DomainError);
  EXPECT_THROW(TradeoffFunction::exp_margin_loss(0.0), DomainError);
  // Not starting at 0, increasing loss, concave kink.
  EXPECT_THROW(TradeoffFunction::custom_convex_loss({{1.0, 2.0}, {2.0, 1.0}}), DomainError);
  EXPECT_THROW(TradeoffFunction::custom_convex_loss({{0.0, 1.0}, {1.0, 2.0}}), DomainError);
  EXPECT_THROW(TradeoffFunction::custom_convex_loss({{0.0, 4.0}, {1.0, 3.5}, {2.0, 1.0}}),
               DomainError);
}

TEST(Tradeoffs, LossTimesPrecisionIsOne) {
  for (const auto& f : catalog())
    for (double r : grid()) {
      if (r == 0.0 && f.precision(r) == 0.0) continue;
      EXPECT_NEAR(f.loss(r) * f.precision(r), 1.0, 1e-12) << to_string(f.kind()) << " r=" << r;
    }
}

TEST(Tradeoffs, MonotoneOnGrid) {
  for (const auto& f : catalog()) {
    const auto g = grid();
    for (std::size_t k = 1; k < g.size(); ++k) {
      EXPECT_GE(f.precision(g[k]), f.precision(g[k - 1])) << to_string(f.kind());
      EXPECT_LE(f.loss(g[k]), f.loss(g[k - 1])) << to_string(f.kind());
    }
  }
}

TEST(Tradeoffs, ConcavePrecisionForPrecisionKinds) {
  for (const auto& f : catalog()) {
    if (!f.has_concave_precision()) continue;
    const auto g = grid();
    for (std::size_t a = 0; a < g.size(); a += 7)
      for (std::size_t b = a + 1; b < g.size(); b += 5) {
        const double mid = f.precision(0.5 * (g[a] + g[b]));
        EXPECT_GE(mid, 0.5 * (f.precision(g[a]) + f.precision(g[b])) - 1e-12);
      }
  }
}

TEST(Tradeoffs, ConvexLossForLossKinds) {
  for (const auto& f : catalog()) {
    if (f.has_concave_precision()) continue;
    const auto g = grid();
    for (std::size_t a = 0; a < g.size(); a += 7)
      for (std::size_t b = a + 1; b < g.size(); b += 5) {
        const double mid = f.loss(0.5 * (g[a] + g[b]));
        EXPECT_LE(mid, 0.5 * (f.loss(g[a]) + f.loss(g[b])) + 1e-12);
      }
  }
}

TEST(Tradeoffs, DerivativesMatchCentralDifferences) {
  for (const auto& f : catalog()) {
    if (f.kind() == TradeoffKind::CustomConvexLoss) continue;
    for (double r = 0.01; r <= 100.0; r *= 1.7) {
      const double h = 1e-5 * r;
      const double fd_q = (f.precision(r + h) - f.precision(r - h)) / (2 * h);
      const double fd_l = (f.loss(r + h) - f.loss(r - h)) / (2 * h);
      const double dq = f.precision_derivative(r);
      const double dl = f.loss_derivative(r);
      EXPECT_NEAR(dq, fd_q, 1e-7 * std::max(std::abs(dq), 1e-300) + 1e-15)
          << to_string(f.kind()) << " r=" << r;
      EXPECT_NEAR(dl, fd_l, 1e-7 * std::max(std::abs(dl), 1e-300) + 1e-15)
          << to_string(f.kind()) << " r=" << r;
    }
  }
}

TEST(Tradeoffs, CustomLossSlopesBetweenKnots) {
  const auto f = TradeoffFunction::custom_convex_loss({{0.0, 4.0}, {1.0, 2.0}, {3.0, 1.0}});
  EXPECT_DOUBLE_EQ(f.loss(0.5), 3.0);
  EXPECT_DOUBLE_EQ(f.loss(2.0), 1.5);
  EXPECT_DOUBLE_EQ(f.loss(10.0), 1.0);
  EXPECT_DOUBLE_EQ(f.loss_derivative(0.5), -2.0);
  EXPECT_DOUBLE_EQ(f.loss_derivative(2.0), -0.5);
  EXPECT_DOUBLE_EQ(f.loss_derivative(10.0), 0.0);
}

TEST(Tradeoffs, RoundTripThroughInverse) {
  for (const auto& f : catalog())
    for (double r = 0.05; r <= 40.0; r *= 1.9) {
      const double y = f.loss(r);
      if (f.kind() == TradeoffKind::CustomConvexLoss && r > 7.0) continue;  // flat tail
      const double back = f.resource_for_loss(y);
      EXPECT_NEAR(f.loss(back), y, 1e-10 * y) << to_string(f.kind());
      const double q = f.precision(r);
      EXPECT_NEAR(f.precision(f.resource_for_precision(q)), q, 1e-10 * q) << to_string(f.kind());
    }
}

TEST(Tradeoffs, InverseOutsideRangeThrows) {
  EXPECT_THROW(TradeoffFunction::exp_margin_loss(0.1).resource_for_loss(0.7), DomainError);
  EXPECT_THROW(TradeoffFunction::log_channel_precision(1.0, 1.0, 1.0).resource_for_precision(0.5),
               DomainError);
}

TEST(Tradeoffs, ExpMarginRescalingRecoversVariant) {
  // exp(-r eta^2) / 2 is the catalog form at eta * sqrt(2).
  const double eta = 0.13;
  const auto f = TradeoffFunction::exp_margin_loss(eta * std::sqrt(2.0));
  for (double r : {0.0, 1.0, 50.0, 300.0})
    EXPECT_NEAR(f.loss(r), 0.5 * std::exp(-r * eta * eta), 1e-15);
}
