#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace resalloc {

enum class TradeoffKind {
  LinearPrecision,      // q(r) = r / sigma^2
  PowerPrecision,       // q(r) = r^alpha / sigma^2
  LogChannelPrecision,  // q(r) = 1/sigma^2 + log(1 + (r/R)/a)
  ExpMarginLoss,        // l(r) = exp(-r eta^2 / 2) / 2
  CustomConvexLoss,     // l(r) piecewise linear through user samples
};

std::string_view to_string(TradeoffKind kind);

/// One (resource, loss) knot of a CustomConvexLoss table.
struct LossSample {
  double resource;
  double loss;
};

/// Resource-to-quality map of a single source.
///
/// Every member exposes both parameterizations: the loss l(r) (expected
/// error for resource r) and the precision q(r) = 1/l(r). Members built from
/// a precision formula have q positive, non-decreasing and concave on
/// r >= 0, hence l convex and non-increasing. Members built from a loss
/// formula (ExpMarginLoss, CustomConvexLoss) guarantee l convex and
/// non-increasing; their precision is not concave in general.
///
/// Values are immutable after construction and safe to share across threads.
class TradeoffFunction {
 public:
  static TradeoffFunction linear_precision(double sigma_sq);
  static TradeoffFunction power_precision(double sigma_sq, double alpha);
  static TradeoffFunction log_channel_precision(double sigma_sq, double a,
                                                double budget_ref);
  /// Polling error bound exp(-r eta^2 / 2) / 2. The variant without the
  /// factor 1/2 in the exponent is obtained with eta * sqrt(2).
  static TradeoffFunction exp_margin_loss(double eta);
  /// Piecewise-linear loss through `samples`. The first sample must sit at
  /// resource 0, resources must increase strictly, losses must be positive,
  /// non-increasing, and have non-decreasing slopes (convexity). The loss
  /// is held constant past the last sample.
  static TradeoffFunction custom_convex_loss(std::vector<LossSample> samples);

  TradeoffKind kind() const noexcept { return kind_; }
  double sigma_sq() const noexcept { return sigma_sq_; }
  double alpha() const noexcept { return alpha_; }
  double a() const noexcept { return a_; }
  double budget_ref() const noexcept { return budget_ref_; }
  double eta() const noexcept { return eta_; }
  std::span<const LossSample> samples() const;

  /// True for the precision-parameterized members, whose q is concave.
  bool has_concave_precision() const noexcept;

  /// q(r). Zero for linear/power precision at r = 0.
  double precision(double r) const;
  /// l(r) = 1/q(r); +infinity when q(r) = 0.
  double loss(double r) const;
  /// dq/dr. Throws DerivativeSingularity for power precision with
  /// alpha < 1 at r = 0.
  double precision_derivative(double r) const;
  /// dl/dr. Throws DerivativeSingularity where l or its slope diverges.
  double loss_derivative(double r) const;

  /// dq/dr with the boundary singularity replaced by `cap`; results are also
  /// clamped to `cap`. Used by the iterative solvers.
  double precision_derivative_capped(double r, double cap) const;
  /// dl/dr clamped to [-cap, 0]; -cap where the true slope diverges.
  double loss_derivative_capped(double r, double cap) const;

  /// Smallest r >= 0 with q(r) = y. Throws DomainError when y is outside
  /// the range of q.
  double resource_for_precision(double y) const;
  /// Smallest r >= 0 with l(r) = y. Throws DomainError when y is outside
  /// the range of l.
  double resource_for_loss(double y) const;

 private:
  TradeoffFunction() = default;

  TradeoffKind kind_ = TradeoffKind::LinearPrecision;
  double sigma_sq_ = 1.0;
  double alpha_ = 1.0;
  double a_ = 1.0;
  double budget_ref_ = 1.0;
  double eta_ = 0.5;
  std::shared_ptr<const std::vector<LossSample>> table_;
};

}  // namespace resalloc
