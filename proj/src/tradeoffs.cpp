#include "resalloc/tradeoffs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "resalloc/errors.hpp"

namespace resalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_resource(double r) {
  if (!std::isfinite(r)) {
    throw DomainError("tradeoff evaluated at non-finite resource");
  }
  if (r < 0.0) {
    std::ostringstream os;
    os << "tradeoff evaluated at negative resource " << r;
    throw DomainError(os.str());
  }
}

void require_positive(double value, const char* name) {
  if (!std::isfinite(value) || value <= 0.0) {
    std::ostringstream os;
    os << name << " must be positive and finite, got " << value;
    throw DomainError(os.str());
  }
}

}  // namespace

std::string_view to_string(TradeoffKind kind) {
  switch (kind) {
    case TradeoffKind::LinearPrecision:
      return "linear_precision";
    case TradeoffKind::PowerPrecision:
      return "power_precision";
    case TradeoffKind::LogChannelPrecision:
      return "log_channel_precision";
    case TradeoffKind::ExpMarginLoss:
      return "exp_margin_loss";
    case TradeoffKind::CustomConvexLoss:
      return "custom_convex_loss";
  }
  return "unknown";
}

TradeoffFunction TradeoffFunction::linear_precision(double sigma_sq) {
  require_positive(sigma_sq, "sigma_sq");
  TradeoffFunction f;
  f.kind_ = TradeoffKind::LinearPrecision;
  f.sigma_sq_ = sigma_sq;
  return f;
}

TradeoffFunction TradeoffFunction::power_precision(double sigma_sq,
                                                   double alpha) {
  require_positive(sigma_sq, "sigma_sq");
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    std::ostringstream os;
    os << "alpha must lie in (0, 1], got " << alpha;
    throw DomainError(os.str());
  }
  TradeoffFunction f;
  f.kind_ = TradeoffKind::PowerPrecision;
  f.sigma_sq_ = sigma_sq;
  f.alpha_ = alpha;
  return f;
}

TradeoffFunction TradeoffFunction::log_channel_precision(double sigma_sq,
                                                         double a,
                                                         double budget_ref) {
  require_positive(sigma_sq, "sigma_sq");
  require_positive(a, "a");
  require_positive(budget_ref, "budget_ref");
  TradeoffFunction f;
  f.kind_ = TradeoffKind::LogChannelPrecision;
  f.sigma_sq_ = sigma_sq;
  f.a_ = a;
  f.budget_ref_ = budget_ref;
  return f;
}

TradeoffFunction TradeoffFunction::exp_margin_loss(double eta) {
  require_positive(eta, "eta");
  TradeoffFunction f;
  f.kind_ = TradeoffKind::ExpMarginLoss;
  f.eta_ = eta;
  return f;
}

TradeoffFunction TradeoffFunction::custom_convex_loss(
    std::vector<LossSample> samples) {
  if (samples.size() < 2) {
    throw DomainError("custom loss table needs at least two samples");
  }
  if (samples.front().resource != 0.0) {
    throw DomainError("custom loss table must start at resource 0");
  }
  double scale = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (!std::isfinite(s.resource) || !std::isfinite(s.loss) || s.loss <= 0.0) {
      std::ostringstream os;
      os << "custom loss sample " << k << " must be finite with positive loss";
      throw DomainError(os.str());
    }
    if (k > 0 && !(s.resource > samples[k - 1].resource)) {
      std::ostringstream os;
      os << "custom loss sample " << k << " resource is not increasing";
      throw DomainError(os.str());
    }
    if (k > 0 && s.loss > samples[k - 1].loss) {
      std::ostringstream os;
      os << "custom loss sample " << k << " increases the loss";
      throw DomainError(os.str());
    }
    scale = std::max(scale, s.loss);
  }
  double previous_slope = -kInf;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const double slope = (samples[k + 1].loss - samples[k].loss) /
                         (samples[k + 1].resource - samples[k].resource);
    if (slope < previous_slope - 1e-12 * scale) {
      std::ostringstream os;
      os << "custom loss samples are not convex at sample " << k;
      throw DomainError(os.str());
    }
    previous_slope = slope;
  }
  TradeoffFunction f;
  f.kind_ = TradeoffKind::CustomConvexLoss;
  f.table_ = std::make_shared<const std::vector<LossSample>>(std::move(samples));
  return f;
}

std::span<const LossSample> TradeoffFunction::samples() const {
  if (!table_) return {};
  return {table_->data(), table_->size()};
}

bool TradeoffFunction::has_concave_precision() const noexcept {
  return kind_ == TradeoffKind::LinearPrecision ||
         kind_ == TradeoffKind::PowerPrecision ||
         kind_ == TradeoffKind::LogChannelPrecision;
}

namespace {

// Index k of the segment [r_k, r_{k+1}) containing r, or size-1 past the end.
std::size_t segment_of(const std::vector<LossSample>& t, double r) {
  auto it = std::upper_bound(
      t.begin(), t.end(), r,
      [](double value, const LossSample& s) { return value < s.resource; });
  return static_cast<std::size_t>(std::distance(t.begin(), it)) - 1;
}

double table_loss(const std::vector<LossSample>& t, double r) {
  const std::size_t k = segment_of(t, r);
  if (k + 1 >= t.size()) return t.back().loss;
  const double w = (r - t[k].resource) / (t[k + 1].resource - t[k].resource);
  return t[k].loss + w * (t[k + 1].loss - t[k].loss);
}

double table_slope(const std::vector<LossSample>& t, double r) {
  const std::size_t k = segment_of(t, r);
  if (k + 1 >= t.size()) return 0.0;
  return (t[k + 1].loss - t[k].loss) / (t[k + 1].resource - t[k].resource);
}

}  // namespace

double TradeoffFunction::precision(double r) const {
  require_resource(r);
  switch (kind_) {
    case TradeoffKind::LinearPrecision:
      return r / sigma_sq_;
    case TradeoffKind::PowerPrecision:
      return std::pow(r, alpha_) / sigma_sq_;
    case TradeoffKind::LogChannelPrecision:
      return 1.0 / sigma_sq_ + std::log1p((r / budget_ref_) / a_);
    case TradeoffKind::ExpMarginLoss:
    case TradeoffKind::CustomConvexLoss:
      return 1.0 / loss(r);
  }
  return 0.0;
}

double TradeoffFunction::loss(double r) const {
  require_resource(r);
  switch (kind_) {
    case TradeoffKind::ExpMarginLoss:
      return 0.5 * std::exp(-r * eta_ * eta_ / 2.0);
    case TradeoffKind::CustomConvexLoss:
      return table_loss(*table_, r);
    default: {
      const double q = precision(r);
      return q > 0.0 ? 1.0 / q : kInf;
    }
  }
}

double TradeoffFunction::precision_derivative(double r) const {
  require_resource(r);
  switch (kind_) {
    case TradeoffKind::LinearPrecision:
      return 1.0 / sigma_sq_;
    case TradeoffKind::PowerPrecision:
      if (alpha_ == 1.0) return 1.0 / sigma_sq_;
      if (r == 0.0) {
        throw DerivativeSingularity(
            "power precision derivative diverges at r = 0");
      }
      return alpha_ * std::pow(r, alpha_ - 1.0) / sigma_sq_;
    case TradeoffKind::LogChannelPrecision:
      return 1.0 / (budget_ref_ * a_ + r);
    case TradeoffKind::ExpMarginLoss:
    case TradeoffKind::CustomConvexLoss: {
      const double l = loss(r);
      return -loss_derivative(r) / (l * l);
    }
  }
  return 0.0;
}

double TradeoffFunction::loss_derivative(double r) const {
  require_resource(r);
  switch (kind_) {
    case TradeoffKind::ExpMarginLoss:
      return -(eta_ * eta_ / 2.0) * loss(r);
    case TradeoffKind::CustomConvexLoss:
      return table_slope(*table_, r);
    default: {
      const double q = precision(r);
      if (q == 0.0) {
        throw DerivativeSingularity("loss derivative diverges at r = 0");
      }
      return -precision_derivative(r) / (q * q);
    }
  }
}

double TradeoffFunction::precision_derivative_capped(double r,
                                                     double cap) const {
  require_resource(r);
  if (kind_ == TradeoffKind::PowerPrecision && alpha_ < 1.0 && r == 0.0) {
    return cap;
  }
  return std::min(precision_derivative(r), cap);
}

double TradeoffFunction::loss_derivative_capped(double r, double cap) const {
  require_resource(r);
  if (!has_concave_precision()) return std::max(loss_derivative(r), -cap);
  const double q = precision(r);
  if (q == 0.0) return -cap;
  const double dq = precision_derivative_capped(r, cap);
  return std::max(-dq / (q * q), -cap);
}

double TradeoffFunction::resource_for_precision(double y) const {
  if (!std::isfinite(y) || y <= 0.0) {
    if (y == 0.0 && (kind_ == TradeoffKind::LinearPrecision ||
                     kind_ == TradeoffKind::PowerPrecision)) {
      return 0.0;
    }
    throw DomainError("precision level must be positive and finite");
  }
  switch (kind_) {
    case TradeoffKind::LinearPrecision:
      return y * sigma_sq_;
    case TradeoffKind::PowerPrecision:
      return std::pow(y * sigma_sq_, 1.0 / alpha_);
    case TradeoffKind::LogChannelPrecision: {
      const double excess = y - 1.0 / sigma_sq_;
      if (excess < 0.0) {
        throw DomainError("precision level below q(0) of log channel");
      }
      return budget_ref_ * a_ * std::expm1(excess);
    }
    case TradeoffKind::ExpMarginLoss:
    case TradeoffKind::CustomConvexLoss:
      return resource_for_loss(1.0 / y);
  }
  return 0.0;
}

double TradeoffFunction::resource_for_loss(double y) const {
  if (!std::isfinite(y) || y <= 0.0) {
    throw DomainError("loss level must be positive and finite");
  }
  switch (kind_) {
    case TradeoffKind::ExpMarginLoss:
      if (y > 0.5) throw DomainError("exp margin loss never exceeds 1/2");
      return -2.0 * std::log(2.0 * y) / (eta_ * eta_);
    case TradeoffKind::CustomConvexLoss: {
      const auto& t = *table_;
      if (y > t.front().loss || y < t.back().loss) {
        throw DomainError("loss level outside the custom table range");
      }
      for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        if (t[k].loss == y) return t[k].resource;
        if (t[k + 1].loss <= y) {
          const double slope = (t[k + 1].loss - t[k].loss) /
                               (t[k + 1].resource - t[k].resource);
          return t[k].resource + (y - t[k].loss) / slope;
        }
      }
      return t.back().resource;
    }
    default:
      return resource_for_precision(1.0 / y);
  }
}

}  // namespace resalloc
