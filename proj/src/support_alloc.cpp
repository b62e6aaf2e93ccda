#include "resalloc/support_alloc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "resalloc/errors.hpp"

namespace resalloc {

SupportProblem::SupportProblem(std::size_t dimension,
                               std::vector<SourceModel> sources,
                               SimplexConstraint constraint)
    : dimension_(dimension),
      sources_(std::move(sources)),
      constraint_(std::move(constraint)) {
  if (dimension_ == 0) throw DimensionMismatch("dimension must be positive");
  constraint_.validate(sources_.size());
  reciprocal_ = resalloc::reciprocal_sets(sources_, dimension_);
}

double SupportProblem::objective(std::span<const double> r) const {
  double total = 0.0;
  for (double loss : coordinate_losses(r)) total += loss;
  return total;
}

std::vector<double> SupportProblem::coordinate_losses(
    std::span<const double> r) const {
  if (r.size() != sources_.size()) {
    throw DimensionMismatch("allocation length differs from source count");
  }
  std::vector<double> losses(dimension_);
  for (std::size_t j = 0; j < dimension_; ++j) {
    double precision = 0.0;
    for (std::size_t i : reciprocal_[j]) {
      const auto& src = sources_[i];
      precision += src.tradeoff_at(src.position_of(j)).precision(std::max(r[i], 0.0));
    }
    losses[j] = precision > 0.0 ? 1.0 / precision
                                : std::numeric_limits<double>::infinity();
  }
  return losses;
}

void SupportProblem::gradient(std::span<const double> r, std::span<double> out,
                              double cap) const {
  if (r.size() != sources_.size() || out.size() != sources_.size()) {
    throw DimensionMismatch("allocation length differs from source count");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < dimension_; ++j) {
    double precision = 0.0;
    for (std::size_t i : reciprocal_[j]) {
      const auto& src = sources_[i];
      precision += src.tradeoff_at(src.position_of(j)).precision(std::max(r[i], 0.0));
    }
    if (!(precision > 0.0)) continue;
    const double outer = -1.0 / (precision * precision);
    for (std::size_t i : reciprocal_[j]) {
      const auto& src = sources_[i];
      const double slope = src.tradeoff_at(src.position_of(j))
                               .precision_derivative_capped(std::max(r[i], 0.0), cap);
      out[i] += outer * slope;
    }
  }
}

std::vector<std::vector<std::size_t>> reciprocal_sets(const SupportProblem& p) {
  return p.reciprocal_sets();
}

SolverReport solve_support(const SupportProblem& p,
                           const SolverOptions& options) {
  SmoothObjective objective;
  objective.value = [&](std::span<const double> r) { return p.objective(r); };
  objective.gradient = [&](std::span<const double> r, std::span<double> g) {
    p.gradient(r, g, options.gradient_cap);
  };
  SolverReport report = minimize_projected(
      objective, p.constraint(), uniform_start(p.constraint(), p.sources().size()),
      options);
  report.component_losses = p.coordinate_losses(report.allocation);
  return report;
}

std::vector<double> solve_total_independence_closed(
    std::span<const double> sigma, double budget) {
  if (!std::isfinite(budget) || budget <= 0.0) {
    throw DomainError("budget must be positive and finite");
  }
  if (sigma.empty()) throw DimensionMismatch("no sources");
  double total = 0.0;
  for (double s : sigma) {
    if (!std::isfinite(s) || s <= 0.0) throw DomainError("sigma must be positive");
    total += s;
  }
  std::vector<double> r(sigma.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = budget * sigma[i] / total;
  return r;
}

}  // namespace resalloc
