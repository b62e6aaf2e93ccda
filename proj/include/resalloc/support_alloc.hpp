#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "resalloc/aggregation.hpp"
#include "resalloc/solver_core.hpp"
#include "resalloc/sources.hpp"

namespace resalloc {

/// Allocation across sources that observe different coordinate subsets:
/// minimize sum_j 1 / sum_{i in I_j} q_i^(j)(r_i) over the budget.
class SupportProblem {
 public:
  SupportProblem(std::size_t dimension, std::vector<SourceModel> sources,
                 SimplexConstraint constraint);

  std::size_t dimension() const noexcept { return dimension_; }
  std::span<const SourceModel> sources() const noexcept { return sources_; }
  const SimplexConstraint& constraint() const noexcept { return constraint_; }
  /// I_j for every coordinate, computed at construction.
  const std::vector<std::vector<std::size_t>>& reciprocal_sets() const noexcept {
    return reciprocal_;
  }

  /// Objective at r; +infinity when some coordinate has zero precision.
  double objective(std::span<const double> r) const;
  /// Analytic gradient of the objective; boundary singularities are clamped
  /// to `cap`.
  void gradient(std::span<const double> r, std::span<double> out,
                double cap = 1e12) const;
  /// 1 / sum_{i in I_j} q_i^(j)(r_i) for each coordinate.
  std::vector<double> coordinate_losses(std::span<const double> r) const;

 private:
  std::size_t dimension_;
  std::vector<SourceModel> sources_;
  SimplexConstraint constraint_;
  std::vector<std::vector<std::size_t>> reciprocal_;
};

/// I_j = { i : j in S_i }. Throws UnobservableCoordinate on an empty set.
std::vector<std::vector<std::size_t>> reciprocal_sets(const SupportProblem& p);

/// Projected gradient descent on the support objective; the report carries
/// the per-coordinate losses at the solution.
SolverReport solve_support(const SupportProblem& p,
                           const SolverOptions& options = {});

/// Disjoint singleton supports with q_i(r) = r / sigma_i^2:
/// r_i = R sigma_i / sum_j sigma_j. Takes standard deviations.
std::vector<double> solve_total_independence_closed(
    std::span<const double> sigma, double budget);

}  // namespace resalloc
