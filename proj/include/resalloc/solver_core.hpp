#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "resalloc/tradeoffs.hpp"

namespace resalloc {

/// Divisible budget { r : lower <= r <= upper, sum(r) <= budget }.
/// Empty bound vectors mean 0 and +infinity respectively.
struct SimplexConstraint {
  double budget = 1.0;
  std::vector<double> lower;
  std::vector<double> upper;

  static SimplexConstraint with_budget(double budget) { return {budget, {}, {}}; }

  double lower_at(std::size_t i) const;
  double upper_at(std::size_t i) const;
  bool has_box() const noexcept { return !lower.empty() || !upper.empty(); }

  /// Throws InfeasibleConstraint / DimensionMismatch / DomainError.
  void validate(std::size_t n) const;
  /// Feasibility of r up to `tol` (absolute, scaled by the budget).
  bool contains(std::span<const double> r, double tol = 1e-9) const;
  /// Same bounds with every quantity divided by `factor`.
  SimplexConstraint scaled(double factor) const;
};

struct SolverReport {
  std::vector<double> allocation;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Norm of the projected-gradient step x - P(x - grad) in budget-normalized
  /// coordinates; zero at a stationary point.
  double kkt_residual = 0.0;
  /// Per-coordinate losses, filled by solvers whose objective is a sum of
  /// coordinate losses.
  std::vector<double> component_losses;
};

struct SolverOptions {
  /// Relative objective change regarded as a stall.
  double objective_tolerance = 1e-10;
  /// Bound on kkt_residual for convergence.
  double gradient_tolerance = 1e-8;
  /// Consecutive stalled iterations required.
  std::size_t stall_window = 5;
  std::size_t max_iterations = 100000;
  double initial_step = 1.0;
  /// Clamp for derivatives that diverge on the boundary.
  double gradient_cap = 1e12;
  double armijo = 1e-4;
};

/// Euclidean projection onto the constraint set. The pure scaled simplex
/// (no box) uses the exact sort-and-threshold procedure; boxes use an exact
/// breakpoint search on the threshold.
std::vector<double> project_simplex(std::span<const double> v,
                                    const SimplexConstraint& c);

/// Smooth objective to minimize. `value` may return +infinity outside its
/// domain; `gradient` is only evaluated at points of finite value.
struct SmoothObjective {
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
};

/// Projected gradient descent with Armijo backtracking (halving). Works in
/// budget-normalized coordinates; the trial step is `initial_step` on the
/// first iteration and a Barzilai-Borwein estimate afterwards.
SolverReport minimize_projected(const SmoothObjective& objective,
                                const SimplexConstraint& c,
                                std::vector<double> start,
                                const SolverOptions& options = {});

/// Projection of the uniform point budget/n onto the constraint.
std::vector<double> uniform_start(const SimplexConstraint& c, std::size_t n);

/// sum_i q_i(r_i).
double total_precision(std::span<const TradeoffFunction> fs,
                       std::span<const double> r);

/// Maximizes sum_i q_i(r_i) over the constraint. Requires concave
/// precisions; reports objective = sum q_i(r_i*).
SolverReport solve_simplex_generic(std::span<const TradeoffFunction> fs,
                                   const SimplexConstraint& c,
                                   const SolverOptions& options = {});

/// Linear precision optimum: the whole budget to the smallest variance
/// (lowest index on ties).
std::vector<double> solve_best_source(std::span<const double> sigma_sq,
                                      double budget);

/// Closed-form optimum for q_i(r) = r^alpha / sigma_i^2, alpha in (0,1).
/// alpha >= 1 falls back to solve_best_source.
std::vector<double> solve_power_kkt(std::span<const double> sigma_sq,
                                    double alpha, double budget);

struct WaterFillingResult {
  std::vector<double> allocation;
  /// Level A with sum_i max(0, A - a_i) = 1.
  double level = 0.0;
};

/// Optimum for q_i(r) = 1/sigma_i^2 + log(1 + (r/R)/a_i):
/// r_i = R max(0, A - a_i). The variances do not influence the result.
WaterFillingResult solve_water_filling(std::span<const double> sigma_sq,
                                       std::span<const double> a,
                                       double budget);

}  // namespace resalloc
