#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resalloc/solver_core.hpp"
#include "resalloc/tradeoffs.hpp"

namespace resalloc {

enum class ElectionMode { Direct, Indirect };

std::string_view to_string(ElectionMode mode);

/// Decide whether <theta, c> > b from noisy regional estimates.
///
/// Direct mode: region i is estimated with variance sigma_i^2(r_i), given by
/// the loss of a TradeoffFunction. Indirect mode: region i reports the wrong
/// bit with probability l_i(r_i) = exp(-r_i eta_i^2 / 2) / 2.
class ElectionProblem {
 public:
  /// Weights are normalized to sum to one; they must be nonnegative with a
  /// positive total.
  static ElectionProblem direct(std::vector<double> weights,
                                std::vector<TradeoffFunction> variance_fns,
                                double advantage, SimplexConstraint constraint);
  /// Margins must lie in (0, 1/2].
  static ElectionProblem indirect(std::vector<double> weights,
                                  std::vector<double> margins, double advantage,
                                  SimplexConstraint constraint);

  ElectionMode mode() const noexcept { return mode_; }
  std::size_t regions() const noexcept { return weights_.size(); }
  std::span<const double> weights() const noexcept { return weights_; }
  double max_weight() const noexcept { return max_weight_; }
  /// Threshold b after normalization.
  double threshold() const noexcept { return 0.5; }
  /// Advantage t, or a target precision t_d chosen by the user.
  double advantage() const noexcept { return advantage_; }
  std::span<const TradeoffFunction> loss_fns() const noexcept { return losses_; }
  /// Indirect mode only.
  std::span<const double> margins() const noexcept { return margins_; }
  const SimplexConstraint& constraint() const noexcept { return constraint_; }

  /// Same problem with a different budget.
  ElectionProblem with_budget(double budget) const;
  /// Same problem with a different advantage.
  ElectionProblem with_advantage(double advantage) const;

 private:
  ElectionProblem() = default;

  ElectionMode mode_ = ElectionMode::Direct;
  std::vector<double> weights_;
  double max_weight_ = 0.0;
  double advantage_ = 0.0;
  std::vector<TradeoffFunction> losses_;
  std::vector<double> margins_;
  SimplexConstraint constraint_;
};

struct BoundReport {
  std::vector<double> allocation;
  /// Upper bound on the probability of a wrong decision.
  double bound_value = 1.0;
  /// beta(r), indirect mode.
  double bias = 0.0;
  /// gamma(r) in indirect mode, sum c_i^2 sigma_i^2(r_i) in direct mode.
  double variance_term = 0.0;
  /// Value of the minimized objective.
  double objective = 0.0;
  bool feasible = true;
  /// Smallest achievable beta over the constraint (indirect mode).
  double min_bias = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double kkt_residual = 0.0;
};

/// sum_i c_i^2 sigma_i^2(r_i); regions with c_i = 0 contribute nothing.
double direct_variance(const ElectionProblem& p, std::span<const double> r);

/// exp(-(t^2/2) / (V + t ||c||_inf / 3)) with V the direct variance. Uses the
/// problem's advantage unless `t` is given.
double direct_bound(const ElectionProblem& p, std::span<const double> r,
                    std::optional<double> t = std::nullopt);

/// Minimizes the direct variance; the minimizer does not depend on t.
BoundReport solve_direct(const ElectionProblem& p, const SolverOptions& options = {});

/// beta(r) = sum_i c_i l_i(r_i).
double indirect_bias(const ElectionProblem& p, std::span<const double> r);
/// gamma(r) = sum_i c_i^2 l_i(r_i).
double indirect_gamma(const ElectionProblem& p, std::span<const double> r);

/// 2 gamma/(t - beta)^2 + (2/3) ||c||_inf/(t - beta), +infinity when
/// beta >= t. This is -1 / log of indirect_bound, so both share a minimizer.
double indirect_objective(const ElectionProblem& p, std::span<const double> r);

/// exp(-((t - beta)^2/2) / (gamma + ||c||_inf (t - beta)/3)), which equals
/// exp(-1 / indirect_objective). 1 when beta >= t.
double indirect_bound(const ElectionProblem& p, std::span<const double> r);

/// Checks that some allocation has beta < t (by minimizing beta), then
/// minimizes the indirect objective keeping every iterate strictly inside
/// beta < t - 1e-9. An infeasible problem yields feasible = false and the
/// beta-minimizing allocation.
BoundReport solve_indirect(const ElectionProblem& p, const SolverOptions& options = {});

/// solve_indirect (or solve_direct) once per budget.
std::vector<BoundReport> regime_study(const ElectionProblem& p,
                                      std::span<const double> budgets,
                                      const SolverOptions& options = {});

struct RegionTable {
  std::vector<std::string> names;
  std::vector<double> weights;
  std::vector<double> margins;
};

/// Reads a UTF-8 CSV with header columns region,weight,margin (any order,
/// further columns ignored). Throws InputError, ParseError or SchemaError.
RegionTable load_regions_csv(const std::string& path);

}  // namespace resalloc
