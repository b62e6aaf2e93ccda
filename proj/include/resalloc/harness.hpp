#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace resalloc {

class SupportProblem;
class DesignProblem;
class ElectionProblem;

/// Monte Carlo run parameters. Trials are split into fixed blocks of
/// kBlockTrials, each with its own generator derived from (seed, block), and
/// block results are merged in block order. Reports are therefore
/// bit-identical for any thread count.
struct SimulationSpec {
  std::size_t trials = 100000;
  std::uint64_t seed = 20160707;
  /// 0 selects the hardware concurrency.
  std::size_t threads = 0;

  static constexpr std::size_t kBlockTrials = 4096;
};

struct SimulationReport {
  /// "mse", "decision" or "tail".
  std::string check;
  double empirical_risk = 0.0;
  /// Predicted risk (mse) or the upper bound being checked (decision, tail).
  double predicted_risk = 0.0;
  double std_error = 0.0;
  /// mse: |empirical - predicted| <= 3 std_error. decision, tail:
  /// empirical <= predicted.
  bool pass = false;
  /// Set when the bound's assumptions do not hold for the simulated noise
  /// (direct elections: unbounded Gaussian estimates). Reported only.
  bool advisory = false;
  bool one_sided = false;
  std::size_t trials = 0;
  /// Tail checks: the confidence parameter.
  double delta = 0.0;
  /// mse checks: per-coordinate mean of the estimate and its standard error.
  std::vector<double> coordinate_mean;
  std::vector<double> coordinate_std_error;
  std::vector<double> true_theta;
};

enum class WeightRule { Optimal, Uniform };

/// N sources estimate theta in R^d with independent Gaussian noise of total
/// variance losses[i] (losses[i]/d per coordinate); the aggregate uses the
/// optimal or the uniform weights. Predicted risk is sum_i w_i^2 l_i.
SimulationReport simulate_mse(std::span<const double> losses,
                              std::span<const double> theta, WeightRule rule,
                              const SimulationSpec& spec);

/// Supported sources at allocation r: source i reports coordinate j in S_i
/// with variance 1/q_i^(j)(r_i); coordinates are combined with the optimal
/// per-coordinate weights. Predicted risk is sum_j 1 / sum_{i in I_j} q.
SimulationReport simulate_mse(const SupportProblem& p, std::span<const double> r,
                              std::span<const double> theta,
                              const SimulationSpec& spec);

/// y = X theta + eps with eps_n ~ N(0, 1/P(r)_nn), estimated by the
/// minimum-variance unbiased estimator. Predicted risk is Tr((X^T P X)^-1).
/// Rows without precision at r are not observed.
SimulationReport simulate_mse(const DesignProblem& p, std::span<const double> r,
                              std::span<const double> theta,
                              const SimulationSpec& spec);

/// Truth used by simulate_decision when none is given. Indirect: bits
/// choosing the heaviest regions until <theta, c> >= 1/2 + t. Direct: every
/// coordinate equal to 1/2 + t, so that <theta, c> = 1/2 + t.
std::vector<double> default_decision_theta(const ElectionProblem& p);

/// Frequency of the wrong decision <theta_hat, c> <= 1/2 when
/// <theta, c> >= 1/2 + t. Indirect: theta_hat_i = 1 - theta_i with
/// probability l_i(r_i). Direct: theta_hat_i ~ N(theta_i, sigma_i^2(r_i)),
/// untruncated. The bound checked is the problem's Bernstein bound at r.
SimulationReport simulate_decision(const ElectionProblem& p,
                                   std::span<const double> r,
                                   std::span<const double> theta,
                                   const SimulationSpec& spec);

/// Frequency of ||theta_hat - theta||^2 > tail_bound_radius(delta), one
/// report per delta; passes when it does not exceed delta.
std::vector<SimulationReport> simulate_tail(const DesignProblem& p,
                                            std::span<const double> r,
                                            std::span<const double> theta,
                                            std::span<const double> deltas,
                                            const SimulationSpec& spec);

/// Every coordinate mean within k standard errors of the truth.
bool coordinates_unbiased(const SimulationReport& report, double k = 3.0);

}  // namespace resalloc
