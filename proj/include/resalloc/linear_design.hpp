#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "resalloc/solver_core.hpp"
#include "resalloc/tradeoffs.hpp"

namespace resalloc {

class SupportProblem;

enum class DesignObjective {
  TraceInverse,  // Tr((X^T P X)^-1), the mean squared error
  TailBound,     // ||(X^T P X)^-1||_F + lambda ||(X^T P X)^-1||_op
};

/// Row n of the design draws its precision from allocation component
/// `source` through `tradeoff`: P(r)_nn = tradeoff.precision(r[source]).
struct PrecisionEntry {
  std::size_t source;
  TradeoffFunction tradeoff;
};

/// Estimation of theta from y = X theta + eps, eps ~ N(0, P(r)^-1), with the
/// diagonal precision P(r) driven by the allocation r.
class DesignProblem {
 public:
  /// Throws RankDeficient unless X has full column rank (smallest singular
  /// value above 1e-10 times the largest).
  DesignProblem(Eigen::MatrixXd design, std::vector<PrecisionEntry> precision_map,
                SimplexConstraint constraint,
                DesignObjective objective = DesignObjective::TraceInverse,
                double confidence_weight = 0.0);

  const Eigen::MatrixXd& design() const noexcept { return design_; }
  std::span<const PrecisionEntry> precision_map() const noexcept { return map_; }
  const SimplexConstraint& constraint() const noexcept { return constraint_; }
  DesignObjective objective_kind() const noexcept { return objective_; }
  double confidence_weight() const noexcept { return confidence_weight_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(design_.rows()); }
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(design_.cols()); }
  /// Length of the allocation vector.
  std::size_t sources() const noexcept { return n_sources_; }

  /// Diagonal of P(r).
  Eigen::VectorXd precisions(std::span<const double> r) const;

 private:
  Eigen::MatrixXd design_;
  std::vector<PrecisionEntry> map_;
  SimplexConstraint constraint_;
  DesignObjective objective_;
  double confidence_weight_;
  std::size_t n_sources_ = 0;
};

/// Rows of the design whose precision at r is positive. Rows with zero
/// precision carry no information and are left out.
struct ObservedDesign {
  Eigen::MatrixXd design;
  Eigen::VectorXd precision;
  std::vector<std::size_t> rows;
};
ObservedDesign observed_design(const DesignProblem& p, std::span<const double> r);

/// lambda = sqrt(log(1/delta)) for a confidence level 1 - delta.
double confidence_weight_for(double delta);

struct EstimateResult {
  Eigen::VectorXd theta_hat;
  /// (X^T P X)^-1
  Eigen::MatrixXd covariance;
  /// Trace of the covariance.
  double mse_predicted = 0.0;
};

/// Precision-weighted least squares, factored once and reused across
/// observation vectors.
class MvueEstimator {
 public:
  MvueEstimator(const Eigen::MatrixXd& design, const Eigen::VectorXd& precision);

  Eigen::VectorXd estimate(const Eigen::VectorXd& y) const;
  /// (X^T P X)^-1 X^T P, so that theta_hat = gain() * y.
  const Eigen::MatrixXd& gain() const noexcept { return gain_; }
  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }

 private:
  Eigen::MatrixXd gain_;
  Eigen::MatrixXd covariance_;
};

/// theta_hat = (X^T P X)^-1 X^T P y with covariance (X^T P X)^-1.
EstimateResult mvue_estimate(const Eigen::MatrixXd& design,
                             const Eigen::VectorXd& precision,
                             const Eigen::VectorXd& y);

/// Objective of an arbitrary positive diagonal P; +infinity when X^T P X is
/// singular.
double design_objective(const Eigen::MatrixXd& design,
                        const Eigen::VectorXd& precision, DesignObjective kind,
                        double confidence_weight);
double design_objective(const DesignProblem& p, std::span<const double> r);

struct DesignGradient {
  std::vector<double> gradient;
  /// Two smallest eigenvalues of X^T P X coincide within 1e-8 relative, so
  /// the operator norm is not differentiable and `gradient` is a subgradient.
  bool nonsmooth = false;
};

/// Gradient (subgradient for the tail bound) with respect to r.
/// Throws DomainError if some precision of r is not positive.
DesignGradient design_gradient(const DesignProblem& p, std::span<const double> r,
                               double cap = 1e12);

/// Minimizes the design objective over the constraint.
SolverReport solve_design(const DesignProblem& p, const SolverOptions& options = {});

/// Radius rho with P[||theta_hat - theta||^2 > rho] <= delta:
/// 2 ||C||_F sqrt(t) + 2 ||C||_op t, C = (X^T P X)^-1, t = log(1/delta).
double tail_bound_radius(const Eigen::MatrixXd& design,
                         const Eigen::VectorXd& precision, double delta);
double tail_bound_radius(const DesignProblem& p, std::span<const double> r,
                         double delta);

/// Block design in which source i contributes the unit rows e_j, j in S_i,
/// each with precision q_i^(j)(r_i). Its trace objective equals the support
/// objective.
DesignProblem block_design(const SupportProblem& p,
                           DesignObjective objective = DesignObjective::TraceInverse,
                           double confidence_weight = 0.0);

}  // namespace resalloc
