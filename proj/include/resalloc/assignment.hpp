#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "resalloc/tradeoffs.hpp"

namespace resalloc {

enum class Sense { Maximize, Minimize };

/// Bijective assignment of N fixed resource values to N sources.
/// q_matrix(i, j) is the benefit (or cost, when minimizing) of handing
/// resource j to source i.
struct AssignmentProblem {
  Eigen::MatrixXd q_matrix;
  Sense sense = Sense::Maximize;
};

struct AssignmentResult {
  /// permutation[i] = resource index given to source i.
  std::vector<std::size_t> permutation;
  /// sum_i Q(i, permutation[i]).
  double objective = 0.0;
};

/// Optimal permutation via the Hungarian (Kuhn-Munkres) algorithm. Among
/// equally optimal permutations the lexicographically smallest is returned.
AssignmentResult solve_assignment(const AssignmentProblem& p);

/// Q(i, j) = q_i(r_j).
Eigen::MatrixXd precision_matrix(std::span<const TradeoffFunction> fs,
                                 std::span<const double> resources);
/// Q(i, j) = l_i(r_j) = 1/q_i(r_j).
Eigen::MatrixXd loss_matrix(std::span<const TradeoffFunction> fs,
                            std::span<const double> resources);

/// Rank-one closed forms. Maximize: sum phi(r_tau(i)) / sigma_i^2, solved by
/// pairing resources and sources in the same quality order. Minimize:
/// sum sigma_i^2 / phi(r_tau(i)), solved by pairing the largest resource
/// with the largest variance. phi must be increasing (identity by default).
AssignmentResult solve_rank_one_sorted(
    std::span<const double> resources, std::span<const double> sigma_sq,
    Sense sense, const std::function<double(double)>& phi = {});

}  // namespace resalloc
