#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "resalloc/sources.hpp"

namespace resalloc {

/// Convex weights of one coordinate over its reciprocal set.
struct WeightEntry {
  std::size_t source;
  double weight;
};

/// Per-coordinate convex aggregation weights, stored sparsely by reciprocal
/// set. rows[j] lists the sources with nonzero-eligible weight for
/// coordinate j; weights in a row sum to one.
struct AggregationWeights {
  std::vector<std::vector<WeightEntry>> rows;
  std::vector<double> per_coord_loss;
  double total_loss = 0.0;

  std::size_t dimension() const noexcept { return rows.size(); }
  /// Weight of source i for coordinate j (zero outside I_j).
  double weight(std::size_t coordinate, std::size_t source) const;
  /// Dense N x d matrix (column j = row j of the sparse storage).
  Eigen::MatrixXd dense(std::size_t n_sources) const;
};

/// Optimal convex weights for sources of the given losses all estimating the
/// same quantity: lambda_i proportional to 1/l_i, total loss 1/sum(1/l_i).
/// Infinite losses receive weight zero. The result has a single row.
/// Throws NoInformationError if every loss is infinite.
AggregationWeights optimal_weights_single(std::span<const double> losses);

/// Loss sum(lambda_i^2 l_i) of arbitrary weights over the same sources.
double weighted_loss(std::span<const double> weights,
                     std::span<const double> losses);

/// Optimal per-coordinate weights for sources with heterogeneous supports at
/// allocation r: coordinate j weighs i in I_j by q_i^(j)(r_i).
AggregationWeights optimal_weights_supported(
    std::span<const SourceModel> sources, std::span<const double> r,
    std::size_t d);

/// Uniform weights 1/|I_j| over each reciprocal set, with their loss
/// sum_j sum_{i in I_j} l_i^(j)(r_i) / |I_j|^2.
AggregationWeights uniform_weights_supported(
    std::span<const SourceModel> sources, std::span<const double> r,
    std::size_t d);

/// Combines partial estimates: coordinate j = sum over I_j of the weight
/// times the entry of source i's estimate at coordinate j. estimates[i] is
/// aligned with supports[i].
std::vector<double> aggregate_estimates(
    std::span<const std::vector<double>> estimates,
    std::span<const Support> supports, const AggregationWeights& w);

/// Convenience form for full-support estimates combined with the single-row
/// weights of optimal_weights_single.
std::vector<double> aggregate_estimates(
    std::span<const std::vector<double>> estimates, const AggregationWeights& w);

}  // namespace resalloc
