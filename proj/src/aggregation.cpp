#include "resalloc/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "resalloc/errors.hpp"

namespace resalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Weights proportional to the given precisions; returns 1/sum or +inf.
double fill_row(std::span<const std::size_t> members,
                std::span<const double> precisions,
                std::vector<WeightEntry>& row) {
  double total = 0.0;
  for (double q : precisions) total += q;
  row.clear();
  row.reserve(members.size());
  if (!(total > 0.0)) {
    for (std::size_t i : members) row.push_back({i, 0.0});
    return kInf;
  }
  for (std::size_t k = 0; k < members.size(); ++k) {
    row.push_back({members[k], precisions[k] / total});
  }
  return 1.0 / total;
}

}  // namespace

double AggregationWeights::weight(std::size_t coordinate,
                                  std::size_t source) const {
  for (const auto& e : rows.at(coordinate)) {
    if (e.source == source) return e.weight;
  }
  return 0.0;
}

Eigen::MatrixXd AggregationWeights::dense(std::size_t n_sources) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(n_sources), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (const auto& e : rows[j]) {
      m(static_cast<Eigen::Index>(e.source), static_cast<Eigen::Index>(j)) = e.weight;
    }
  }
  return m;
}

AggregationWeights optimal_weights_single(std::span<const double> losses) {
  if (losses.empty()) throw NoInformationError("no sources to aggregate");
  std::vector<std::size_t> members(losses.size());
  std::vector<double> precisions(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double l = losses[i];
    if (std::isnan(l) || l <= 0.0) {
      std::ostringstream os;
      os << "loss " << i << " must be positive, got " << l;
      throw DomainError(os.str());
    }
    members[i] = i;
    precisions[i] = std::isinf(l) ? 0.0 : 1.0 / l;
  }
  AggregationWeights w;
  w.rows.resize(1);
  const double loss = fill_row(members, precisions, w.rows[0]);
  if (std::isinf(loss)) {
    throw NoInformationError("every source has infinite loss");
  }
  w.per_coord_loss = {loss};
  w.total_loss = loss;
  return w;
}

double weighted_loss(std::span<const double> weights,
                     std::span<const double> losses) {
  if (weights.size() != losses.size()) {
    throw DimensionMismatch("weights and losses differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0) continue;
    total += weights[i] * weights[i] * losses[i];
  }
  return total;
}

AggregationWeights optimal_weights_supported(
    std::span<const SourceModel> sources, std::span<const double> r,
    std::size_t d) {
  if (r.size() != sources.size()) {
    throw DimensionMismatch("allocation length differs from source count");
  }
  const auto sets = reciprocal_sets(sources, d);
  AggregationWeights w;
  w.rows.resize(d);
  w.per_coord_loss.resize(d);
  std::vector<double> precisions;
  for (std::size_t j = 0; j < d; ++j) {
    precisions.clear();
    for (std::size_t i : sets[j]) {
      const auto& src = sources[i];
      precisions.push_back(src.tradeoff_at(src.position_of(j)).precision(r[i]));
    }
    const double loss = fill_row(sets[j], precisions, w.rows[j]);
    if (std::isinf(loss)) {
      std::ostringstream os;
      os << "coordinate " << j << " has no source with finite loss";
      throw UnobservableCoordinate(j, os.str());
    }
    w.per_coord_loss[j] = loss;
    w.total_loss += loss;
  }
  return w;
}

AggregationWeights uniform_weights_supported(
    std::span<const SourceModel> sources, std::span<const double> r,
    std::size_t d) {
  if (r.size() != sources.size()) {
    throw DimensionMismatch("allocation length differs from source count");
  }
  const auto sets = reciprocal_sets(sources, d);
  AggregationWeights w;
  w.rows.resize(d);
  w.per_coord_loss.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double share = 1.0 / static_cast<double>(sets[j].size());
    double loss = 0.0;
    for (std::size_t i : sets[j]) {
      const auto& src = sources[i];
      w.rows[j].push_back({i, share});
      loss += share * share * src.tradeoff_at(src.position_of(j)).loss(r[i]);
    }
    w.per_coord_loss[j] = loss;
    w.total_loss += loss;
  }
  return w;
}

std::vector<double> aggregate_estimates(
    std::span<const std::vector<double>> estimates,
    std::span<const Support> supports, const AggregationWeights& w) {
  if (estimates.size() != supports.size()) {
    throw DimensionMismatch("one support per estimate is required");
  }
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].size() != supports[i].size()) {
      std::ostringstream os;
      os << "estimate " << i << " has " << estimates[i].size()
         << " entries but its support has " << supports[i].size();
      throw DimensionMismatch(os.str());
    }
  }
  std::vector<double> out(w.dimension(), 0.0);
  for (std::size_t j = 0; j < w.dimension(); ++j) {
    for (const auto& e : w.rows[j]) {
      if (e.weight == 0.0) continue;
      if (e.source >= supports.size()) {
        throw DimensionMismatch("weights reference a missing source");
      }
      const auto& s = supports[e.source];
      auto it = std::lower_bound(s.begin(), s.end(), j);
      if (it == s.end() || *it != j) {
        throw DimensionMismatch("weight placed on a coordinate outside the source support");
      }
      out[j] += e.weight * estimates[e.source][static_cast<std::size_t>(it - s.begin())];
    }
  }
  return out;
}

std::vector<double> aggregate_estimates(
    std::span<const std::vector<double>> estimates,
    const AggregationWeights& w) {
  if (w.dimension() != 1) {
    throw DimensionMismatch("expected single-row weights");
  }
  if (estimates.size() != w.rows[0].size()) {
    throw DimensionMismatch("one weight per estimate is required");
  }
  const std::size_t d = estimates.empty() ? 0 : estimates.front().size();
  std::vector<double> out(d, 0.0);
  for (const auto& e : w.rows[0]) {
    if (estimates[e.source].size() != d) {
      throw DimensionMismatch("estimates differ in length");
    }
    if (e.weight == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) out[j] += e.weight * estimates[e.source][j];
  }
  return out;
}

}  // namespace resalloc
