#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "resalloc/tradeoffs.hpp"

namespace resalloc {

/// Zero-based coordinate indices observed by one source, strictly increasing.
using Support = std::vector<std::size_t>;

/// One data source: the coordinates it observes and the tradeoff function
/// governing each of them. A single tradeoff is broadcast to the whole
/// support.
class SourceModel {
 public:
  SourceModel(Support support, TradeoffFunction shared);
  SourceModel(Support support, std::vector<TradeoffFunction> per_coordinate);

  const Support& support() const noexcept { return support_; }
  std::size_t support_size() const noexcept { return support_.size(); }

  /// Tradeoff for the k-th entry of the support (not the coordinate index).
  const TradeoffFunction& tradeoff_at(std::size_t k) const;
  bool is_broadcast() const noexcept { return tradeoffs_.size() == 1; }
  std::span<const TradeoffFunction> tradeoffs() const noexcept {
    return tradeoffs_;
  }

  /// Position of coordinate j inside the support, or npos.
  std::size_t position_of(std::size_t coordinate) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  Support support_;
  std::vector<TradeoffFunction> tradeoffs_;
};

/// Sources observing every coordinate of [0, d) with the shared tradeoff.
SourceModel full_support_source(std::size_t d, TradeoffFunction f);

/// I_j = { i : j in S_i } for every coordinate j < d. Throws
/// UnobservableCoordinate for the first empty set and DimensionMismatch for
/// supports reaching past d.
std::vector<std::vector<std::size_t>> reciprocal_sets(
    std::span<const SourceModel> sources, std::size_t d);

}  // namespace resalloc
