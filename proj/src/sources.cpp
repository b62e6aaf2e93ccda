#include "resalloc/sources.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "resalloc/errors.hpp"

namespace resalloc {

namespace {

void check_support(const Support& support) {
  if (support.empty()) throw DomainError("source support must be nonempty");
  for (std::size_t k = 1; k < support.size(); ++k) {
    if (support[k] <= support[k - 1]) {
      throw DomainError("source support must be strictly increasing");
    }
  }
}

}  // namespace

SourceModel::SourceModel(Support support, TradeoffFunction shared)
    : support_(std::move(support)), tradeoffs_{std::move(shared)} {
  check_support(support_);
}

SourceModel::SourceModel(Support support,
                         std::vector<TradeoffFunction> per_coordinate)
    : support_(std::move(support)), tradeoffs_(std::move(per_coordinate)) {
  check_support(support_);
  if (tradeoffs_.size() != 1 && tradeoffs_.size() != support_.size()) {
    std::ostringstream os;
    os << "source has " << support_.size() << " coordinates but "
       << tradeoffs_.size() << " tradeoff functions";
    throw DimensionMismatch(os.str());
  }
}

const TradeoffFunction& SourceModel::tradeoff_at(std::size_t k) const {
  if (k >= support_.size()) throw DimensionMismatch("support position out of range");
  return tradeoffs_.size() == 1 ? tradeoffs_.front() : tradeoffs_[k];
}

std::size_t SourceModel::position_of(std::size_t coordinate) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), coordinate);
  if (it == support_.end() || *it != coordinate) return npos;
  return static_cast<std::size_t>(it - support_.begin());
}

SourceModel full_support_source(std::size_t d, TradeoffFunction f) {
  Support s(d);
  std::iota(s.begin(), s.end(), std::size_t{0});
  return SourceModel(std::move(s), std::move(f));
}

std::vector<std::vector<std::size_t>> reciprocal_sets(
    std::span<const SourceModel> sources, std::size_t d) {
  std::vector<std::vector<std::size_t>> sets(d);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (std::size_t j : sources[i].support()) {
      if (j >= d) {
        std::ostringstream os;
        os << "source " << i << " observes coordinate " << j
           << " outside dimension " << d;
        throw DimensionMismatch(os.str());
      }
      sets[j].push_back(i);
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (sets[j].empty()) {
      std::ostringstream os;
      os << "coordinate " << j << " is observed by no source";
      throw UnobservableCoordinate(j, os.str());
    }
  }
  return sets;
}

}  // namespace resalloc
