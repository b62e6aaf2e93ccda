#include "resalloc/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "resalloc/errors.hpp"

namespace resalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct HungarianSolution {
  std::vector<std::size_t> row_to_col;
  std::vector<double> u;  // row potentials
  std::vector<double> v;  // column potentials
};

// Minimum-cost perfect matching, O(n^3) shortest augmenting paths with
// potentials; indices 1..n, slot 0 is the virtual root.
HungarianSolution hungarian_min(const Eigen::MatrixXd& cost) {
  const std::size_t n = static_cast<std::size_t>(cost.rows());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  auto c = [&](std::size_t i, std::size_t j) {
    return cost(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
  };
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  HungarianSolution s;
  s.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) s.row_to_col[p[j] - 1] = j - 1;
  }
  s.u.assign(u.begin() + 1, u.end());
  s.v.assign(v.begin() + 1, v.end());
  return s;
}

// Every optimal permutation uses only edges that are tight under an optimal
// dual. Walk rows in order and keep the smallest tight column that still
// admits a perfect matching of the remaining rows (checked by rerouting the
// current matching along an alternating path).
std::vector<std::size_t> lexicographic_optimum(const Eigen::MatrixXd& cost,
                                               const HungarianSolution& h,
                                               double tol) {
  const std::size_t n = h.row_to_col.size();
  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double reduced = cost(static_cast<Eigen::Index>(i),
                                  static_cast<Eigen::Index>(j)) -
                             h.u[i] - h.v[j];
      tight[i][j] = std::abs(reduced) <= tol;
    }
  }
  std::vector<std::size_t> row_to_col = h.row_to_col;
  std::vector<std::size_t> col_to_row(n);
  for (std::size_t i = 0; i < n; ++i) col_to_row[row_to_col[i]] = i;

  // Alternating path from `start_row` to column `target` through unfixed rows
  // (> fixed_upto), avoiding `blocked_col`.
  auto reroute = [&](std::size_t start_row, std::size_t target,
                     std::size_t fixed_upto, std::size_t blocked_col) {
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> queue{start_row};
    std::vector<std::size_t> row_entry(n, n);
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const std::size_t row = queue[qi];
      for (std::size_t j = 0; j < n; ++j) {
        if (seen[j] || !tight[row][j] || j == blocked_col) continue;
        seen[j] = 1;
        row_entry[j] = row;
        if (j == target) {
          // Flip the path back to start_row.
          std::size_t col = j;
          while (true) {
            const std::size_t r = row_entry[col];
            const std::size_t prev = row_to_col[r];
            row_to_col[r] = col;
            col_to_row[col] = r;
            if (r == start_row) break;
            col = prev;
          }
          return true;
        }
        const std::size_t next = col_to_row[j];
        if (next > fixed_upto && next != start_row) {
          queue.push_back(next);
        }
      }
    }
    return false;
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!tight[i][j]) continue;
      if (row_to_col[i] == j) break;
      const std::size_t owner = col_to_row[j];
      if (owner < i) continue;
      // Give j to i; the displaced owner must reach i's old column.
      const std::size_t freed = row_to_col[i];
      const auto saved_rc = row_to_col;
      const auto saved_cr = col_to_row;
      row_to_col[i] = j;
      col_to_row[j] = i;
      col_to_row[freed] = n;
      if (owner != i && reroute(owner, freed, i, j)) break;
      row_to_col = saved_rc;
      col_to_row = saved_cr;
    }
  }
  return row_to_col;
}

double permutation_value(const Eigen::MatrixXd& q,
                         const std::vector<std::size_t>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    total += q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
  }
  return total;
}

}  // namespace

AssignmentResult solve_assignment(const AssignmentProblem& p) {
  const auto& q = p.q_matrix;
  if (q.rows() != q.cols()) {
    std::ostringstream os;
    os << "assignment matrix must be square, got " << q.rows() << "x" << q.cols();
    throw DimensionMismatch(os.str());
  }
  if (q.size() == 0) throw DimensionMismatch("assignment matrix is empty");
  if (!q.allFinite()) throw DomainError("assignment matrix has non-finite entries");

  const Eigen::MatrixXd cost = p.sense == Sense::Maximize ? Eigen::MatrixXd(-q) : q;
  const HungarianSolution h = hungarian_min(cost);
  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale;

  AssignmentResult result;
  result.permutation = h.row_to_col;
  result.objective = permutation_value(q, h.row_to_col);

  auto lex = lexicographic_optimum(cost, h, tol);
  const double lex_value = permutation_value(q, lex);
  const double slack = tol * static_cast<double>(lex.size());
  const bool acceptable = p.sense == Sense::Maximize
                              ? lex_value >= result.objective - slack
                              : lex_value <= result.objective + slack;
  if (acceptable) {
    result.permutation = std::move(lex);
    result.objective = lex_value;
  }
  return result;
}

Eigen::MatrixXd precision_matrix(std::span<const TradeoffFunction> fs,
                                 std::span<const double> resources) {
  if (fs.size() != resources.size()) {
    throw DimensionMismatch("need as many resource values as sources");
  }
  const auto n = static_cast<Eigen::Index>(fs.size());
  Eigen::MatrixXd q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      q(i, j) = fs[static_cast<std::size_t>(i)].precision(resources[static_cast<std::size_t>(j)]);
    }
  }
  return q;
}

Eigen::MatrixXd loss_matrix(std::span<const TradeoffFunction> fs,
                            std::span<const double> resources) {
  if (fs.size() != resources.size()) {
    throw DimensionMismatch("need as many resource values as sources");
  }
  const auto n = static_cast<Eigen::Index>(fs.size());
  Eigen::MatrixXd q(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      q(i, j) = fs[static_cast<std::size_t>(i)].loss(resources[static_cast<std::size_t>(j)]);
    }
  }
  return q;
}

AssignmentResult solve_rank_one_sorted(std::span<const double> resources,
                                       std::span<const double> sigma_sq,
                                       Sense sense,
                                       const std::function<double(double)>& phi) {
  if (resources.size() != sigma_sq.size()) {
    throw DimensionMismatch("need as many resource values as sources");
  }
  if (resources.empty()) throw DimensionMismatch("no sources");
  for (double s : sigma_sq) {
    if (!std::isfinite(s) || s <= 0.0) throw DomainError("sigma_sq must be positive");
  }
  std::vector<double> value(resources.size());
  for (std::size_t j = 0; j < resources.size(); ++j) {
    const double r = resources[j];
    if (!std::isfinite(r)) throw DomainError("resource values must be finite");
    if (sense == Sense::Minimize && r <= 0.0) {
      throw DomainError("resource values must be positive when minimizing losses");
    }
    value[j] = phi ? phi(r) : r;
  }
  const std::size_t n = resources.size();
  std::vector<std::size_t> by_resource(n), by_source(n);
  std::iota(by_resource.begin(), by_resource.end(), std::size_t{0});
  std::iota(by_source.begin(), by_source.end(), std::size_t{0});
  // Resources best first; sources best (smallest variance) first.
  std::stable_sort(by_resource.begin(), by_resource.end(),
                   [&](std::size_t a, std::size_t b) { return value[a] > value[b]; });
  std::stable_sort(by_source.begin(), by_source.end(),
                   [&](std::size_t a, std::size_t b) { return sigma_sq[a] < sigma_sq[b]; });

  AssignmentResult out;
  out.permutation.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t source =
        sense == Sense::Maximize ? by_source[k] : by_source[n - 1 - k];
    out.permutation[source] = by_resource[k];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double v = value[out.permutation[i]];
    out.objective += sense == Sense::Maximize ? v / sigma_sq[i] : sigma_sq[i] / v;
  }
  return out;
}

}  // namespace resalloc
