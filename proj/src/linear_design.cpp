#include "resalloc/linear_design.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "resalloc/errors.hpp"
#include "resalloc/support_alloc.hpp"

namespace resalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-8;
constexpr double kSingularRatio = 1e-14;

void require_full_rank(const Eigen::MatrixXd& x) {
  if (x.rows() == 0 || x.cols() == 0) throw DimensionMismatch("design matrix is empty");
  if (!x.allFinite()) throw DomainError("design matrix has non-finite entries");
  if (x.rows() < x.cols()) {
    std::ostringstream os;
    os << "design has " << x.rows() << " rows but " << x.cols()
       << " columns; full column rank is impossible";
    throw RankDeficient(os.str());
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > 1e-10 * s(0))) {
    std::ostringstream os;
    os << "design matrix is rank deficient (singular values " << s(0) << " .. "
       << s(s.size() - 1) << ")";
    throw RankDeficient(os.str());
  }
}

void require_positive(const Eigen::VectorXd& precision) {
  for (Eigen::Index n = 0; n < precision.size(); ++n) {
    if (!(precision(n) > 0.0) || !std::isfinite(precision(n))) {
      std::ostringstream os;
      os << "precision of row " << n << " must be positive, got " << precision(n);
      throw DomainError(os.str());
    }
  }
}

Eigen::MatrixXd information(const Eigen::MatrixXd& x, const Eigen::VectorXd& p) {
  return x.transpose() * p.asDiagonal() * x;
}

double tail_value(const Eigen::VectorXd& eigenvalues, double weight) {
  // Eigenvalues of M ascending; those of M^-1 are their reciprocals.
  double frob = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    frob += 1.0 / (eigenvalues(k) * eigenvalues(k));
  }
  return std::sqrt(frob) + weight / eigenvalues(0);
}

bool singular_spectrum(const Eigen::VectorXd& eigenvalues) {
  const double top = eigenvalues(eigenvalues.size() - 1);
  return !(eigenvalues(0) > kSingularRatio * top) || !(top > 0.0);
}

// d objective / d P_nn for every row.
struct RowGradient {
  Eigen::VectorXd values;
  bool nonsmooth = false;
};

RowGradient row_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& p,
                         DesignObjective kind, double weight) {
  const Eigen::MatrixXd m = information(x, p);
  RowGradient out;
  out.values.resize(x.rows());
  if (kind == DesignObjective::TraceInverse) {
    // d Tr(M^-1) / d p_n = -||M^-1 x_n||^2
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      throw DomainError("information matrix is not positive definite");
    }
    const Eigen::MatrixXd z = llt.solve(x.transpose());
    out.values = -z.colwise().squaredNorm().transpose();
    return out;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd& mu = eig.eigenvalues();
  if (singular_spectrum(mu)) {
    throw DomainError("information matrix is singular");
  }
  const Eigen::MatrixXd proj = eig.eigenvectors().transpose() * x.transpose();
  double frob_sq = 0.0;
  for (Eigen::Index k = 0; k < mu.size(); ++k) frob_sq += 1.0 / (mu(k) * mu(k));
  const double frob = std::sqrt(frob_sq);
  const Eigen::VectorXd inv_cubed = mu.array().cube().inverse();
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    const Eigen::ArrayXd c = proj.col(n).array().square();
    double g = -(c * inv_cubed.array()).sum() / frob;
    g -= weight * c(0) / (mu(0) * mu(0));
    out.values(n) = g;
  }
  out.nonsmooth = mu.size() > 1 && (mu(1) - mu(0)) <= kTieTolerance * mu(1);
  return out;
}

// Chain rule through P(r). Rows of zero precision are allowed as long as
// X^T P X stays positive definite.
DesignGradient chain_gradient(const DesignProblem& p, std::span<const double> r,
                              double cap) {
  const Eigen::VectorXd prec = p.precisions(r);
  const RowGradient rows =
      row_gradient(p.design(), prec, p.objective_kind(), p.confidence_weight());
  DesignGradient out;
  out.nonsmooth = rows.nonsmooth;
  out.gradient.assign(p.sources(), 0.0);
  const auto map = p.precision_map();
  for (std::size_t n = 0; n < map.size(); ++n) {
    const double slope = map[n].tradeoff.precision_derivative_capped(
        std::max(r[map[n].source], 0.0), cap);
    out.gradient[map[n].source] += rows.values(static_cast<Eigen::Index>(n)) * slope;
  }
  return out;
}

}  // namespace

DesignProblem::DesignProblem(Eigen::MatrixXd design,
                             std::vector<PrecisionEntry> precision_map,
                             SimplexConstraint constraint,
                             DesignObjective objective, double confidence_weight)
    : design_(std::move(design)),
      map_(std::move(precision_map)),
      constraint_(std::move(constraint)),
      objective_(objective),
      confidence_weight_(confidence_weight) {
  require_full_rank(design_);
  if (map_.size() != rows()) {
    std::ostringstream os;
    os << "precision map has " << map_.size() << " entries for " << rows()
       << " design rows";
    throw DimensionMismatch(os.str());
  }
  if (!std::isfinite(confidence_weight_) || confidence_weight_ < 0.0) {
    throw DomainError("confidence weight must be finite and nonnegative");
  }
  for (const auto& entry : map_) {
    n_sources_ = std::max(n_sources_, entry.source + 1);
  }
  constraint_.validate(n_sources_);
}

Eigen::VectorXd DesignProblem::precisions(std::span<const double> r) const {
  if (r.size() != n_sources_) {
    throw DimensionMismatch("allocation length differs from source count");
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(map_.size()));
  for (std::size_t n = 0; n < map_.size(); ++n) {
    p(static_cast<Eigen::Index>(n)) =
        map_[n].tradeoff.precision(std::max(r[map_[n].source], 0.0));
  }
  return p;
}

double confidence_weight_for(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("delta must lie in (0, 1)");
  }
  return std::sqrt(std::log(1.0 / delta));
}

MvueEstimator::MvueEstimator(const Eigen::MatrixXd& design,
                             const Eigen::VectorXd& precision) {
  require_full_rank(design);
  if (precision.size() != design.rows()) {
    throw DimensionMismatch("precision length differs from design rows");
  }
  require_positive(precision);
  const Eigen::LLT<Eigen::MatrixXd> llt(information(design, precision));
  if (llt.info() != Eigen::Success) {
    throw RankDeficient("information matrix is not positive definite");
  }
  gain_ = llt.solve(design.transpose() * precision.asDiagonal());
  covariance_ = llt.solve(Eigen::MatrixXd::Identity(design.cols(), design.cols()));
}

Eigen::VectorXd MvueEstimator::estimate(const Eigen::VectorXd& y) const {
  if (y.size() != gain_.cols()) {
    throw DimensionMismatch("observation length differs from design rows");
  }
  return gain_ * y;
}

EstimateResult mvue_estimate(const Eigen::MatrixXd& design,
                             const Eigen::VectorXd& precision,
                             const Eigen::VectorXd& y) {
  const MvueEstimator estimator(design, precision);
  EstimateResult out;
  out.theta_hat = estimator.estimate(y);
  out.covariance = estimator.covariance();
  out.mse_predicted = out.covariance.trace();
  return out;
}

double design_objective(const Eigen::MatrixXd& design,
                        const Eigen::VectorXd& precision, DesignObjective kind,
                        double confidence_weight) {
  if (precision.size() != design.rows()) {
    throw DimensionMismatch("precision length differs from design rows");
  }
  for (Eigen::Index n = 0; n < precision.size(); ++n) {
    if (!(precision(n) >= 0.0)) throw DomainError("precisions must be nonnegative");
  }
  const Eigen::MatrixXd m = information(design, precision);
  if (kind == DesignObjective::TraceInverse) {
    // Tr(M^-1) = ||L^-1||_F^2 for M = L L^T.
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return kInf;
    const Eigen::MatrixXd l = llt.matrixL();
    if (!(l.diagonal().minCoeff() > std::sqrt(kSingularRatio) * l.diagonal().maxCoeff())) {
      return kInf;
    }
    const Eigen::MatrixXd linv = llt.matrixL().solve(
        Eigen::MatrixXd::Identity(design.cols(), design.cols()));
    return linv.squaredNorm();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (singular_spectrum(eig.eigenvalues())) return kInf;
  return tail_value(eig.eigenvalues(), confidence_weight);
}

double design_objective(const DesignProblem& p, std::span<const double> r) {
  return design_objective(p.design(), p.precisions(r), p.objective_kind(),
                          p.confidence_weight());
}

DesignGradient design_gradient(const DesignProblem& p, std::span<const double> r,
                               double cap) {
  require_positive(p.precisions(r));
  return chain_gradient(p, r, cap);
}

namespace {

// Projected subgradient with steps 1/k in budget-normalized coordinates,
// keeping the best iterate. Stops once the best value has improved by at
// most 1e-6 (relative) over the last 500 iterations.
SolverReport subgradient_phase(const DesignProblem& p, std::vector<double> start,
                               const SolverOptions& options,
                               std::size_t used_iterations) {
  constexpr std::size_t kWindow = 500;
  constexpr double kWindowTolerance = 1e-6;
  const SimplexConstraint& c = p.constraint();
  const double scale = c.budget;
  const SimplexConstraint unit = c.scaled(scale);
  const std::size_t n = start.size();

  std::vector<double> x(n), r(n), trial(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = start[i] / scale;
  auto to_r = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i) r[i] = v[i] * scale;
    return std::span<const double>(r);
  };

  SolverReport report;
  double best = design_objective(p, to_r(x));
  std::vector<double> best_x = x;
  std::deque<double> history{best};
  bool nonsmooth_seen = false;

  std::size_t k = 1;
  for (; used_iterations + k <= options.max_iterations; ++k) {
    const DesignGradient g = chain_gradient(p, to_r(x), options.gradient_cap);
    nonsmooth_seen = nonsmooth_seen || g.nonsmooth;
    double norm = 0.0;
    for (double gi : g.gradient) norm += gi * gi * scale * scale;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    const double step = 1.0 / (static_cast<double>(k) * norm);
    for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] - step * g.gradient[i] * scale;
    std::vector<double> next = project_simplex(trial, unit);
    // Keep iterates where every row precision stays positive.
    const double f = design_objective(p, to_r(next));
    if (std::isfinite(f)) {
      x.swap(next);
      if (f < best) {
        best = f;
        best_x = x;
      }
    }
    history.push_back(best);
    if (history.size() > kWindow + 1) history.pop_front();
    if (history.size() == kWindow + 1 &&
        history.front() - best <= kWindowTolerance * std::max(1.0, std::abs(best))) {
      report.converged = true;
      break;
    }
  }
  report.iterations = used_iterations + k;
  report.allocation.resize(n);
  for (std::size_t i = 0; i < n; ++i) report.allocation[i] = best_x[i] * scale;
  report.objective = best;
  // Distance to the projected-gradient fixed point at the best iterate.
  const DesignGradient g = chain_gradient(p, report.allocation, options.gradient_cap);
  for (std::size_t i = 0; i < n; ++i) trial[i] = best_x[i] - g.gradient[i] * scale;
  const auto proj = project_simplex(trial, unit);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (best_x[i] - proj[i]) * (best_x[i] - proj[i]);
  report.kkt_residual = std::sqrt(s);
  return report;
}

}  // namespace

SolverReport solve_design(const DesignProblem& p, const SolverOptions& options) {
  // Raised from the gradient callback once the operator norm reaches a kink;
  // the remaining iterations run as a subgradient method.
  struct KinkReached {
    std::vector<double> at;
  };
  const bool tail = p.objective_kind() == DesignObjective::TailBound;
  std::size_t evaluations = 0;
  SmoothObjective objective;
  objective.value = [&](std::span<const double> r) { return design_objective(p, r); };
  objective.gradient = [&](std::span<const double> r, std::span<double> out) {
    ++evaluations;
    const DesignGradient g = chain_gradient(p, r, options.gradient_cap);
    if (tail && g.nonsmooth) throw KinkReached{{r.begin(), r.end()}};
    std::copy(g.gradient.begin(), g.gradient.end(), out.begin());
  };
  const auto start = uniform_start(p.constraint(), p.sources());
  try {
    SolverReport report = minimize_projected(objective, p.constraint(), start, options);
    if (tail && !report.converged) {
      SolverReport sub =
          subgradient_phase(p, report.allocation, options, report.iterations);
      if (sub.objective <= report.objective) report = std::move(sub);
    }
    return report;
  } catch (const KinkReached& kink) {
    return subgradient_phase(p, kink.at, options, evaluations);
  }
}

double tail_bound_radius(const Eigen::MatrixXd& design,
                         const Eigen::VectorXd& precision, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("delta must lie in (0, 1)");
  }
  if (precision.size() != design.rows()) {
    throw DimensionMismatch("precision length differs from design rows");
  }
  require_positive(precision);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      information(design, precision), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& mu = eig.eigenvalues();
  if (singular_spectrum(mu)) return kInf;
  const double t = std::log(1.0 / delta);
  return 2.0 * tail_value(mu, 0.0) * std::sqrt(t) + 2.0 * t / mu(0);
}

double tail_bound_radius(const DesignProblem& p, std::span<const double> r,
                         double delta) {
  const ObservedDesign o = observed_design(p, r);
  return tail_bound_radius(o.design, o.precision, delta);
}

ObservedDesign observed_design(const DesignProblem& p, std::span<const double> r) {
  const Eigen::VectorXd all = p.precisions(r);
  ObservedDesign out;
  for (Eigen::Index n = 0; n < all.size(); ++n) {
    if (all(n) > 0.0) out.rows.push_back(static_cast<std::size_t>(n));
  }
  const auto m = static_cast<Eigen::Index>(out.rows.size());
  out.design.resize(m, p.design().cols());
  out.precision.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto n = static_cast<Eigen::Index>(out.rows[static_cast<std::size_t>(k)]);
    out.design.row(k) = p.design().row(n);
    out.precision(k) = all(n);
  }
  if (m == 0) throw RankDeficient("no design row has positive precision");
  return out;
}

DesignProblem block_design(const SupportProblem& p, DesignObjective objective,
                           double confidence_weight) {
  std::size_t rows = 0;
  for (const auto& s : p.sources()) rows += s.support_size();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                            static_cast<Eigen::Index>(p.dimension()));
  std::vector<PrecisionEntry> map;
  map.reserve(rows);
  std::size_t row = 0;
  const auto sources = p.sources();
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& support = sources[i].support();
    for (std::size_t k = 0; k < support.size(); ++k, ++row) {
      x(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(support[k])) = 1.0;
      map.push_back({i, sources[i].tradeoff_at(k)});
    }
  }
  return DesignProblem(std::move(x), std::move(map), p.constraint(), objective,
                       confidence_weight);
}

}  // namespace resalloc
