#include "resalloc/solver_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "resalloc/errors.hpp"

namespace resalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_budget(double budget) {
  if (!std::isfinite(budget) || budget <= 0.0) {
    std::ostringstream os;
    os << "budget must be positive and finite, got " << budget;
    throw DomainError(os.str());
  }
}

// Sort-and-threshold projection onto { r >= 0, sum r <= budget }.
std::vector<double> project_pure(std::span<const double> v, double budget) {
  std::vector<double> out(v.size());
  double positive_sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(v[i], 0.0);
    positive_sum += out[i];
  }
  if (positive_sum <= budget) return out;

  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double prefix = 0.0;
  double threshold = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    prefix += sorted[j];
    const double candidate = (prefix - budget) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) threshold = candidate;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(v[i] - threshold, 0.0);
  }
  return out;
}

// Projection onto { l <= r <= u, sum r <= budget } via the threshold tau
// solving sum clamp(v - tau, l, u) = budget.
std::vector<double> project_box(std::span<const double> v,
                                const SimplexConstraint& c) {
  const std::size_t n = v.size();
  auto clamped_sum = [&](double tau) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += std::clamp(v[i] - tau, c.lower_at(i), c.upper_at(i));
    }
    return s;
  };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(v[i], c.lower_at(i), c.upper_at(i));
  }
  if (clamped_sum(0.0) <= c.budget) return out;

  std::vector<double> breaks;
  breaks.reserve(2 * n + 1);
  breaks.push_back(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double from_upper = v[i] - c.upper_at(i);
    const double from_lower = v[i] - c.lower_at(i);
    if (std::isfinite(from_upper) && from_upper > 0.0) breaks.push_back(from_upper);
    if (from_lower > 0.0) breaks.push_back(from_lower);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  // Largest breakpoint whose clamped sum still exceeds the budget.
  std::size_t lo = 0;
  std::size_t hi = breaks.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (clamped_sum(breaks[mid]) > c.budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double tau_lo = breaks[lo];
  const double tau_hi = hi < breaks.size() ? breaks[hi] : kInf;
  const double g_lo = clamped_sum(tau_lo);
  std::size_t active = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] - c.upper_at(i) <= tau_lo && v[i] - c.lower_at(i) >= tau_hi) {
      ++active;
    }
  }
  double tau = tau_lo;
  if (active > 0) {
    tau = tau_lo + (g_lo - c.budget) / static_cast<double>(active);
  }
  if (std::isfinite(tau_hi)) tau = std::min(tau, tau_hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::clamp(v[i] - tau, c.lower_at(i), c.upper_at(i));
  }
  return out;
}

// Projection in the metric sum (z_i - v_i)^2 / w_i onto { l <= r <= u,
// sum r <= budget }: z_i = clamp(v_i - tau * w_i, l_i, u_i).
std::vector<double> project_weighted(std::span<const double> v,
                                     std::span<const double> w,
                                     const SimplexConstraint& c) {
  const std::size_t n = v.size();
  auto at = [&](std::size_t i, double tau) {
    return std::clamp(v[i] - tau * w[i], c.lower_at(i), c.upper_at(i));
  };
  auto clamped_sum = [&](double tau) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += at(i, tau);
    return s;
  };
  std::vector<double> out(n);
  if (clamped_sum(0.0) <= c.budget) {
    for (std::size_t i = 0; i < n; ++i) out[i] = at(i, 0.0);
    return out;
  }
  std::vector<double> breaks{0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double from_upper = (v[i] - c.upper_at(i)) / w[i];
    const double from_lower = (v[i] - c.lower_at(i)) / w[i];
    if (std::isfinite(from_upper) && from_upper > 0.0) breaks.push_back(from_upper);
    if (from_lower > 0.0) breaks.push_back(from_lower);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::size_t lo = 0;
  std::size_t hi = breaks.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (clamped_sum(breaks[mid]) > c.budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double tau_lo = breaks[lo];
  const double tau_hi = hi < breaks.size() ? breaks[hi] : kInf;
  double slope = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if ((v[i] - c.upper_at(i)) / w[i] <= tau_lo &&
        (v[i] - c.lower_at(i)) / w[i] >= tau_hi) {
      slope += w[i];
    }
  }
  double tau = tau_lo;
  if (slope > 0.0) tau = tau_lo + (clamped_sum(tau_lo) - c.budget) / slope;
  if (std::isfinite(tau_hi)) tau = std::min(tau, tau_hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = at(i, tau);
  return out;
}

// Per-coordinate secant curvature y_i / s_i, falling back to the scalar
// Barzilai-Borwein value s.y / s.s where the secant is uninformative.
void update_curvature(std::span<const double> x, std::span<const double> x_new,
                      std::span<const double> g, std::span<const double> g_new,
                      std::span<double> h) {
  constexpr double kMin = 1e-12;
  constexpr double kMax = 1e12;
  double sy = 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double s = x_new[i] - x[i];
    sy += s * (g_new[i] - g[i]);
    ss += s * s;
  }
  const double scalar = ss > 0.0 && sy > 0.0 ? sy / ss : 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double s = x_new[i] - x[i];
    const double secant = s != 0.0 ? (g_new[i] - g[i]) / s : 0.0;
    if (std::isfinite(secant) && secant > 0.0) {
      h[i] = std::clamp(secant, kMin, kMax);
    } else if (scalar > 0.0) {
      h[i] = std::clamp(scalar, kMin, kMax);
    }
  }
}

}  // namespace

double SimplexConstraint::lower_at(std::size_t i) const {
  return lower.empty() ? 0.0 : lower[i];
}

double SimplexConstraint::upper_at(std::size_t i) const {
  return upper.empty() ? kInf : upper[i];
}

void SimplexConstraint::validate(std::size_t n) const {
  require_budget(budget);
  if (n == 0) throw DimensionMismatch("allocation problem has no sources");
  if (!lower.empty() && lower.size() != n) {
    throw DimensionMismatch("lower bound length differs from source count");
  }
  if (!upper.empty() && upper.size() != n) {
    throw DimensionMismatch("upper bound length differs from source count");
  }
  double lower_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = lower_at(i);
    const double u = upper_at(i);
    if (!std::isfinite(l) || l < 0.0) {
      throw DomainError("lower bounds must be finite and nonnegative");
    }
    if (std::isnan(u) || u < l) {
      std::ostringstream os;
      os << "bounds of source " << i << " are inverted";
      throw InfeasibleConstraint(os.str());
    }
    lower_sum += l;
  }
  if (lower_sum > budget) {
    std::ostringstream os;
    os << "lower bounds sum to " << lower_sum << " which exceeds the budget "
       << budget;
    throw InfeasibleConstraint(os.str());
  }
}

bool SimplexConstraint::contains(std::span<const double> r, double tol) const {
  const double slack = tol * std::max(1.0, budget);
  double sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] < lower_at(i) - slack || r[i] > upper_at(i) + slack) return false;
    sum += r[i];
  }
  return sum <= budget + slack;
}

SimplexConstraint SimplexConstraint::scaled(double factor) const {
  SimplexConstraint out{budget / factor, lower, upper};
  for (double& l : out.lower) l /= factor;
  for (double& u : out.upper) u /= factor;
  return out;
}

std::vector<double> project_simplex(std::span<const double> v,
                                    const SimplexConstraint& c) {
  c.validate(v.size());
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError("cannot project a non-finite point");
  }
  return c.has_box() ? project_box(v, c) : project_pure(v, c.budget);
}

std::vector<double> uniform_start(const SimplexConstraint& c, std::size_t n) {
  std::vector<double> v(n, c.budget / static_cast<double>(n));
  return project_simplex(v, c);
}

SolverReport minimize_projected(const SmoothObjective& objective,
                                const SimplexConstraint& c,
                                std::vector<double> start,
                                const SolverOptions& options) {
  const std::size_t n = start.size();
  c.validate(n);
  const double scale = c.budget;
  const SimplexConstraint unit = c.scaled(scale);

  std::vector<double> r_buf(n);
  auto to_resources = [&](std::span<const double> x) -> std::span<const double> {
    for (std::size_t i = 0; i < n; ++i) r_buf[i] = x[i] * scale;
    return r_buf;
  };
  auto value = [&](std::span<const double> x) {
    const double f = objective.value(to_resources(x));
    return std::isnan(f) ? kInf : f;
  };
  auto gradient = [&](std::span<const double> x, std::span<double> g) {
    objective.gradient(to_resources(x), g);
    for (double& gi : g) {
      if (std::isnan(gi)) gi = 0.0;
      gi = std::clamp(gi * scale, -options.gradient_cap, options.gradient_cap);
    }
  };
  // A capped derivative at the lower bound points into the interior with
  // unbounded slope; such coordinates are left out of the residual and the
  // Armijo model.
  auto capped = [&](std::span<const double> g, std::size_t i) {
    return std::abs(g[i]) >= options.gradient_cap;
  };
  auto stationarity = [&](std::span<const double> x, std::span<const double> g) {
    std::vector<double> trial(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = unit.lower_at(i);
      trial[i] = capped(g, i) && x[i] <= lo ? lo - 4.0 * (options.gradient_cap + 1.0)
                                            : x[i] - g[i];
    }
    const auto p = project_simplex(trial, unit);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (x[i] - p[i]) * (x[i] - p[i]);
    return std::sqrt(s);
  };

  for (double& s : start) s /= scale;
  std::vector<double> x = project_simplex(start, unit);
  double f = value(x);
  if (!std::isfinite(f)) {
    throw DomainError("projected gradient started at a point of infinite objective");
  }
  std::vector<double> g(n), g_new(n), x_new(n), trial(n);
  gradient(x, g);

  SolverReport report;
  std::size_t stalled = 0;
  // Diagonal curvature estimates; the step in coordinate i is 1 / h[i].
  std::vector<double> h(n, 1.0 / options.initial_step);
  std::vector<double> w(n), z(n), d(n), best_x;

  double residual = stationarity(x, g);
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    report.iterations = it + 1;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 1.0 / h[i];
      trial[i] = x[i] - w[i] * g[i];
    }
    z = project_weighted(trial, w, unit);
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = z[i] - x[i];
      if (!capped(g, i)) slope += g[i] * d[i];
    }
    slope = std::min(slope, 0.0);

    // Below this difference two objective values are indistinguishable.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                         std::max(1.0, std::abs(f));
    bool accepted = false;
    bool have_new_gradient = false;
    double f_new = f;
    double residual_new = residual;
    // A capped boundary gradient overstates the attainable decrease, so the
    // Armijo test can fail although some trial strictly improves f.
    double best_f = f - noise;
    best_x.clear();
    double lambda = 1.0;
    for (int backtrack = 0; backtrack < 80; ++backtrack, lambda *= 0.5) {
      if (backtrack == 0) {
        x_new = z;
      } else {
        for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + lambda * d[i];
      }
      if (x_new == x) break;
      f_new = value(x_new);
      if (f_new < best_f) {
        best_f = f_new;
        best_x = x_new;
      }
      if (std::isfinite(f_new) &&
          (slope < 0.0 ? f_new <= f + options.armijo * lambda * slope : f_new < f)) {
        accepted = true;
        break;
      }
      // Sufficient decrease is unresolvable at rounding level; settle for a
      // step that does not raise the objective and improves stationarity.
      if (std::isfinite(f_new) && f_new - f <= noise) {
        gradient(x_new, g_new);
        residual_new = stationarity(x_new, g_new);
        if (residual_new < residual) {
          accepted = true;
          have_new_gradient = true;
          break;
        }
      }
    }
    if (!accepted && !best_x.empty()) {
      x_new = best_x;
      f_new = best_f;
      accepted = true;
    }
    if (!accepted) {
      // No representable descent step: x is numerically stationary.
      report.kkt_residual = residual;
      report.converged = report.kkt_residual <= options.gradient_tolerance;
      break;
    }

    if (!have_new_gradient) {
      gradient(x_new, g_new);
      residual_new = stationarity(x_new, g_new);
    }
    update_curvature(x, x_new, g, g_new, h);

    const double change = std::abs(f_new - f);
    const double reference = std::abs(f_new);
    const bool flat = change <= options.objective_tolerance * reference ||
                      change == 0.0;
    stalled = flat ? stalled + 1 : 0;

    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    residual = residual_new;
    report.kkt_residual = residual;

    if (stalled >= options.stall_window && residual <= options.gradient_tolerance) {
      report.converged = true;
      break;
    }
  }
  report.kkt_residual = residual;

  report.allocation.resize(n);
  for (std::size_t i = 0; i < n; ++i) report.allocation[i] = x[i] * scale;
  report.objective = f;
  return report;
}

double total_precision(std::span<const TradeoffFunction> fs,
                       std::span<const double> r) {
  if (fs.size() != r.size()) {
    throw DimensionMismatch("allocation length differs from source count");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < fs.size(); ++i) total += fs[i].precision(r[i]);
  return total;
}

SolverReport solve_simplex_generic(std::span<const TradeoffFunction> fs,
                                   const SimplexConstraint& c,
                                   const SolverOptions& options) {
  c.validate(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (!fs[i].has_concave_precision()) {
      std::ostringstream os;
      os << "source " << i << " uses " << to_string(fs[i].kind())
         << ", whose precision is not concave";
      throw DomainError(os.str());
    }
  }
  SmoothObjective objective;
  objective.value = [&](std::span<const double> r) {
    return -total_precision(fs, r);
  };
  objective.gradient = [&](std::span<const double> r, std::span<double> g) {
    for (std::size_t i = 0; i < fs.size(); ++i) {
      g[i] = -fs[i].precision_derivative_capped(std::max(r[i], 0.0),
                                                options.gradient_cap);
    }
  };
  SolverReport report =
      minimize_projected(objective, c, uniform_start(c, fs.size()), options);
  report.objective = -report.objective;
  return report;
}

std::vector<double> solve_best_source(std::span<const double> sigma_sq,
                                      double budget) {
  require_budget(budget);
  if (sigma_sq.empty()) throw DimensionMismatch("no sources");
  for (double s : sigma_sq) {
    if (!std::isfinite(s) || s <= 0.0) throw DomainError("sigma_sq must be positive");
  }
  const auto best = std::min_element(sigma_sq.begin(), sigma_sq.end());
  std::vector<double> r(sigma_sq.size(), 0.0);
  r[static_cast<std::size_t>(best - sigma_sq.begin())] = budget;
  return r;
}

std::vector<double> solve_power_kkt(std::span<const double> sigma_sq,
                                    double alpha, double budget) {
  require_budget(budget);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw DomainError("alpha must be positive");
  }
  if (alpha >= 1.0) return solve_best_source(sigma_sq, budget);
  if (sigma_sq.empty()) throw DimensionMismatch("no sources");

  // Weights (sigma_i^2/alpha)^(1/(alpha-1)) evaluated in log space.
  std::vector<double> logw(sigma_sq.size());
  for (std::size_t i = 0; i < sigma_sq.size(); ++i) {
    if (!std::isfinite(sigma_sq[i]) || sigma_sq[i] <= 0.0) {
      throw DomainError("sigma_sq must be positive");
    }
    logw[i] = std::log(sigma_sq[i] / alpha) / (alpha - 1.0);
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  std::vector<double> r(logw.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = std::exp(logw[i] - top);
    total += r[i];
  }
  for (double& x : r) x = budget * x / total;
  // Put the rounding residue on the largest entry so the sum is exact.
  const auto largest = std::max_element(r.begin(), r.end());
  const double sum = std::accumulate(r.begin(), r.end(), 0.0);
  *largest += budget - sum;
  return r;
}

WaterFillingResult solve_water_filling(std::span<const double> sigma_sq,
                                       std::span<const double> a,
                                       double budget) {
  require_budget(budget);
  if (a.empty()) throw DimensionMismatch("no sources");
  if (!sigma_sq.empty() && sigma_sq.size() != a.size()) {
    throw DimensionMismatch("sigma_sq and a differ in length");
  }
  for (double s : sigma_sq) {
    if (!std::isfinite(s) || s <= 0.0) throw DomainError("sigma_sq must be positive");
  }
  for (double x : a) {
    if (!std::isfinite(x) || x <= 0.0) throw DomainError("a must be positive");
  }
  std::vector<double> sorted(a.begin(), a.end());
  std::sort(sorted.begin(), sorted.end());

  // With k active channels the level is (1 + sum of the k smallest a) / k;
  // the right k is the largest one whose level clears a_k.
  double prefix = 0.0;
  double level = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    prefix += sorted[k];
    const double candidate = (1.0 + prefix) / static_cast<double>(k + 1);
    if (candidate > sorted[k]) level = candidate;
    else break;
  }
  WaterFillingResult out;
  out.level = level;
  out.allocation.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.allocation[i] = budget * std::max(0.0, level - a[i]);
  }
  return out;
}

}  // namespace resalloc
