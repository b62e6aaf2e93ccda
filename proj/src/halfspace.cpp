#include "resalloc/halfspace.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "resalloc/errors.hpp"

namespace resalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBiasSlack = 1e-9;

std::vector<double> normalized(std::vector<double> c) {
  if (c.empty()) throw DimensionMismatch("election has no regions");
  double total = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!std::isfinite(c[i]) || c[i] < 0.0) {
      std::ostringstream os;
      os << "weight of region " << i << " must be finite and nonnegative, got " << c[i];
      throw DomainError(os.str());
    }
    total += c[i];
  }
  if (!(total > 0.0)) throw DomainError("region weights sum to zero");
  for (double& x : c) x /= total;
  return c;
}

void require_advantage(double t) {
  if (!std::isfinite(t) || t <= 0.0) {
    std::ostringstream os;
    os << "advantage t must be positive, got " << t;
    throw DomainError(os.str());
  }
}

void require_mode(const ElectionProblem& p, ElectionMode mode) {
  if (p.mode() != mode) {
    std::ostringstream os;
    os << "operation needs a " << to_string(mode) << " election, got "
       << to_string(p.mode());
    throw DomainError(os.str());
  }
}

void require_length(const ElectionProblem& p, std::span<const double> r) {
  if (r.size() != p.regions()) {
    throw DimensionMismatch("allocation length differs from region count");
  }
}

// sum_i w_i l_i(r_i) with weights c_i^power; zero weights skip the term.
double weighted_loss(const ElectionProblem& p, std::span<const double> r, int power) {
  require_length(p, r);
  const auto c = p.weights();
  const auto fns = p.loss_fns();
  double total = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == 0.0) continue;
    const double w = power == 1 ? c[i] : c[i] * c[i];
    total += w * fns[i].loss(std::max(r[i], 0.0));
  }
  return total;
}

void weighted_loss_gradient(const ElectionProblem& p, std::span<const double> r,
                            int power, double cap, std::span<double> out) {
  const auto c = p.weights();
  const auto fns = p.loss_fns();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double w = power == 1 ? c[i] : c[i] * c[i];
    out[i] = w == 0.0 ? 0.0 : w * fns[i].loss_derivative_capped(std::max(r[i], 0.0), cap);
  }
}

void copy_solver_fields(const SolverReport& s, BoundReport& out) {
  out.allocation = s.allocation;
  out.converged = s.converged;
  out.iterations = s.iterations;
  out.kkt_residual = s.kkt_residual;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

// Splits one CSV record; double-quoted fields may contain commas and "".
std::vector<std::string> split_csv(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur.push_back('"');
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) {
    std::ostringstream os;
    os << "line " << line_no << ": unterminated quoted field";
    throw ParseError(os.str());
  }
  fields.push_back(trim(cur));
  return fields;
}

double parse_number(const std::string& text, std::size_t line_no, const char* column) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    std::ostringstream os;
    os << "line " << line_no << ": column " << column << " is not a number: '"
       << text << "'";
    throw ParseError(os.str());
  }
  return value;
}

}  // namespace

std::string_view to_string(ElectionMode mode) {
  return mode == ElectionMode::Direct ? "direct" : "indirect";
}

ElectionProblem ElectionProblem::direct(std::vector<double> weights,
                                        std::vector<TradeoffFunction> variance_fns,
                                        double advantage,
                                        SimplexConstraint constraint) {
  ElectionProblem p;
  p.mode_ = ElectionMode::Direct;
  p.weights_ = normalized(std::move(weights));
  if (variance_fns.size() != p.weights_.size()) {
    throw DimensionMismatch("need one variance function per region");
  }
  require_advantage(advantage);
  constraint.validate(p.weights_.size());
  p.max_weight_ = *std::max_element(p.weights_.begin(), p.weights_.end());
  p.advantage_ = advantage;
  p.losses_ = std::move(variance_fns);
  p.constraint_ = std::move(constraint);
  return p;
}

ElectionProblem ElectionProblem::indirect(std::vector<double> weights,
                                          std::vector<double> margins,
                                          double advantage,
                                          SimplexConstraint constraint) {
  ElectionProblem p;
  p.mode_ = ElectionMode::Indirect;
  p.weights_ = normalized(std::move(weights));
  if (margins.size() != p.weights_.size()) {
    throw DimensionMismatch("need one margin per region");
  }
  require_advantage(advantage);
  constraint.validate(p.weights_.size());
  p.losses_.reserve(margins.size());
  for (std::size_t i = 0; i < margins.size(); ++i) {
    if (!(margins[i] > 0.0 && margins[i] <= 0.5)) {
      std::ostringstream os;
      os << "margin of region " << i << " must lie in (0, 1/2], got " << margins[i];
      throw DomainError(os.str());
    }
    p.losses_.push_back(TradeoffFunction::exp_margin_loss(margins[i]));
  }
  p.max_weight_ = *std::max_element(p.weights_.begin(), p.weights_.end());
  p.advantage_ = advantage;
  p.margins_ = std::move(margins);
  p.constraint_ = std::move(constraint);
  return p;
}

ElectionProblem ElectionProblem::with_budget(double budget) const {
  ElectionProblem p = *this;
  p.constraint_.budget = budget;
  p.constraint_.validate(regions());
  return p;
}

ElectionProblem ElectionProblem::with_advantage(double advantage) const {
  require_advantage(advantage);
  ElectionProblem p = *this;
  p.advantage_ = advantage;
  return p;
}

double direct_variance(const ElectionProblem& p, std::span<const double> r) {
  require_mode(p, ElectionMode::Direct);
  return weighted_loss(p, r, 2);
}

double direct_bound(const ElectionProblem& p, std::span<const double> r,
                    std::optional<double> t) {
  const double adv = t.value_or(p.advantage());
  require_advantage(adv);
  const double v = direct_variance(p, r);
  return std::exp(-(adv * adv / 2.0) / (v + adv * p.max_weight() / 3.0));
}

BoundReport solve_direct(const ElectionProblem& p, const SolverOptions& options) {
  require_mode(p, ElectionMode::Direct);
  SmoothObjective objective;
  objective.value = [&](std::span<const double> r) { return weighted_loss(p, r, 2); };
  objective.gradient = [&](std::span<const double> r, std::span<double> g) {
    weighted_loss_gradient(p, r, 2, options.gradient_cap, g);
  };
  const SolverReport s = minimize_projected(
      objective, p.constraint(), uniform_start(p.constraint(), p.regions()), options);
  BoundReport out;
  copy_solver_fields(s, out);
  out.variance_term = s.objective;
  out.objective = s.objective;
  out.bound_value = direct_bound(p, out.allocation);
  return out;
}

double indirect_bias(const ElectionProblem& p, std::span<const double> r) {
  require_mode(p, ElectionMode::Indirect);
  return weighted_loss(p, r, 1);
}

double indirect_gamma(const ElectionProblem& p, std::span<const double> r) {
  require_mode(p, ElectionMode::Indirect);
  return weighted_loss(p, r, 2);
}

double indirect_objective(const ElectionProblem& p, std::span<const double> r) {
  const double gap = p.advantage() - indirect_bias(p, r);
  if (!(gap > 0.0)) return kInf;
  const double gamma = indirect_gamma(p, r);
  return 2.0 * gamma / (gap * gap) + (2.0 / 3.0) * p.max_weight() / gap;
}

double indirect_bound(const ElectionProblem& p, std::span<const double> r) {
  const double gap = p.advantage() - indirect_bias(p, r);
  if (!(gap > 0.0)) return 1.0;
  const double gamma = indirect_gamma(p, r);
  return std::exp(-(gap * gap / 2.0) / (gamma + p.max_weight() * gap / 3.0));
}

BoundReport solve_indirect(const ElectionProblem& p, const SolverOptions& options) {
  require_mode(p, ElectionMode::Indirect);
  const std::size_t n = p.regions();
  const double t = p.advantage();

  // Feasibility: the smallest bias reachable under the constraint.
  SmoothObjective bias;
  bias.value = [&](std::span<const double> r) { return weighted_loss(p, r, 1); };
  bias.gradient = [&](std::span<const double> r, std::span<double> g) {
    weighted_loss_gradient(p, r, 1, options.gradient_cap, g);
  };
  const SolverReport least =
      minimize_projected(bias, p.constraint(), uniform_start(p.constraint(), n), options);

  BoundReport out;
  out.min_bias = least.objective;
  if (!(least.objective < t - kBiasSlack)) {
    copy_solver_fields(least, out);
    out.feasible = false;
    out.bias = least.objective;
    out.variance_term = indirect_gamma(p, out.allocation);
    out.objective = kInf;
    out.bound_value = 1.0;
    return out;
  }

  // Trial points outside beta < t - slack evaluate to +infinity, which the
  // line search rejects, so every accepted iterate stays feasible.
  SmoothObjective bound;
  bound.value = [&](std::span<const double> r) {
    const double gap = t - weighted_loss(p, r, 1);
    if (!(gap > kBiasSlack)) return kInf;
    const double gamma = weighted_loss(p, r, 2);
    return 2.0 * gamma / (gap * gap) + (2.0 / 3.0) * p.max_weight() / gap;
  };
  std::vector<double> d_beta(n), d_gamma(n);
  bound.gradient = [&](std::span<const double> r, std::span<double> g) {
    const double gap = t - weighted_loss(p, r, 1);
    const double gamma = weighted_loss(p, r, 2);
    weighted_loss_gradient(p, r, 1, options.gradient_cap, d_beta);
    weighted_loss_gradient(p, r, 2, options.gradient_cap, d_gamma);
    const double via_beta =
        4.0 * gamma / (gap * gap * gap) + (2.0 / 3.0) * p.max_weight() / (gap * gap);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = 2.0 * d_gamma[i] / (gap * gap) + via_beta * d_beta[i];
    }
  };
  const SolverReport s = minimize_projected(bound, p.constraint(), least.allocation, options);
  copy_solver_fields(s, out);
  out.iterations += least.iterations;
  out.objective = s.objective;
  out.bias = indirect_bias(p, out.allocation);
  out.variance_term = indirect_gamma(p, out.allocation);
  out.bound_value = indirect_bound(p, out.allocation);
  return out;
}

std::vector<BoundReport> regime_study(const ElectionProblem& p,
                                      std::span<const double> budgets,
                                      const SolverOptions& options) {
  std::vector<BoundReport> out;
  out.reserve(budgets.size());
  for (std::size_t k = 0; k < budgets.size(); ++k) {
    if (k > 0 && budgets[k] < budgets[k - 1]) {
      throw DomainError("regime study budgets must be ascending");
    }
    const ElectionProblem at = p.with_budget(budgets[k]);
    out.push_back(at.mode() == ElectionMode::Indirect ? solve_indirect(at, options)
                                                      : solve_direct(at, options));
  }
  return out;
}

RegionTable load_regions_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open region file " + path);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    header = split_csv(line, line_no);
    break;
  }
  if (header.empty()) throw ParseError(path + ": missing header row");

  auto column = [&](const char* name) {
    for (std::size_t k = 0; k < header.size(); ++k) {
      std::string h = header[k];
      std::transform(h.begin(), h.end(), h.begin(),
                     [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
      if (h == name) return k;
    }
    throw SchemaError(std::string("$.header"),
                      std::string("missing column '") + name + "'");
  };
  const std::size_t c_region = column("region");
  const std::size_t c_weight = column("weight");
  const std::size_t c_margin = column("margin");

  RegionTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line, line_no);
    if (fields.size() != header.size()) {
      std::ostringstream os;
      os << "line " << line_no << ": expected " << header.size() << " fields, got "
         << fields.size();
      throw ParseError(os.str());
    }
    table.names.push_back(fields[c_region]);
    table.weights.push_back(parse_number(fields[c_weight], line_no, "weight"));
    table.margins.push_back(parse_number(fields[c_margin], line_no, "margin"));
  }
  if (table.names.empty()) throw SchemaError("$.rows", "region file has no data rows");
  return table;
}

}  // namespace resalloc
