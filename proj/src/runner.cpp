#include "resalloc/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "resalloc/aggregation.hpp"
#include "resalloc/errors.hpp"

namespace resalloc {

namespace {

using nlohmann::json;

// Non-finite doubles have no JSON form; emit them as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json nums(std::span<const double> v) {
  json out = json::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

json header(const Scenario& s) {
  json out;
  out["kind"] = s.kind;
  if (s.metadata.contains("name")) out["name"] = s.metadata["name"];
  return out;
}

void solver_fields(json& out, const SolverReport& r) {
  out["allocation"] = nums(r.allocation);
  out["objective"] = num(r.objective);
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  out["kkt_residual"] = num(r.kkt_residual);
}

int status_from(json& out, bool converged) {
  out["status"] = converged ? "converged" : "not_converged";
  return converged ? exit_code::kOk : exit_code::kNotConverged;
}

// Closed-form optimum for homogeneous simplex families without box bounds.
std::optional<json> closed_form(const SimplexScenario& s) {
  if (s.constraint.has_box()) return std::nullopt;
  const auto& fs = s.tradeoffs;
  const TradeoffKind kind = fs.front().kind();
  if (!std::all_of(fs.begin(), fs.end(), [&](const auto& f) { return f.kind() == kind; })) {
    return std::nullopt;
  }
  std::vector<double> sigma_sq(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) sigma_sq[i] = fs[i].sigma_sq();
  std::vector<double> r;
  std::string rule;
  if (kind == TradeoffKind::LinearPrecision) {
    r = solve_best_source(sigma_sq, s.constraint.budget);
    rule = "best_source";
  } else if (kind == TradeoffKind::PowerPrecision) {
    const double alpha = fs.front().alpha();
    if (!std::all_of(fs.begin(), fs.end(), [&](const auto& f) { return f.alpha() == alpha; })) {
      return std::nullopt;
    }
    r = solve_power_kkt(sigma_sq, alpha, s.constraint.budget);
    rule = "power_kkt";
  } else if (kind == TradeoffKind::LogChannelPrecision) {
    std::vector<double> a(fs.size());
    for (std::size_t i = 0; i < fs.size(); ++i) {
      if (fs[i].budget_ref() != s.constraint.budget) return std::nullopt;
      a[i] = fs[i].a();
    }
    r = solve_water_filling(sigma_sq, a, s.constraint.budget).allocation;
    rule = "water_filling";
  } else {
    return std::nullopt;
  }
  json out;
  out["rule"] = rule;
  out["allocation"] = nums(r);
  out["objective"] = num(total_precision(fs, r));
  return out;
}

json region_rows(const ElectionScenario& e, std::span<const double> r, double budget) {
  const auto c = e.problem.weights();
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return r[a] > r[b]; });
  json rows = json::array();
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    json row;
    row["rank"] = k + 1;
    row["region"] = e.names[i];
    row["weight"] = num(c[i]);
    if (e.problem.mode() == ElectionMode::Indirect) row["margin"] = num(e.problem.margins()[i]);
    row["allocation"] = num(r[i]);
    row["share"] = num(r[i] / budget);
    rows.push_back(row);
  }
  return rows;
}

// Fills the report of one election solve; returns its exit code.
int election_fields(json& out, const ElectionScenario& e, const ElectionProblem& p,
                    const BoundReport& b) {
  const double budget = p.constraint().budget;
  out["budget"] = num(budget);
  out["advantage"] = num(p.advantage());
  if (p.mode() == ElectionMode::Indirect && !b.feasible) {
    // Only the feasibility analysis is reported; there is no solver result.
    out["status"] = "infeasible";
    out["feasible"] = false;
    out["min_bias"] = num(b.min_bias);
    out["min_bias_allocation"] = nums(b.allocation);
    return exit_code::kInfeasible;
  }
  out["allocation"] = nums(b.allocation);
  out["objective"] = num(b.objective);
  out["bound"] = num(b.bound_value);
  out["variance_term"] = num(b.variance_term);
  if (p.mode() == ElectionMode::Indirect) {
    out["feasible"] = true;
    out["bias"] = num(b.bias);
    out["min_bias"] = num(b.min_bias);
  }
  out["iterations"] = b.iterations;
  out["converged"] = b.converged;
  out["kkt_residual"] = num(b.kkt_residual);
  out["regions"] = region_rows(e, b.allocation, budget);
  return status_from(out, b.converged);
}

int worse(int a, int b) {
  auto rank = [](int code) {
    switch (code) {
      case exit_code::kOk: return 0;
      case exit_code::kNotConverged: return 1;
      case exit_code::kInfeasible: return 2;
      default: return 3;
    }
  };
  return rank(a) >= rank(b) ? a : b;
}

BoundReport solve_election(const ElectionProblem& p, const SolverOptions& o) {
  return p.mode() == ElectionMode::Indirect ? solve_indirect(p, o) : solve_direct(p, o);
}

RunResult run_aggregate(const Scenario& s, const AggregateScenario& a) {
  RunResult out;
  out.result = header(s);
  json& r = out.result;
  if (!a.supported) {
    const AggregationWeights w = optimal_weights_single(a.losses);
    std::vector<double> weights(a.losses.size(), 0.0);
    for (const auto& e : w.rows[0]) weights[e.source] = e.weight;
    r["weights"] = nums(weights);
    r["total_loss"] = num(w.total_loss);
    std::vector<double> uniform(a.losses.size(), 1.0 / static_cast<double>(a.losses.size()));
    r["uniform_loss"] = num(weighted_loss(uniform, a.losses));
  } else {
    const auto& p = *a.supported;
    const AggregationWeights w = optimal_weights_supported(p.sources(), a.allocation, p.dimension());
    json rows = json::array();
    for (std::size_t j = 0; j < w.dimension(); ++j) {
      json row = json::array();
      for (const auto& e : w.rows[j]) {
        row.push_back({{"source", e.source + 1}, {"weight", num(e.weight)}});
      }
      rows.push_back(row);
    }
    r["weights"] = rows;
    r["per_coordinate_loss"] = nums(w.per_coord_loss);
    r["total_loss"] = num(w.total_loss);
    if (!a.estimates.empty()) {
      std::vector<Support> supports;
      for (const auto& src : p.sources()) supports.push_back(src.support());
      r["estimate"] = nums(aggregate_estimates(a.estimates, supports, w));
    }
  }
  r["status"] = "ok";
  out.exit_code = exit_code::kOk;
  return out;
}

RunResult run_scenario(const Scenario& s, const SolverOptions& o) {
  RunResult out;
  out.result = header(s);
  json& r = out.result;

  if (const auto* a = std::get_if<AggregateScenario>(&s.body)) {
    return run_aggregate(s, *a);
  }
  if (const auto* x = std::get_if<SimplexScenario>(&s.body)) {
    const SolverReport rep = solve_simplex_generic(x->tradeoffs, x->constraint, o);
    solver_fields(r, rep);
    r["budget"] = num(x->constraint.budget);
    if (auto cf = closed_form(*x)) r["closed_form"] = *cf;
    out.exit_code = status_from(r, rep.converged);
    return out;
  }
  if (const auto* x = std::get_if<AssignmentScenario>(&s.body)) {
    AssignmentProblem p;
    p.sense = x->sense;
    p.q_matrix = x->sense == Sense::Maximize ? precision_matrix(x->tradeoffs, x->resources)
                                             : loss_matrix(x->tradeoffs, x->resources);
    if (!p.q_matrix.allFinite()) {
      throw SemanticError("$.resources",
                          "a zero resource gives infinite loss; use positive resources");
    }
    const AssignmentResult res = solve_assignment(p);
    json perm = json::array();
    std::vector<double> assigned;
    for (std::size_t i = 0; i < res.permutation.size(); ++i) {
      perm.push_back(res.permutation[i] + 1);
      assigned.push_back(x->resources[res.permutation[i]]);
    }
    r["sense"] = x->sense == Sense::Maximize ? "maximize" : "minimize";
    r["permutation"] = perm;
    r["allocation"] = nums(assigned);
    r["objective"] = num(res.objective);
    r["status"] = "ok";
    out.exit_code = exit_code::kOk;
    return out;
  }
  if (const auto* x = std::get_if<SupportScenario>(&s.body)) {
    const SolverReport rep = solve_support(x->problem, o);
    solver_fields(r, rep);
    r["budget"] = num(x->problem.constraint().budget);
    r["coordinate_losses"] = nums(rep.component_losses);
    out.exit_code = status_from(r, rep.converged);
    return out;
  }
  if (const auto* x = std::get_if<DesignScenario>(&s.body)) {
    const SolverReport rep = solve_design(x->problem, o);
    solver_fields(r, rep);
    r["budget"] = num(x->problem.constraint().budget);
    r["objective_kind"] = x->problem.objective_kind() == DesignObjective::TraceInverse
                              ? "trace_inverse"
                              : "tail_bound";
    const Eigen::VectorXd prec = x->problem.precisions(rep.allocation);
    r["mse"] = num(design_objective(x->problem.design(), prec,
                                    DesignObjective::TraceInverse, 0.0));
    r["delta"] = num(x->delta);
    r["tail_radius"] = num(tail_bound_radius(x->problem, rep.allocation, x->delta));
    out.exit_code = status_from(r, rep.converged);
    return out;
  }
  const auto& e = std::get<ElectionScenario>(s.body);
  r["mode"] = std::string(to_string(e.problem.mode()));
  if (e.budgets.empty()) {
    out.exit_code = election_fields(r, e, e.problem, solve_election(e.problem, o));
    return out;
  }
  json studies = json::array();
  int code = exit_code::kOk;
  const auto reports = regime_study(e.problem, e.budgets, o);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    json one;
    code = worse(code, election_fields(one, e, e.problem.with_budget(e.budgets[k]), reports[k]));
    studies.push_back(one);
  }
  r["studies"] = studies;
  r["status"] = code == exit_code::kOk          ? "converged"
                : code == exit_code::kInfeasible ? "infeasible"
                                                 : "not_converged";
  out.exit_code = code;
  return out;
}

json report_json(const SimulationReport& s, const std::string& label) {
  json out;
  out["check"] = s.check;
  out["label"] = label;
  out["empirical_risk"] = num(s.empirical_risk);
  out["predicted_risk"] = num(s.predicted_risk);
  out["std_error"] = num(s.std_error);
  out["one_sided"] = s.one_sided;
  out["pass"] = s.pass;
  if (s.advisory) out["advisory"] = true;
  out["trials"] = s.trials;
  if (s.check == "tail") out["delta"] = num(s.delta);
  if (!s.coordinate_mean.empty()) out["unbiased"] = coordinates_unbiased(s);
  return out;
}

// Total losses l_i(r_i) of full-support sources at the given resources.
std::vector<double> losses_at(std::span<const TradeoffFunction> fs, std::span<const double> r) {
  std::vector<double> out(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) out[i] = fs[i].loss(std::max(r[i], 0.0));
  return out;
}

}  // namespace

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const InputError*>(&e)) return exit_code::kInput;
  if (dynamic_cast<const ParseError*>(&e)) return exit_code::kSyntax;
  if (dynamic_cast<const SchemaError*>(&e)) return exit_code::kSchema;
  if (dynamic_cast<const SemanticError*>(&e)) return exit_code::kSemantic;
  if (dynamic_cast<const InfeasibleConstraint*>(&e)) return exit_code::kInfeasible;
  return exit_code::kFailure;
}

RunResult run(const Scenario& scenario, const SolverOptions& options) {
  return run_scenario(scenario, options);
}

RunResult simulate(const Scenario& scenario, const SolverOptions& options,
                   const SimulationSpec& spec) {
  RunResult solved = run_scenario(scenario, options);
  if (solved.exit_code == exit_code::kInfeasible) return solved;

  std::vector<std::pair<std::string, SimulationReport>> checks;
  const json& res = solved.result;
  auto allocation = [&] {
    std::vector<double> r;
    for (const auto& v : res.at("allocation")) r.push_back(v.is_null() ? 0.0 : v.get<double>());
    return r;
  };

  if (const auto* a = std::get_if<AggregateScenario>(&scenario.body)) {
    if (!a->supported) {
      checks.emplace_back("optimal weights",
                          simulate_mse(a->losses, a->theta, WeightRule::Optimal, spec));
      const bool all_finite = std::all_of(a->losses.begin(), a->losses.end(),
                                          [](double l) { return std::isfinite(l); });
      if (all_finite) {
        checks.emplace_back("uniform weights",
                            simulate_mse(a->losses, a->theta, WeightRule::Uniform, spec));
      }
    } else {
      checks.emplace_back("optimal weights",
                          simulate_mse(*a->supported, a->allocation, a->theta, spec));
    }
  } else if (const auto* x = std::get_if<SimplexScenario>(&scenario.body)) {
    checks.emplace_back("optimal weights at r*",
                        simulate_mse(losses_at(x->tradeoffs, allocation()), x->theta,
                                     WeightRule::Optimal, spec));
  } else if (const auto* x = std::get_if<AssignmentScenario>(&scenario.body)) {
    checks.emplace_back("optimal weights at the assignment",
                        simulate_mse(losses_at(x->tradeoffs, allocation()), x->theta,
                                     WeightRule::Optimal, spec));
  } else if (const auto* x = std::get_if<SupportScenario>(&scenario.body)) {
    checks.emplace_back("optimal weights at r*",
                        simulate_mse(x->problem, allocation(), x->theta, spec));
  } else if (const auto* x = std::get_if<DesignScenario>(&scenario.body)) {
    const auto r = allocation();
    checks.emplace_back("estimator at r*", simulate_mse(x->problem, r, x->theta, spec));
    std::vector<double> deltas{0.1, 0.01};
    if (std::find(deltas.begin(), deltas.end(), x->delta) == deltas.end()) {
      deltas.insert(deltas.begin(), x->delta);
    }
    for (auto& t : simulate_tail(x->problem, r, x->theta, deltas, spec)) {
      std::ostringstream label;
      label << "tail radius at delta " << t.delta;
      checks.emplace_back(label.str(), std::move(t));
    }
  } else {
    const auto& e = std::get<ElectionScenario>(scenario.body);
    // Regime studies are checked at the scenario's own budget.
    const json& one = res.contains("studies") ? res["studies"].back() : res;
    if (res.contains("studies")) {
      const BoundReport b = solve_election(e.problem, options);
      if (!b.feasible) {
        solved.result["status"] = "infeasible";
        solved.exit_code = exit_code::kInfeasible;
        return solved;
      }
      checks.emplace_back("decision error",
                          simulate_decision(e.problem, b.allocation, e.theta, spec));
    } else {
      std::vector<double> r;
      for (const auto& v : one.at("allocation")) r.push_back(v.get<double>());
      checks.emplace_back("decision error", simulate_decision(e.problem, r, e.theta, spec));
    }
  }

  json list = json::array();
  bool all_pass = true;
  for (const auto& [label, rep] : checks) {
    list.push_back(report_json(rep, label));
    all_pass = all_pass && (rep.pass || rep.advisory);
  }
  RunResult out;
  out.result = solved.result;
  out.result["simulation"] = {{"seed", spec.seed}, {"trials", spec.trials}, {"checks", list}};
  out.exit_code = worse(solved.exit_code, all_pass ? exit_code::kOk : exit_code::kCheckFailed);
  return out;
}

namespace {

std::string fmt(const json& v, int precision = 6) {
  if (v.is_null()) return "inf";
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string sci(const json& v) {
  if (v.is_null()) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v.get<double>());
  return buf;
}

void solver_summary(std::ostringstream& os, const json& r) {
  if (r.contains("objective")) os << "objective      " << fmt(r["objective"], 9) << "\n";
  if (r.contains("iterations")) {
    os << "iterations     " << r["iterations"].get<std::size_t>() << "\n";
    os << "kkt residual   " << sci(r["kkt_residual"]) << "\n";
  }
}

void allocation_table(std::ostringstream& os, const json& alloc, const char* label) {
  os << "  " << label << "    allocation\n";
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %-9zu %s\n", i + 1, fmt(alloc[i]).c_str());
    os << buf;
  }
}

void election_table(std::ostringstream& os, const json& r) {
  os << "budget         " << fmt(r["budget"], 2) << "\n";
  os << "advantage      " << fmt(r["advantage"], 6) << "\n";
  if (r["status"] == "infeasible") {
    os << "infeasible: the smallest reachable bias " << fmt(r["min_bias"], 6)
       << " is not below the advantage\n";
    return;
  }
  os << "bound          " << fmt(r["bound"], 6) << "\n";
  if (r.contains("bias")) {
    os << "bias           " << fmt(r["bias"], 6) << "\n";
    os << "min bias       " << fmt(r["min_bias"], 6) << "\n";
  }
  os << "variance term  " << sci(r["variance_term"]) << "\n";
  solver_summary(os, r);
  const bool indirect = r["regions"].size() > 0 && r["regions"][0].contains("margin");
  os << "  rank  region            weight     " << (indirect ? "margin     " : "")
     << "allocation      share\n";
  for (const auto& row : r["regions"]) {
    char buf[192];
    if (indirect) {
      std::snprintf(buf, sizeof buf, "  %-5s %-16s %-10s %-10s %-15s %s\n",
                    fmt(row["rank"]).c_str(), fmt(row["region"]).c_str(),
                    fmt(row["weight"], 4).c_str(), fmt(row["margin"], 4).c_str(),
                    fmt(row["allocation"], 2).c_str(), fmt(row["share"], 4).c_str());
    } else {
      std::snprintf(buf, sizeof buf, "  %-5s %-16s %-10s %-15s %s\n",
                    fmt(row["rank"]).c_str(), fmt(row["region"]).c_str(),
                    fmt(row["weight"], 4).c_str(), fmt(row["allocation"], 4).c_str(),
                    fmt(row["share"], 4).c_str());
    }
    os << buf;
  }
}

}  // namespace

std::string render_table(const json& r) {
  std::ostringstream os;
  os << "kind           " << fmt(r["kind"]) << "\n";
  if (r.contains("name")) os << "name           " << fmt(r["name"]) << "\n";
  os << "status         " << fmt(r["status"]) << "\n";
  const std::string kind = r["kind"];

  if (kind == "aggregate") {
    os << "total loss     " << fmt(r["total_loss"], 9) << "\n";
    if (r.contains("uniform_loss")) {
      os << "uniform loss   " << fmt(r["uniform_loss"], 9) << "\n";
      os << "  source    weight\n";
      for (std::size_t i = 0; i < r["weights"].size(); ++i) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %-9zu %s\n", i + 1, fmt(r["weights"][i]).c_str());
        os << buf;
      }
    } else {
      os << "  coord     loss          weights (source:weight)\n";
      for (std::size_t j = 0; j < r["weights"].size(); ++j) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "  %-9zu %-13s", j + 1,
                      fmt(r["per_coordinate_loss"][j]).c_str());
        os << buf;
        for (const auto& e : r["weights"][j]) {
          os << " " << e["source"].get<std::size_t>() << ":" << fmt(e["weight"], 4);
        }
        os << "\n";
      }
    }
  } else if (kind == "assignment") {
    os << "sense          " << fmt(r["sense"]) << "\n";
    os << "objective      " << fmt(r["objective"], 9) << "\n";
    os << "  source    resource  value\n";
    for (std::size_t i = 0; i < r["permutation"].size(); ++i) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  %-9zu %-9s %s\n", i + 1,
                    fmt(r["permutation"][i]).c_str(), fmt(r["allocation"][i]).c_str());
      os << buf;
    }
  } else if (kind == "election_direct" || kind == "election_indirect") {
    if (r.contains("studies")) {
      for (const auto& one : r["studies"]) {
        os << "\n";
        election_table(os, one);
      }
    } else {
      election_table(os, r);
    }
  } else {
    os << "budget         " << fmt(r["budget"], 6) << "\n";
    solver_summary(os, r);
    if (r.contains("objective_kind")) {
      os << "design obj.    " << fmt(r["objective_kind"]) << "\n";
      os << "mse            " << fmt(r["mse"], 9) << "\n";
      if (r.contains("tail_radius")) {
        os << "tail radius    " << fmt(r["tail_radius"], 9) << " (delta " << fmt(r["delta"], 4)
           << ")\n";
      }
    }
    if (r.contains("closed_form")) {
      os << "closed form    " << fmt(r["closed_form"]["rule"]) << ", objective "
         << fmt(r["closed_form"]["objective"], 9) << "\n";
    }
    allocation_table(os, r["allocation"], "source");
    if (r.contains("coordinate_losses")) {
      os << "  coord     loss\n";
      for (std::size_t j = 0; j < r["coordinate_losses"].size(); ++j) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %-9zu %s\n", j + 1,
                      fmt(r["coordinate_losses"][j]).c_str());
        os << buf;
      }
    }
  }

  if (r.contains("simulation")) {
    const auto& sim = r["simulation"];
    os << "\nsimulation     " << sim["trials"].get<std::size_t>() << " trials, seed "
       << sim["seed"].get<std::uint64_t>() << "\n";
    for (const auto& c : sim["checks"]) {
      os << "  " << (c["pass"].get<bool>() ? "PASS" : "FAIL") << "  " << fmt(c["label"])
         << ": empirical " << fmt(c["empirical_risk"]) << ", "
         << (c["one_sided"].get<bool>() ? "bound " : "predicted ")
         << fmt(c["predicted_risk"]) << ", s.e. " << sci(c["std_error"]);
      if (c.contains("unbiased")) {
        os << ", unbiased " << fmt(c["unbiased"]);
      }
      os << "\n";
    }
  }
  return os.str();
}

std::string render_json(const json& result) { return result.dump(2) + "\n"; }

}  // namespace resalloc
