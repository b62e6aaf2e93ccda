#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <Eigen/Dense>

#include "resalloc/aggregation.hpp"
#include "resalloc/assignment.hpp"
#include "resalloc/errors.hpp"
#include "resalloc/halfspace.hpp"
#include "resalloc/runner.hpp"
#include "resalloc/scenario.hpp"
#include "resalloc/solver_core.hpp"
#include "resalloc/support_alloc.hpp"
#include "resalloc/tradeoffs.hpp"

namespace py = pybind11;
using namespace resalloc;

namespace {

using Vec = std::vector<double>;

Sense parse_sense(const std::string& s) {
  if (s == "max" || s == "maximize") return Sense::Maximize;
  if (s == "min" || s == "minimize") return Sense::Minimize;
  throw DomainError("sense must be 'max' or 'min', got '" + s + "'");
}

Eigen::MatrixXd to_matrix(const std::vector<Vec>& rows) {
  if (rows.empty()) throw DimensionMismatch("matrix has no rows");
  const auto cols = rows.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw DimensionMismatch("matrix rows differ in length");
    for (std::size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

std::string run_to_json(const Scenario& s, const SolverOptions& options,
                        std::optional<std::size_t> trials, std::uint64_t seed,
                        std::size_t threads) {
  RunResult out;
  if (trials) {
    SimulationSpec spec;
    spec.trials = *trials;
    spec.seed = seed;
    spec.threads = threads;
    out = simulate(s, options, spec);
  } else {
    out = run(s, options);
  }
  nlohmann::json j = out.result;
  j["exit_code"] = out.exit_code;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Resource allocation for multi-source estimation";

  auto base = py::register_exception<Error>(m, "ResallocError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
  py::register_exception<InfeasibleConstraint>(m, "InfeasibleConstraint", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<SemanticError>(m, "SemanticError", base.ptr());

  py::class_<TradeoffFunction>(m, "TradeoffFunction")
      .def_static("linear", &TradeoffFunction::linear_precision, py::arg("sigma_sq"))
      .def_static("power", &TradeoffFunction::power_precision, py::arg("sigma_sq"),
                  py::arg("alpha"))
      .def_static("log_channel", &TradeoffFunction::log_channel_precision,
                  py::arg("sigma_sq"), py::arg("a"), py::arg("budget_ref"))
      .def_static("exp_margin", &TradeoffFunction::exp_margin_loss, py::arg("eta"))
      .def_static(
          "custom",
          [](const std::vector<std::pair<double, double>>& pts) {
            std::vector<LossSample> s;
            for (const auto& [r, l] : pts) s.push_back({r, l});
            return TradeoffFunction::custom_convex_loss(std::move(s));
          },
          py::arg("samples"), "Piecewise-linear convex loss through (resource, loss) pairs.")
      .def_property_readonly("kind", [](const TradeoffFunction& f) {
        return std::string(to_string(f.kind()));
      })
      .def("precision", &TradeoffFunction::precision, py::arg("r"))
      .def("loss", &TradeoffFunction::loss, py::arg("r"))
      .def("precision_derivative", &TradeoffFunction::precision_derivative, py::arg("r"))
      .def("loss_derivative", &TradeoffFunction::loss_derivative, py::arg("r"))
      .def("__repr__", [](const TradeoffFunction& f) {
        return "TradeoffFunction(" + tradeoff_to_json(f).dump() + ")";
      });

  py::class_<SimplexConstraint>(m, "SimplexConstraint")
      .def(py::init([](double budget, Vec lower, Vec upper) {
             return SimplexConstraint{budget, std::move(lower), std::move(upper)};
           }),
           py::arg("budget"), py::arg("lower") = Vec{}, py::arg("upper") = Vec{})
      .def_readonly("budget", &SimplexConstraint::budget)
      .def_readonly("lower", &SimplexConstraint::lower)
      .def_readonly("upper", &SimplexConstraint::upper);

  py::class_<SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("objective_tolerance", &SolverOptions::objective_tolerance)
      .def_readwrite("gradient_tolerance", &SolverOptions::gradient_tolerance)
      .def_readwrite("max_iterations", &SolverOptions::max_iterations);

  py::class_<SolverReport>(m, "SolverReport")
      .def_readonly("allocation", &SolverReport::allocation)
      .def_readonly("objective", &SolverReport::objective)
      .def_readonly("iterations", &SolverReport::iterations)
      .def_readonly("converged", &SolverReport::converged)
      .def_readonly("kkt_residual", &SolverReport::kkt_residual)
      .def_readonly("component_losses", &SolverReport::component_losses);

  m.def("project_simplex",
        [](const Vec& v, const SimplexConstraint& c) { return project_simplex(v, c); },
        py::arg("v"), py::arg("constraint"));
  m.def("solve_simplex_generic",
        [](const std::vector<TradeoffFunction>& fs, const SimplexConstraint& c,
           const SolverOptions& o) { return solve_simplex_generic(fs, c, o); },
        py::arg("tradeoffs"), py::arg("constraint"), py::arg("options") = SolverOptions{});
  m.def("solve_best_source",
        [](const Vec& s2, double budget) { return solve_best_source(s2, budget); },
        py::arg("sigma_sq"), py::arg("budget"));
  m.def("solve_power_kkt",
        [](const Vec& s2, double alpha, double budget) {
          return solve_power_kkt(s2, alpha, budget);
        },
        py::arg("sigma_sq"), py::arg("alpha"), py::arg("budget"));
  m.def("solve_water_filling",
        [](const Vec& s2, const Vec& a, double budget) {
          const auto w = solve_water_filling(s2, a, budget);
          return py::make_tuple(w.allocation, w.level);
        },
        py::arg("sigma_sq"), py::arg("a"), py::arg("budget"),
        "Returns (allocation, level).");

  m.def("optimal_weights",
        [](const Vec& losses) {
          const auto w = optimal_weights_single(losses);
          Vec lam(losses.size());
          for (std::size_t i = 0; i < losses.size(); ++i) lam[i] = w.weight(0, i);
          return py::make_tuple(lam, w.total_loss);
        },
        py::arg("losses"), "Returns (weights, total_loss).");

  m.def("solve_assignment",
        [](const std::vector<Vec>& q, const std::string& sense) {
          const auto r = solve_assignment({to_matrix(q), parse_sense(sense)});
          return py::make_tuple(r.permutation, r.objective);
        },
        py::arg("q"), py::arg("sense") = "max", "Returns (permutation, objective).");

  py::class_<SourceModel>(m, "SourceModel")
      .def(py::init<Support, TradeoffFunction>(), py::arg("support"), py::arg("tradeoff"))
      .def(py::init<Support, std::vector<TradeoffFunction>>(), py::arg("support"),
           py::arg("tradeoffs"))
      .def_property_readonly("support", &SourceModel::support);

  py::class_<SupportProblem>(m, "SupportProblem")
      .def(py::init<std::size_t, std::vector<SourceModel>, SimplexConstraint>(),
           py::arg("dimension"), py::arg("sources"), py::arg("constraint"))
      .def("objective", [](const SupportProblem& p, const Vec& r) { return p.objective(r); })
      .def_property_readonly("reciprocal_sets", &SupportProblem::reciprocal_sets);
  m.def("solve_support", &solve_support, py::arg("problem"),
        py::arg("options") = SolverOptions{});
  m.def("solve_total_independence",
        [](const Vec& sigma, double budget) {
          return solve_total_independence_closed(sigma, budget);
        },
        py::arg("sigma"), py::arg("budget"));

  py::class_<ElectionProblem>(m, "ElectionProblem")
      .def_static("direct", &ElectionProblem::direct, py::arg("weights"),
                  py::arg("variance_fns"), py::arg("advantage"), py::arg("constraint"))
      .def_static("indirect", &ElectionProblem::indirect, py::arg("weights"),
                  py::arg("margins"), py::arg("advantage"), py::arg("constraint"))
      .def("with_budget", &ElectionProblem::with_budget, py::arg("budget"));

  py::class_<BoundReport>(m, "BoundReport")
      .def_readonly("allocation", &BoundReport::allocation)
      .def_readonly("bound_value", &BoundReport::bound_value)
      .def_readonly("bias", &BoundReport::bias)
      .def_readonly("variance_term", &BoundReport::variance_term)
      .def_readonly("objective", &BoundReport::objective)
      .def_readonly("feasible", &BoundReport::feasible)
      .def_readonly("min_bias", &BoundReport::min_bias)
      .def_readonly("converged", &BoundReport::converged);
  m.def("solve_direct", &solve_direct, py::arg("problem"),
        py::arg("options") = SolverOptions{});
  m.def("solve_indirect", &solve_indirect, py::arg("problem"),
        py::arg("options") = SolverOptions{});
  m.def("indirect_bound",
        [](const ElectionProblem& p, const Vec& r) { return indirect_bound(p, r); },
        py::arg("problem"), py::arg("r"));

  m.def(
      "_run_file",
      [](const std::string& path, std::optional<double> budget,
         std::optional<std::string> regions, const SolverOptions& o,
         std::optional<std::size_t> trials, std::uint64_t seed, std::size_t threads) {
        const Scenario s = parse_scenario(path, {budget, regions});
        py::gil_scoped_release release;
        return run_to_json(s, o, trials, seed, threads);
      },
      py::arg("path"), py::arg("budget"), py::arg("regions"), py::arg("options"),
      py::arg("trials"), py::arg("seed"), py::arg("threads"));
  m.def(
      "_run_text",
      [](const std::string& text, std::optional<double> budget, const SolverOptions& o,
         std::optional<std::size_t> trials, std::uint64_t seed, std::size_t threads) {
        const Scenario s = parse_scenario_text(text, {budget, std::nullopt});
        py::gil_scoped_release release;
        return run_to_json(s, o, trials, seed, threads);
      },
      py::arg("text"), py::arg("budget"), py::arg("options"), py::arg("trials"),
      py::arg("seed"), py::arg("threads"));
}
