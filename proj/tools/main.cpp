// resalloc: solve, simulate or validate allocation scenario files.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "resalloc/errors.hpp"
#include "resalloc/runner.hpp"
#include "resalloc/scenario.hpp"

namespace {

struct Flags {
  std::string scenario;
  std::optional<double> tolerance;
  std::optional<std::size_t> max_iters;
  std::optional<double> budget;
  std::optional<std::string> regions;
  std::string output = "table";
  std::uint64_t seed = resalloc::SimulationSpec{}.seed;
  std::size_t trials = resalloc::SimulationSpec{}.trials;
  std::size_t threads = 0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("scenario", f.scenario, "Scenario file (JSON)")->required();
  cmd->add_option("--budget", f.budget, "Replace the scenario's budget")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--regions", f.regions,
                  "Region CSV (region,weight,margin) for indirect elections")
      ->check(CLI::ExistingFile);
}

void add_solver(CLI::App* cmd, Flags& f) {
  cmd->add_option("--tolerance", f.tolerance,
                  "Projected-gradient norm required for convergence (default 1e-8)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", f.max_iters, "Iteration cap (default 100000)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output", f.output, "Output format")
      ->check(CLI::IsMember({"table", "json"}));
}

resalloc::SolverOptions solver_options(const Flags& f) {
  resalloc::SolverOptions o;
  if (f.tolerance) o.gradient_tolerance = *f.tolerance;
  if (f.max_iters) o.max_iterations = *f.max_iters;
  return o;
}

resalloc::Scenario load(const Flags& f) {
  resalloc::ScenarioOverrides ov;
  ov.budget = f.budget;
  ov.regions_csv = f.regions;
  return resalloc::parse_scenario(f.scenario, ov);
}

int emit(const resalloc::RunResult& r, const Flags& f) {
  std::cout << (f.output == "json" ? resalloc::render_json(r.result)
                                   : resalloc::render_table(r.result));
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal allocation of a resource budget across statistical data sources"};
  app.require_subcommand(1);
  Flags flags;

  auto* solve = app.add_subcommand("solve", "Solve a scenario and print the allocation");
  add_common(solve, flags);
  add_solver(solve, flags);

  auto* sim = app.add_subcommand("simulate",
                                 "Solve, then check predicted losses or bounds by Monte Carlo");
  add_common(sim, flags);
  add_solver(sim, flags);
  sim->add_option("--trials", flags.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  sim->add_option("--seed", flags.seed, "Random seed");
  sim->add_option("--threads", flags.threads, "Worker threads (0: all cores)");

  auto* check = app.add_subcommand("check", "Validate a scenario file without solving");
  add_common(check, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const resalloc::Scenario scenario = load(flags);
    if (*check) {
      std::cout << "ok: " << flags.scenario << " is a valid " << scenario.kind
                << " scenario\n";
      return resalloc::exit_code::kOk;
    }
    if (*solve) return emit(resalloc::run(scenario, solver_options(flags)), flags);
    resalloc::SimulationSpec spec;
    spec.trials = flags.trials;
    spec.seed = flags.seed;
    spec.threads = flags.threads;
    return emit(resalloc::simulate(scenario, solver_options(flags), spec), flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return resalloc::exit_code_for(e);
  }
}
