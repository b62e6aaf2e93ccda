#pragma once

#include <exception>
#include <string>

#include <nlohmann/json.hpp>

#include "resalloc/harness.hpp"
#include "resalloc/scenario.hpp"
#include "resalloc/solver_core.hpp"

namespace resalloc {

/// Process exit codes of the command line tool.
namespace exit_code {
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kNotConverged = 2;
constexpr int kInfeasible = 3;
constexpr int kInput = 4;
constexpr int kSyntax = 5;
constexpr int kSchema = 6;
constexpr int kSemantic = 7;
constexpr int kCheckFailed = 8;
}  // namespace exit_code

/// Exit code for an exception escaping parse_scenario / run / simulate.
int exit_code_for(const std::exception& e) noexcept;

struct RunResult {
  int exit_code = exit_code::kOk;
  /// Machine-readable result. Allocations are emitted with enough digits
  /// to parse back to the identical doubles.
  nlohmann::json result;
};

/// Solves the scenario with its owning module.
RunResult run(const Scenario& scenario, const SolverOptions& options = {});

/// Solves the scenario, then checks the predicted losses or bounds at the
/// solution by Monte Carlo. Exit code kCheckFailed if a check fails.
RunResult simulate(const Scenario& scenario, const SolverOptions& options,
                   const SimulationSpec& spec);

/// Human-readable rendering of a result produced by run or simulate.
std::string render_table(const nlohmann::json& result);

/// Pretty-printed JSON.
std::string render_json(const nlohmann::json& result);

}  // namespace resalloc
