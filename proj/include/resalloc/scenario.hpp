#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "resalloc/assignment.hpp"
#include "resalloc/halfspace.hpp"
#include "resalloc/linear_design.hpp"
#include "resalloc/solver_core.hpp"
#include "resalloc/sources.hpp"
#include "resalloc/support_alloc.hpp"
#include "resalloc/tradeoffs.hpp"

namespace resalloc {

/// Weights for sources of one shared quantity ("losses"), or for supported
/// sources at a fixed allocation ("sources" + "allocation").
struct AggregateScenario {
  std::vector<double> losses;
  std::optional<SupportProblem> supported;
  std::vector<double> allocation;
  /// Optional partial estimates to combine, aligned with the supports.
  std::vector<std::vector<double>> estimates;
  std::vector<double> theta;
};

struct SimplexScenario {
  std::vector<TradeoffFunction> tradeoffs;
  SimplexConstraint constraint;
  std::vector<double> theta;
};

struct AssignmentScenario {
  std::vector<TradeoffFunction> tradeoffs;
  std::vector<double> resources;
  Sense sense = Sense::Maximize;
  std::vector<double> theta;
};

struct SupportScenario {
  SupportProblem problem;
  std::vector<double> theta;
};

struct DesignScenario {
  DesignProblem problem;
  /// Confidence parameter of the tail objective and of the tail check.
  double delta = 0.1;
  std::vector<double> theta;
};

struct ElectionScenario {
  ElectionProblem problem;
  std::vector<std::string> names;
  /// Budgets of a regime study (indirect only); empty for a single solve.
  std::vector<double> budgets;
  std::vector<double> theta;
};

using ScenarioBody =
    std::variant<AggregateScenario, SimplexScenario, AssignmentScenario,
                 SupportScenario, DesignScenario, ElectionScenario>;

struct Scenario {
  std::string kind;
  nlohmann::json metadata = nlohmann::json::object();
  ScenarioBody body;
};

/// Knobs that replace values of the scenario file.
struct ScenarioOverrides {
  std::optional<double> budget;
  /// Region CSV replacing the regions of an indirect election.
  std::optional<std::string> regions_csv;
};

/// Reads and validates a scenario file. Throws InputError (unreadable),
/// ParseError (malformed JSON), SchemaError (missing or mistyped field) or
/// SemanticError (inconsistent values); the latter two name the offending
/// field with a path such as "$.sources[2].support[1]".
Scenario parse_scenario(const std::string& path, const ScenarioOverrides& overrides = {});

/// Same, from JSON text. Relative CSV paths resolve against `base_dir`.
Scenario parse_scenario_text(const std::string& text,
                             const ScenarioOverrides& overrides = {},
                             const std::string& base_dir = ".");

/// JSON form of a tradeoff function, as accepted by scenario files.
nlohmann::json tradeoff_to_json(const TradeoffFunction& f);

}  // namespace resalloc
