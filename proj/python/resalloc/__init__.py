"""Python bindings for the resalloc C++ library."""

import json
import os

from ._core import (
    BoundReport,
    DimensionMismatch,
    DomainError,
    ElectionProblem,
    InfeasibleConstraint,
    InputError,
    ParseError,
    ResallocError,
    SchemaError,
    SemanticError,
    SimplexConstraint,
    SolverOptions,
    SolverReport,
    SourceModel,
    SupportProblem,
    TradeoffFunction,
    indirect_bound,
    optimal_weights,
    project_simplex,
    solve_assignment,
    solve_best_source,
    solve_direct,
    solve_indirect,
    solve_power_kkt,
    solve_simplex_generic,
    solve_support,
    solve_total_independence,
    solve_water_filling,
)
from . import _core

__all__ = [name for name in dir(_core) if not name.startswith("_")] + ["run_scenario"]


def run_scenario(scenario, *, budget=None, regions=None, options=None,
                 trials=None, seed=20160707, threads=0):
    """Solve a scenario given as a file path or a dict.

    With ``trials`` set, the solution is also checked by Monte Carlo.
    Returns the result document as a dict; ``exit_code`` holds the code the
    command line tool would return.
    """
    options = options or SolverOptions()
    if isinstance(scenario, dict):
        if regions is not None:
            raise ValueError("regions applies to scenario files only")
        text = _core._run_text(json.dumps(scenario), budget, options, trials,
                               seed, threads)
    else:
        text = _core._run_file(os.fspath(scenario), budget, regions, options,
                               trials, seed, threads)
    return json.loads(text)
