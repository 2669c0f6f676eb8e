"""Finite-volume solvers for flow with a variable congestion constraint."""

from congested_euler.grid import Grid, GridState
from congested_euler.pressure import PressureLaw
from congested_euler.riemann import PrimState, solve_riemann
from congested_euler.scenarios import (
    ConvergenceReport,
    Scenario,
    ScenarioError,
    ScenarioResult,
    run_convergence_study,
    run_scenario,
)

__all__ = [
    "ConvergenceReport",
    "Grid",
    "GridState",
    "PressureLaw",
    "PrimState",
    "Scenario",
    "ScenarioError",
    "ScenarioResult",
    "run_convergence_study",
    "run_scenario",
    "solve_riemann",
]
