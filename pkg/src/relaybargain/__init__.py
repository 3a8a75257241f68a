"""Nash bargaining resource allocation for wireless-powered relay networks."""

from .config import SolverConfig
from .dedicators import DedicatorSet, apply_dedicators, candidate_sets
from .network import (NetworkInstance, PhysicalParams, ScenarioConfig, dbm_to_mw,
                      generate_scenario, mean_path_gain)
from .solver import InnerResult, SolveResult, solve, solve_inner
from .utility import Strategy, check_feasible, evaluate, nash_product

__all__ = [
    "DedicatorSet", "InnerResult", "NetworkInstance", "PhysicalParams",
    "ScenarioConfig", "SolveResult", "SolverConfig", "Strategy",
    "apply_dedicators", "candidate_sets", "check_feasible", "dbm_to_mw",
    "evaluate", "generate_scenario", "mean_path_gain", "nash_product",
    "solve", "solve_inner",
]
