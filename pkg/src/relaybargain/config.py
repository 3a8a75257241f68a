from __future__ import annotations

from dataclasses import dataclass, replace

POWER_MODES = ("golden", "dual")
TIME_MODES = ("substitution", "dual")
ENUMERATION_MODES = ("pruned", "exhaustive")
K1_FORMS = ("harvest", "literal")


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances, caps and method switches for the bargaining solver.

    epsilon:  relative change of both half-step objectives that ends the
              power/time alternation.
    epsilon1: relay-power accuracy (mW) of the power subproblem.
    epsilon2: accuracy of the time-division subproblem (harvest fraction).
    max_alternations: cap on power/time alternations per dedicator set.
    max_inner_iterations: cap on iterations inside one subproblem solve.
    gamma_min: downlink fraction given to enjoyers by the hop-split step.
    k1_form:  ``harvest`` weights harvested energy by each dedicator's channel
              gain; ``literal`` drops the gain (reproduces the printed
              coefficient for comparison only).
    debug:    scan the power objective before each solve and raise if it is
              not single-peaked.
    """

    epsilon: float = 1e-4
    epsilon1: float = 1e-6
    epsilon2: float = 1e-6
    max_alternations: int = 10_000
    max_inner_iterations: int = 10_000
    enumeration_mode: str = "pruned"
    power_mode: str = "golden"
    time_mode: str = "substitution"
    alpha_min: float = 1e-6
    gamma_min: float = 1e-6
    k1_form: str = "harvest"
    dual_time_step: float = 0.01
    debug: bool = False

    def __post_init__(self):
        for name in ("epsilon", "epsilon1", "epsilon2", "alpha_min", "gamma_min",
                     "dual_time_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_alternations < 1 or self.max_inner_iterations < 1:
            raise ValueError("iteration caps must be at least 1")
        for name, allowed in (("power_mode", POWER_MODES), ("time_mode", TIME_MODES),
                              ("enumeration_mode", ENUMERATION_MODES),
                              ("k1_form", K1_FORMS)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}")

    def replace(self, **changes) -> "SolverConfig":
        return replace(self, **changes)
