"""Alternating power control and time division over dedicator sets.

For each candidate dedicator set the inner loop alternates the relay-power
subproblem and the time-division subproblem until both half-step objectives
stop moving (relative change below ``epsilon``). The outer loop walks the
candidate sets from most to fewest dedicators and keeps the best product.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import SolverConfig
from .dedicators import DedicatorSet, apply_dedicators, candidate_sets
from .network import NetworkInstance
from .power import (power_coefficients, rebalance_hops, solve_relay_power,
                    source_powers_from_relay)
from .timediv import (TimeAllocation, initial_allocation, solve_time_division,
                      time_coefficients)
from .utility import Strategy, UtilityReport, evaluate, log_nash_product

log = logging.getLogger(__name__)

# Relative tolerance on log Phi under which two dedicator sets tie.
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    phase: str  # "power" or "time"
    log_phi: float

    @property
    def phi(self) -> float:
        return math.exp(self.log_phi)


@dataclass
class InnerResult:
    dedicators: DedicatorSet
    feasible: bool
    strategy: Strategy | None = None
    log_phi: float = -math.inf
    trace: list[TraceEntry] = field(default_factory=list)
    alternations: int = 0
    converged: bool = False

    @property
    def phi(self) -> float | None:
        return math.exp(self.log_phi) if self.feasible else None


@dataclass
class SolveResult:
    feasible: bool
    best_set: DedicatorSet | None
    best_strategy: Strategy | None
    best_log_phi: float
    utilities: UtilityReport | None
    per_set_results: list[InnerResult]
    total_iterations: int

    @property
    def best_phi(self) -> float | None:
        return math.exp(self.best_log_phi) if self.feasible else None

    def to_record(self) -> dict:
        """Plain-data summary (JSON-serialisable)."""
        rec = {
            "feasible": self.feasible,
            "phi": self.best_phi,
            "log_phi": self.best_log_phi if self.feasible else None,
            "dedicators": self.best_set.label() if self.best_set else None,
            "total_iterations": self.total_iterations,
            "sets": [
                {"dedicators": r.dedicators.label(), "feasible": r.feasible,
                 "log_phi": r.log_phi if r.feasible else None,
                 "alternations": r.alternations, "converged": r.converged}
                for r in self.per_set_results
            ],
        }
        if self.feasible:
            u = self.utilities
            rec["strategy"] = self.best_strategy.to_dict()
            rec["pair_capacities"] = u.pair_capacities.tolist()
            rec["pair_utilities"] = u.pair_utilities.tolist()
            rec["relay_utility"] = u.relay_utility
            rec["harvested_energy"] = u.harvested_energy
        return rec


def build_strategy(instance: NetworkInstance, dedicators: DedicatorSet,
                   allocation: TimeAllocation, relay_power: float,
                   data_power) -> Strategy:
    return Strategy(
        energy_power=apply_dedicators(instance, dedicators),
        data_power=data_power,
        relay_power=relay_power,
        harvest_fraction=allocation.per_source_harvest(dedicators),
        uplink_fraction=allocation.uplink_fraction,
        downlink_fraction=allocation.downlink_fraction,
    )


def _relative_change(new: float, old: float) -> float:
    return abs(math.expm1(new - old))


def _rebalance(instance, dedicators, alloc, relay_power, current, cfg):
    """Joint relay-power and hop-split step; kept only when it raises log Phi."""
    new_power, split = rebalance_hops(instance, dedicators, alloc, relay_power, cfg)
    coeffs = power_coefficients(instance, dedicators, split, cfg.k1_form)
    if new_power <= coeffs.upper_bound * (1 + 1e-12):
        val = coeffs.log_objective(new_power)
        if val > current:
            return new_power, split, val
    return relay_power, alloc, current


def solve_inner(instance: NetworkInstance, dedicators: DedicatorSet,
                cfg: SolverConfig | None = None,
                start: Strategy | None = None) -> InnerResult:
    """Alternate the two subproblems for one dedicator set.

    ``start`` warm-starts from a full strategy (its powers seed the first
    comparison, so a converged start stops after one alternation).
    """
    cfg = cfg or SolverConfig()
    if dedicators.count < 1:
        raise ValueError("at least one dedicator is required")
    result = InnerResult(dedicators=dedicators, feasible=False)

    prev1 = prev2 = None
    relay_power = None
    if start is not None:
        alloc = TimeAllocation(start.alpha, start.downlink_fraction, start.uplink_fraction)
        relay_power = start.relay_power
        prev1 = prev2 = log_nash_product(instance, start)
    else:
        alloc = initial_allocation(instance, dedicators, cfg)
        if alloc is None:
            return result

    data_power = None
    for k in range(1, cfg.max_alternations + 1):
        coeffs = power_coefficients(instance, dedicators, alloc, cfg.k1_form)
        new_power = solve_relay_power(coeffs, cfg)
        if new_power is None:
            if k == 1:
                return result
            break
        new_val = coeffs.log_objective(new_power)
        if relay_power is not None and relay_power <= coeffs.upper_bound * (1 + 1e-12):
            old_val = coeffs.log_objective(relay_power)
            if old_val >= new_val:
                new_power, new_val = relay_power, old_val
        if not math.isfinite(new_val):
            if k == 1:
                return result
            break
        relay_power = new_power
        relay_power, alloc, phi1 = _rebalance(instance, dedicators, alloc, relay_power, new_val, cfg)
        data_power = source_powers_from_relay(relay_power, instance, alloc)
        result.trace.append(TraceEntry(k, "power", phi1))

        tcoef = time_coefficients(instance, dedicators, data_power, relay_power)
        current = tcoef.log_objective(alloc.downlink_fraction)
        new_alloc = solve_time_division(tcoef, cfg, start=alloc)
        if new_alloc is not None and tcoef.log_objective(new_alloc.downlink_fraction) > current:
            alloc = new_alloc
        else:
            alloc = tcoef.allocation(alloc.downlink_fraction)
        phi2 = tcoef.log_objective(alloc.downlink_fraction)
        result.trace.append(TraceEntry(k, "time", phi2))
        result.alternations = k

        if prev1 is not None and max(_relative_change(phi1, prev1),
                                     _relative_change(phi2, prev2)) < cfg.epsilon:
            result.converged = True
            break
        prev1, prev2 = phi1, phi2
    else:
        log.info("set %s hit the alternation cap", dedicators.label())

    strategy = build_strategy(instance, dedicators, alloc, relay_power, data_power)
    result.strategy = strategy
    result.log_phi = log_nash_product(instance, strategy)
    result.feasible = math.isfinite(result.log_phi)
    return result


def solve(instance: NetworkInstance, cfg: SolverConfig | None = None) -> SolveResult:
    """Best Nash product over candidate dedicator sets.

    In pruned mode the sets shrink one source at a time (weakest channel
    dropped first) and the walk stops at the first infeasible size, since
    fewer dedicators harvest even less. Exhaustive mode tries every set.
    """
    cfg = cfg or SolverConfig()
    results: list[InnerResult] = []
    for dset in candidate_sets(instance, cfg.enumeration_mode):
        r = solve_inner(instance, dset, cfg)
        results.append(r)
        if not r.feasible and cfg.enumeration_mode == "pruned":
            break
    total = sum(r.alternations for r in results)
    feasible = [r for r in results if r.feasible]
    if not feasible:
        return SolveResult(False, None, None, -math.inf, None, results, total)
    top = max(r.log_phi for r in feasible)
    # values equal up to round-off count as a tie, won by the earliest set
    best = next(r for r in feasible if r.log_phi >= top - TIE_RTOL * max(1.0, abs(top)))
    return SolveResult(
        feasible=True,
        best_set=best.dedicators,
        best_strategy=best.strategy,
        best_log_phi=best.log_phi,
        utilities=evaluate(instance, best.strategy),
        per_set_results=results,
        total_iterations=total,
    )
