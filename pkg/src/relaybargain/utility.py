"""Capacities, utilities and the Nash product of a candidate strategy.

Capacities are in bits (log base 2). Pair utilities are bits per mW of
source energy, the relay utility is residual harvested energy in mW per block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkInstance

# Absolute tolerance on the time-budget equality and the inequality floors.
TIME_TOL = 1e-9
# Relative tolerance on hop balance (uplink bits == downlink bits).
BALANCE_RTOL = 1e-6


class DegenerateStrategyError(ValueError):
    """A pair spends no source energy, so its efficiency is undefined."""


def _vec(x, n, name):
    a = np.array(x, dtype=float).reshape(-1)
    if a.size == 1 and n > 1:
        a = np.full(n, float(a[0]))
    if a.size != n:
        raise ValueError(f"{name} has length {a.size}, expected {n}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Strategy:
    """Full decision vector: powers in mW and per-pair time fractions.

    ``harvest_fraction`` is alpha_i, ``uplink_fraction`` beta_i and
    ``downlink_fraction`` gamma_i. Scalars are broadcast to every pair.
    """

    energy_power: np.ndarray
    data_power: np.ndarray
    relay_power: float
    harvest_fraction: np.ndarray
    uplink_fraction: np.ndarray
    downlink_fraction: np.ndarray

    def __post_init__(self):
        n = max(np.size(self.energy_power), np.size(self.data_power),
                np.size(self.harvest_fraction), np.size(self.uplink_fraction),
                np.size(self.downlink_fraction))
        for name in ("energy_power", "data_power", "harvest_fraction",
                     "uplink_fraction", "downlink_fraction"):
            object.__setattr__(self, name, _vec(getattr(self, name), n, name))
        object.__setattr__(self, "relay_power", float(self.relay_power))

    @property
    def num_pairs(self) -> int:
        return int(self.energy_power.size)

    @property
    def alpha(self) -> float:
        """Harvest phase length: the longest per-source harvest time."""
        return float(self.harvest_fraction.max())

    def replace(self, **changes) -> "Strategy":
        fields = {
            "energy_power": self.energy_power,
            "data_power": self.data_power,
            "relay_power": self.relay_power,
            "harvest_fraction": self.harvest_fraction,
            "uplink_fraction": self.uplink_fraction,
            "downlink_fraction": self.downlink_fraction,
        }
        fields.update(changes)
        return Strategy(**fields)

    def to_dict(self) -> dict:
        return {
            "energy_power": self.energy_power.tolist(),
            "data_power": self.data_power.tolist(),
            "relay_power": self.relay_power,
            "harvest_fraction": self.harvest_fraction.tolist(),
            "uplink_fraction": self.uplink_fraction.tolist(),
            "downlink_fraction": self.downlink_fraction.tolist(),
        }


@dataclass(frozen=True)
class UtilityReport:
    pair_capacities: np.ndarray
    pair_utilities: np.ndarray
    harvested_energy: float
    relay_cost: float
    relay_utility: float
    nash_product: float | None

    @property
    def feasible(self) -> bool:
        return self.nash_product is not None

    @property
    def sum_capacity(self) -> float:
        return float(np.sum(self.pair_capacities))


@dataclass(frozen=True)
class FeasibilityReport:
    violations: list[tuple[str, float]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def labels(self) -> list[str]:
        return [label for label, _ in self.violations]


def hop_rates(instance: NetworkInstance, strategy: Strategy):
    """Per-pair uplink and downlink spectral efficiencies in bits per block."""
    p = instance.params
    up = np.log2(1.0 + strategy.data_power * instance.source_relay_gains / p.noise_power)
    down = np.log2(1.0 + strategy.relay_power * instance.relay_destination_gains / p.noise_power)
    return up, down


def pair_capacities(instance: NetworkInstance, strategy: Strategy) -> np.ndarray:
    up, down = hop_rates(instance, strategy)
    return np.minimum(strategy.uplink_fraction * up, strategy.downlink_fraction * down)


def pair_capacity(instance: NetworkInstance, strategy: Strategy, i: int) -> float:
    """Bits delivered to destination i: the weaker of its two hops."""
    return float(pair_capacities(instance, strategy)[i])


def source_energies(strategy: Strategy) -> np.ndarray:
    """Energy each source spends per block (harvest phase plus uplink)."""
    return (strategy.energy_power * strategy.harvest_fraction
            + strategy.data_power * strategy.uplink_fraction)


def pair_utilities(instance: NetworkInstance, strategy: Strategy) -> np.ndarray:
    energy = source_energies(strategy)
    bad = np.flatnonzero(~(energy > 0))
    if bad.size:
        raise DegenerateStrategyError(
            f"pair(s) {bad.tolist()} spend no source energy")
    return pair_capacities(instance, strategy) / energy


def pair_utility(instance: NetworkInstance, strategy: Strategy, i: int) -> float:
    """Data transmission efficiency of pair i (bits per mW of source energy)."""
    energy = float(source_energies(strategy)[i])
    if not energy > 0:
        raise DegenerateStrategyError(f"pair {i} spends no source energy")
    return pair_capacity(instance, strategy, i) / energy


def harvested_energy(instance: NetworkInstance, strategy: Strategy) -> float:
    p = instance.params
    return p.conversion_efficiency * p.block_time * float(np.sum(
        strategy.harvest_fraction * strategy.energy_power * instance.source_relay_gains))


def relay_cost(instance: NetworkInstance, strategy: Strategy) -> float:
    p = instance.params
    return p.block_time * float(np.sum(strategy.downlink_fraction)) * strategy.relay_power \
        + p.relay_fixed_cost * p.block_time


def relay_utility(instance: NetworkInstance, strategy: Strategy) -> float:
    """Residual harvested energy: harvest minus forwarding and fixed costs."""
    return harvested_energy(instance, strategy) - relay_cost(instance, strategy)


def log_nash_product(instance: NetworkInstance, strategy: Strategy) -> float:
    """Natural log of the Nash product; ``-inf`` when any utility is not positive."""
    u = pair_utilities(instance, strategy)
    r = relay_utility(instance, strategy)
    if np.any(~(u > 0)) or not r > 0:
        return -math.inf
    return float(np.sum(np.log(u)) + math.log(r))


def nash_product(instance: NetworkInstance, strategy: Strategy) -> float | None:
    """Product of all pair utilities and the relay utility.

    Returns ``None`` (the infeasible marker) unless every factor is positive.
    """
    u = pair_utilities(instance, strategy)
    r = relay_utility(instance, strategy)
    if np.any(~(u > 0)) or not r > 0:
        return None
    return float(np.prod(u)) * r


def balance_gap(instance: NetworkInstance, strategy: Strategy, i: int) -> float:
    """Uplink bits minus downlink bits for pair i; zero when the hops balance."""
    up, down = hop_rates(instance, strategy)
    return float(strategy.uplink_fraction[i] * up[i] - strategy.downlink_fraction[i] * down[i])


def evaluate(instance: NetworkInstance, strategy: Strategy) -> UtilityReport:
    caps = pair_capacities(instance, strategy)
    utils = pair_utilities(instance, strategy)
    e = harvested_energy(instance, strategy)
    c = relay_cost(instance, strategy)
    return UtilityReport(
        pair_capacities=caps,
        pair_utilities=utils,
        harvested_energy=e,
        relay_cost=c,
        relay_utility=e - c,
        nash_product=nash_product(instance, strategy),
    )


def check_feasible(instance: NetworkInstance, strategy: Strategy,
                   tol: float = TIME_TOL) -> FeasibilityReport:
    """List every violated constraint together with its signed residual.

    Inequality residuals are ``value - bound`` oriented so that negative
    means violated; the time budget reports ``used - 1``.
    """
    p = instance.params
    out: list[tuple[str, float]] = []
    if strategy.num_pairs != instance.num_pairs:
        raise ValueError("strategy and instance disagree on the number of pairs")
    for name in ("energy_power", "data_power", "harvest_fraction",
                 "uplink_fraction", "downlink_fraction"):
        for i, v in enumerate(getattr(strategy, name)):
            if v < -tol:
                out.append((f"nonnegative_{name}({i})", float(v)))
    if strategy.relay_power < -tol:
        out.append(("nonnegative_relay_power", strategy.relay_power))
    cap = p.source_power_cap
    for name in ("energy_power", "data_power"):
        for i, v in enumerate(getattr(strategy, name)):
            if v > cap * (1 + tol):
                out.append((f"source_power_cap_{name}({i})", float(cap - v)))
    if strategy.relay_power > p.relay_power_cap * (1 + tol):
        out.append(("relay_power_cap", p.relay_power_cap - strategy.relay_power))

    used = strategy.alpha + float(np.sum(strategy.uplink_fraction + strategy.downlink_fraction))
    if abs(used - 1.0) > tol:
        out.append(("time_budget", used - 1.0))
    slack = strategy.uplink_fraction + strategy.downlink_fraction - p.min_pair_time_fraction
    for i, s in enumerate(slack):
        if s < -tol:
            out.append((f"qos({i})", float(s)))

    energy = source_energies(strategy)
    caps = pair_capacities(instance, strategy)
    for i in range(strategy.num_pairs):
        if not energy[i] > 0 or not caps[i] > 0:
            out.append((f"pair_utility_positive({i})", float(caps[i])))
    r = relay_utility(instance, strategy)
    if not r > 0:
        out.append(("relay_utility_positive", r))
    return FeasibilityReport(out)
