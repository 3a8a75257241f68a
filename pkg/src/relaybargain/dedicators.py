"""Dedicator/enjoyer selection.

A dedicator sends energy to the relay at full source power during the shared
harvest phase; an enjoyer sends none and carries a zero harvest fraction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .network import NetworkInstance
from .utility import Strategy, log_nash_product

MAX_EXHAUSTIVE_PAIRS = 10


@dataclass(frozen=True)
class DedicatorSet:
    indicator: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "indicator", tuple(bool(w) for w in self.indicator))

    @classmethod
    def from_members(cls, members, num_pairs: int) -> "DedicatorSet":
        chosen = set(int(m) for m in members)
        if any(m < 0 or m >= num_pairs for m in chosen):
            raise ValueError("dedicator index out of range")
        return cls(tuple(i in chosen for i in range(num_pairs)))

    @property
    def count(self) -> int:
        return sum(self.indicator)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i for i, w in enumerate(self.indicator) if w)

    @property
    def mask(self) -> np.ndarray:
        return np.array(self.indicator, dtype=bool)

    def label(self) -> str:
        """Bit string, source 0 first (e.g. ``"1101"``)."""
        return "".join("1" if w else "0" for w in self.indicator)


def apply_dedicators(instance: NetworkInstance, dedicators: DedicatorSet) -> np.ndarray:
    """Energy-transfer power of every source: the cap for dedicators, else 0."""
    if len(dedicators.indicator) != instance.num_pairs:
        raise ValueError("dedicator set size does not match the instance")
    return np.where(dedicators.mask, instance.params.source_power_cap, 0.0)


def gain_order(instance: NetworkInstance) -> np.ndarray:
    """Source indices by descending source-relay gain, ties by ascending index."""
    h = instance.source_relay_gains
    return np.array(sorted(range(h.size), key=lambda i: (-h[i], i)))


def candidate_sets(instance: NetworkInstance, mode: str = "pruned") -> list[DedicatorSet]:
    """Dedicator sets to try, largest first.

    ``pruned`` yields one set per size K = N..1: the K sources with the best
    channel to the relay. ``exhaustive`` yields all 2^N - 1 non-empty sets
    (N <= 10), grouped by descending size.
    """
    n = instance.num_pairs
    if mode == "pruned":
        order = gain_order(instance)
        return [DedicatorSet.from_members(order[:k], n) for k in range(n, 0, -1)]
    if mode == "exhaustive":
        if n > MAX_EXHAUSTIVE_PAIRS:
            raise ValueError(f"exhaustive enumeration limited to N <= {MAX_EXHAUSTIVE_PAIRS}")
        return [DedicatorSet.from_members(c, n)
                for k in range(n, 0, -1)
                for c in itertools.combinations(range(n), k)]
    raise ValueError(f"unknown enumeration mode {mode!r}")


def swap_log_phis(instance: NetworkInstance, i: int, j: int,
                  shared: Strategy) -> tuple[float, float]:
    """Log Nash products with i (resp. j) as the dedicator of the pair {i, j}.

    Every other variable, including the common harvest time, is taken from
    ``shared``; the non-dedicator of the two gets zero energy power and time.
    """
    alpha = shared.alpha
    p0 = instance.params.source_power_cap

    def with_dedicator(a, b):
        ep = shared.energy_power.copy()
        hf = shared.harvest_fraction.copy()
        ep[a], hf[a] = p0, alpha
        ep[b], hf[b] = 0.0, 0.0
        return shared.replace(energy_power=ep, harvest_fraction=hf)

    return (log_nash_product(instance, with_dedicator(i, j)),
            log_nash_product(instance, with_dedicator(j, i)))


def dedicator_ordering_check(instance: NetworkInstance, i: int, j: int,
                             shared: Strategy, rtol: float = 1e-12) -> bool:
    """True when making i the dedicator is at least as good as making j one.

    Requires ``beta_i * P_i^s0 >= beta_j * P_j^s0`` and ``|h_i|^2 >= |h_j|^2``;
    under those conditions the answer should always be True.
    """
    h = instance.source_relay_gains
    spend = shared.uplink_fraction * shared.data_power
    if not (spend[i] >= spend[j] and h[i] >= h[j]):
        raise ValueError("ordering preconditions do not hold for this pair")
    phi_i, phi_j = swap_log_phis(instance, i, j, shared)
    if phi_j == -math.inf:
        return True
    return phi_i >= phi_j - rtol * max(1.0, abs(phi_j))
