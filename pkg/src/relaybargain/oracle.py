"""Brute-force checks: grid search for one or two pairs and 1-D scans.

The grid search shares no code with the solver; it evaluates the Nash product
directly from the model on grids over relay power and the time fractions,
with each source's data power set to balance its two hops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dedicators import DedicatorSet, apply_dedicators
from .network import NetworkInstance
from .optimize import PLATEAU_RTOL, count_local_maxima
from .power import power_coefficients
from .timediv import TimeAllocation, time_coefficients
from .utility import Strategy, log_nash_product

# Relay-power axis: log-spaced over this many decades below the relay cap.
RELAY_DECADES = 12.0
# Zoom search for two pairs: starting points per axis, refinement rounds.
ZOOM_START = 16
ZOOM_ROUNDS = 40
# Half-width of each refinement window, in spacings of the previous grid.
ZOOM_WIDTH = 3.0


class UnsupportedSizeError(ValueError):
    """The grid oracle only handles one or two pairs."""


@dataclass(frozen=True)
class OracleResult:
    best_log_phi: float
    best_point: Strategy | None
    grid_resolution: tuple[int, ...]
    evaluations: int
    feasible_points: int

    @property
    def best_phi(self) -> float | None:
        return math.exp(self.best_log_phi) if self.best_point is not None else None


@dataclass(frozen=True)
class ScanReport:
    axis: str
    grid: int
    argmax_index: int
    local_maxima_count: int
    is_unimodal: bool
    is_endpoint_argmax: bool


def log_phi_grid(instance: NetworkInstance, dedicators: DedicatorSet,
                 relay_power, alpha, uplink, downlink) -> np.ndarray:
    """Log Nash product on broadcastable arrays of decision variables.

    ``uplink`` and ``downlink`` carry the pair index on their last axis.
    Data powers follow from hop balance; points that break a cap, the time
    budget, a per-pair time floor or a positivity condition give ``-inf``.
    """
    p = instance.params
    h = instance.source_relay_gains
    g = instance.relay_destination_gains
    ded = dedicators.mask
    pr = np.asarray(relay_power, dtype=float)[..., None]
    a = np.asarray(alpha, dtype=float)
    beta = np.asarray(uplink, dtype=float)
    gamma = np.asarray(downlink, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        snr_down = np.log1p(pr * g / p.noise_power)
        capacity = gamma * snr_down / math.log(2.0)
        data_power = p.noise_power / h * np.expm1(np.minimum(gamma / beta * snr_down, 700.0))
        spend = p.source_power_cap * a[..., None] * ded + data_power * beta
        log_u = np.log(capacity) - np.log(spend)
        harvest = p.conversion_efficiency * p.source_power_cap * float(np.sum(h[ded])) * a
        relay = harvest - pr[..., 0] * np.sum(gamma, axis=-1) - p.relay_fixed_cost
        val = np.sum(log_u, axis=-1) + np.log(relay)
    ok = ((relay > 0) & (a > 0) & (pr[..., 0] > 0)
          & (pr[..., 0] <= p.relay_power_cap)
          & np.all((beta > 0) & (gamma > 0) & (capacity > 0), axis=-1)
          & np.all(data_power <= p.source_power_cap * (1 + 1e-12), axis=-1)
          & np.all(beta + gamma >= p.min_pair_time_fraction * (1 - 1e-12), axis=-1)
          & (a + np.sum(beta + gamma, axis=-1) <= 1.0 + 1e-12)
          & np.isfinite(val))
    return np.where(ok, val, -np.inf)


def _relay_axis(instance, n):
    top = instance.params.relay_power_cap
    return top * 10.0 ** (-RELAY_DECADES * (1.0 - np.arange(1, n + 1) / n))


def _unit_axis(n, top=1.0):
    return top * np.arange(1, n + 1) / n


def _strategy(instance, dedicators, pr, alpha, beta, gamma):
    p = instance.params
    snr = np.log1p(pr * instance.relay_destination_gains / p.noise_power)
    data_power = np.minimum(p.noise_power / instance.source_relay_gains
                            * np.expm1(gamma / beta * snr), p.source_power_cap)
    return Strategy(
        energy_power=apply_dedicators(instance, dedicators),
        data_power=data_power,
        relay_power=pr,
        harvest_fraction=np.where(dedicators.mask, alpha, 0.0),
        uplink_fraction=beta,
        downlink_fraction=gamma,
    )


def _single_pair(instance, dedicators, n):
    relay = _relay_axis(instance, n)
    alphas = _unit_axis(n, 1.0 - instance.params.min_pair_time_fraction)
    gammas = _unit_axis(n)
    A, G = np.meshgrid(alphas, gammas, indexing="ij")
    B = 1.0 - A - G
    best = (-math.inf, None)
    feasible = 0
    for pr in relay:
        vals = log_phi_grid(instance, dedicators, pr, A, B[..., None], G[..., None])
        feasible += int(np.count_nonzero(np.isfinite(vals)))
        k = int(np.argmax(vals))
        if vals.flat[k] > best[0]:
            i, j = np.unravel_index(k, vals.shape)
            best = (float(vals.flat[k]), (pr, A[i, j], np.array([B[i, j]]), np.array([G[i, j]])))
    return best, feasible, n ** 3


def _two_pair_values(instance, dedicators, axes):
    """Log product on the product grid (relay power, alpha, gamma1, gamma2, share).

    ``share`` is the first pair's part of the time left after harvest and
    both downlinks.
    """
    pr, al, g1, g2, share = np.meshgrid(*axes, indexing="ij", sparse=True)
    rest = 1.0 - al - g1 - g2
    beta = np.stack(np.broadcast_arrays(share * rest, (1.0 - share) * rest), axis=-1)
    gamma = np.stack(np.broadcast_arrays(g1 + 0 * rest, g2 + 0 * rest), axis=-1)
    return log_phi_grid(instance, dedicators, pr + 0 * rest, al + 0 * rest, beta, gamma)


def _two_pairs(instance, dedicators, n):
    """Coarse grid, then repeated local refinement around the incumbent.

    Axes are log relay power, alpha, both downlink times and the uplink share.
    Each round lays ``ZOOM_START`` points per axis over a window of a few old
    spacings around the best point, and the search ends once every spacing is
    at most ``range / n``.
    """
    theta = instance.params.min_pair_time_fraction
    top = math.log10(instance.params.relay_power_cap)
    lo = np.array([top - RELAY_DECADES, 0.0, 0.0, 0.0, 0.0])
    hi = np.array([top, 1.0 - 2 * theta, 1.0, 1.0, 1.0])
    m = ZOOM_START
    axes = [lo[d] + (hi[d] - lo[d]) * np.arange(1, m + 1) / m for d in range(5)]
    best_val, best_point = -math.inf, None
    feasible = evaluations = 0
    for _ in range(ZOOM_ROUNDS):
        grid = [10.0 ** axes[0]] + axes[1:]
        vals = _two_pair_values(instance, dedicators, grid)
        feasible += int(np.count_nonzero(np.isfinite(vals)))
        evaluations += vals.size
        k = int(np.argmax(vals))
        if not np.isfinite(vals.flat[k]):
            break
        idx = np.unravel_index(k, vals.shape)
        centre = np.array([axes[d][idx[d]] for d in range(5)])
        if vals.flat[k] > best_val:
            best_val = float(vals.flat[k])
            best_point = centre
        spacing = np.array([(ax[-1] - ax[0]) / (ax.size - 1) for ax in axes])
        if np.all(spacing <= (hi - lo) / n):
            break
        half = ZOOM_WIDTH * spacing
        axes = [np.linspace(max(lo[d], best_point[d] - half[d]),
                            min(hi[d], best_point[d] + half[d]), m) for d in range(5)]
    if best_point is None:
        return (-math.inf, None), feasible, evaluations
    lp, alpha, g1, g2, share = best_point
    rest = 1.0 - alpha - g1 - g2
    point = (10.0 ** lp, alpha, np.array([share * rest, (1 - share) * rest]), np.array([g1, g2]))
    return (best_val, point), feasible, evaluations


def grid_oracle(instance: NetworkInstance, dedicators: DedicatorSet,
                resolution: int = 200) -> OracleResult:
    """Best Nash product on a grid over relay power and the time fractions.

    One pair: exhaustive ``resolution**3`` grid over (relay power, alpha,
    gamma) with beta taking the rest of the block. Two pairs: the same axes
    plus the second downlink time and the uplink share, searched by grid
    refinement down to spacing ``range / resolution`` on every axis.
    """
    n_pairs = instance.num_pairs
    if n_pairs == 1:
        (val, point), feasible, evals = _single_pair(instance, dedicators, resolution)
        shape = (resolution,) * 3
    elif n_pairs == 2:
        (val, point), feasible, evals = _two_pairs(instance, dedicators, resolution)
        shape = (resolution,) * 5
    else:
        raise UnsupportedSizeError("grid oracle supports one or two pairs")
    if point is None or not math.isfinite(val):
        return OracleResult(-math.inf, None, shape, evals, feasible)
    pr, alpha, beta, gamma = point
    strategy = _strategy(instance, dedicators, pr, alpha, np.asarray(beta), np.asarray(gamma))
    return OracleResult(val, strategy, shape, evals, feasible)


def _report(axis, values):
    values = np.asarray(values, dtype=float)
    count, arg = count_local_maxima(values, PLATEAU_RTOL)
    finite = np.isfinite(values)
    if finite.any():
        top = values[finite].max()
        span = np.abs(values[finite] - top) <= PLATEAU_RTOL * max(abs(top), 1e-300)
        flat = bool(span.all())
    else:
        flat = True
    endpoint = flat or arg in (0, values.size - 1)
    return ScanReport(axis=axis, grid=int(values.size), argmax_index=arg,
                      local_maxima_count=count, is_unimodal=count <= 1,
                      is_endpoint_argmax=bool(endpoint))


def relay_power_scan_values(instance: NetworkInstance, strategy: Strategy,
                            dedicators: DedicatorSet, grid: int = 1000) -> np.ndarray:
    alloc = TimeAllocation(strategy.alpha, strategy.downlink_fraction, strategy.uplink_fraction)
    coeffs = power_coefficients(instance, dedicators, alloc)
    if not coeffs.feasible:
        return np.full(grid, -np.inf)
    return coeffs.log_objective(coeffs.upper_bound * np.arange(1, grid + 1) / grid)


def harvest_scan_values(instance: NetworkInstance, strategy: Strategy,
                        dedicators: DedicatorSet, grid: int = 1000) -> np.ndarray:
    """Log product along alpha with powers fixed and downlink times rescaled.

    Downlink times are scaled by a common factor to keep the budget, uplink
    times follow from hop balance, and alpha runs over the range where every
    pair still meets its time floor.
    """
    tc = time_coefficients(instance, dedicators, strategy.data_power, strategy.relay_power)
    base = strategy.downlink_fraction
    used = float(tc.weights @ base)
    smin = float(np.max(tc.lower / base))
    alpha_hi = 1.0 - smin * used
    alphas = alpha_hi * np.arange(1, grid + 1) / grid
    scale = (1.0 - alphas) / used
    return tc.log_objective_grid(alphas, scale[:, None] * base)


def unimodality_scan(instance: NetworkInstance, strategy: Strategy, axis: str,
                     grid: int = 1000, dedicators: DedicatorSet | None = None) -> ScanReport:
    """Count peaks of the Nash product along one axis, all else fixed.

    ``relay_power`` moves the relay power with data powers kept balanced;
    ``harvest_fraction`` moves alpha as in :func:`harvest_scan_values`.
    """
    if dedicators is None:
        dedicators = DedicatorSet(tuple(strategy.energy_power > 0))
    if axis == "relay_power":
        values = relay_power_scan_values(instance, strategy, dedicators, grid)
    elif axis == "harvest_fraction":
        values = harvest_scan_values(instance, strategy, dedicators, grid)
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return _report(axis, values)


def endpoint_scan_energy_power(instance: NetworkInstance, strategy: Strategy, i: int,
                               grid: int = 201) -> ScanReport:
    """Scan source i's energy power over ``[0, P0]`` with everything else fixed."""
    p0 = instance.params.source_power_cap
    values = []
    for level in p0 * np.arange(grid) / (grid - 1):
        ep = strategy.energy_power.copy()
        ep[i] = level
        values.append(log_nash_product(instance, strategy.replace(energy_power=ep)))
    return _report(f"energy_power({i})", values)
