"""Time-division subproblem: harvest time and per-pair hop times at fixed powers.

With powers fixed, keeping both hops of pair i balanced ties its uplink time
to its downlink time, ``beta_i = D5_i * gamma_i``. The budget then reads
``alpha + sum((1 + D5_i) * gamma_i) = 1`` and the free variables are the
downlink times ``gamma``; ``alpha`` is eliminated by the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SolverConfig
from .dedicators import DedicatorSet, apply_dedicators
from .network import NetworkInstance
from .optimize import project_weighted_box


class InfeasibleTimeError(ValueError):
    """The per-pair time floors leave no room for a harvest phase."""


class DegeneratePowerError(ValueError):
    """A zero data power makes the hop-rate ratio undefined."""


@dataclass(frozen=True)
class TimeAllocation:
    harvest_fraction: float
    downlink_fraction: np.ndarray
    uplink_fraction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "harvest_fraction", float(self.harvest_fraction))
        for name in ("downlink_fraction", "uplink_fraction"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def per_source_harvest(self, dedicators: DedicatorSet) -> np.ndarray:
        """Harvest fraction of every source: shared alpha for dedicators, else 0."""
        return np.where(dedicators.mask, self.harvest_fraction, 0.0)

    def used(self) -> float:
        return self.harvest_fraction + float(np.sum(self.downlink_fraction + self.uplink_fraction))


@dataclass(frozen=True)
class TimeCoefficients:
    """Constants of the time subproblem (base-2 logs, unit block time).

    d1: downlink bits per unit downlink time; d2: energy power (P0 for
    dedicators, 0 otherwise); d3: source energy per unit downlink time;
    d4: relay power; d5: uplink-to-downlink time ratio; f1: harvested energy
    per unit harvest time; f2: fixed relay cost.
    """

    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray
    d5: np.ndarray
    f1: float
    f2: float
    min_pair_time: float

    @property
    def weights(self) -> np.ndarray:
        return 1.0 + self.d5

    @property
    def lower(self) -> np.ndarray:
        """Smallest downlink times meeting each pair's time floor."""
        return self.min_pair_time / self.weights

    def alpha_of(self, gamma) -> np.ndarray | float:
        return 1.0 - np.asarray(gamma) @ self.weights

    def log_objective(self, gamma) -> float:
        """Log Nash product as a function of the downlink times alone."""
        g = np.asarray(gamma, dtype=float)
        alpha = 1.0 - g @ self.weights
        relay = self.f1 * alpha - self.f2 - self.d4 @ g
        if not (alpha > 0 and relay > 0 and np.all(g > 0)):
            return -math.inf
        spend = self.d2 * alpha + self.d3 * g
        return float(np.sum(np.log(self.d1 * g) - np.log(spend)) + math.log(relay))

    def log_objective_grid(self, alpha, gamma) -> np.ndarray:
        """Vectorised log objective at explicit ``alpha`` and ``gamma[..., N]``.

        The budget is not enforced here; callers pick consistent points.
        """
        alpha = np.asarray(alpha, dtype=float)
        g = np.asarray(gamma, dtype=float)
        relay = self.f1 * alpha - self.f2 - g @ self.d4
        spend = self.d2 * alpha[..., None] + self.d3 * g
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.sum(np.log(self.d1 * g) - np.log(spend), axis=-1) + np.log(relay)
        ok = (alpha > 0) & (relay > 0) & np.all(g > 0, axis=-1)
        return np.where(ok, val, -np.inf)

    def gradient(self, gamma) -> np.ndarray:
        """Gradient of :meth:`log_objective` with alpha eliminated."""
        g = np.asarray(gamma, dtype=float)
        w = self.weights
        alpha = 1.0 - g @ w
        relay = self.f1 * alpha - self.f2 - self.d4 @ g
        spend = self.d2 * alpha + self.d3 * g
        return (1.0 / g - self.d3 / spend + w * np.sum(self.d2 / spend)
                - (self.f1 * w + self.d4) / relay)

    def hessian(self, gamma) -> np.ndarray:
        """Hessian of :meth:`log_objective` with alpha eliminated."""
        g = np.asarray(gamma, dtype=float)
        w = self.weights
        alpha = 1.0 - g @ w
        relay = self.f1 * alpha - self.f2 - self.d4 @ g
        spend = self.d2 * alpha + self.d3 * g
        # row i: derivative of spend_i with respect to every gamma_j
        a = np.diag(self.d3) - np.outer(self.d2, w)
        b = -(self.f1 * w + self.d4)
        return (-np.diag(1.0 / g ** 2) + (a / spend[:, None] ** 2).T @ a
                - np.outer(b, b) / relay ** 2)

    def allocation(self, gamma) -> TimeAllocation:
        g = np.asarray(gamma, dtype=float)
        return TimeAllocation(harvest_fraction=1.0 - g @ self.weights,
                              downlink_fraction=g, uplink_fraction=self.d5 * g)


def time_coefficients(instance: NetworkInstance, dedicators: DedicatorSet,
                      data_power, relay_power: float) -> TimeCoefficients:
    p = instance.params
    data_power = np.asarray(data_power, dtype=float)
    if not (relay_power > 0 and np.all(data_power > 0)):
        raise DegeneratePowerError("time coefficients need positive data and relay powers")
    down = np.log2(1.0 + relay_power * instance.relay_destination_gains / p.noise_power)
    up = np.log2(1.0 + data_power * instance.source_relay_gains / p.noise_power)
    d5 = down / up
    energy_power = apply_dedicators(instance, dedicators)
    t = p.block_time
    return TimeCoefficients(
        d1=t * down,
        d2=energy_power * t,
        d3=data_power * t * d5,
        d4=np.full(instance.num_pairs, relay_power * t),
        d5=d5,
        f1=p.conversion_efficiency * t * float(np.sum(energy_power * instance.source_relay_gains)),
        f2=p.relay_fixed_cost * t,
        min_pair_time=p.min_pair_time_fraction,
    )


def initial_allocation(instance: NetworkInstance, dedicators: DedicatorSet,
                       cfg: SolverConfig | None = None) -> TimeAllocation | None:
    """Strictly feasible starting split, or ``None`` if no split can pay the relay.

    The harvest time is sized so that harvested energy is twice the fixed
    relay cost (halfway to the largest admissible harvest time when that is
    out of reach, or when the cost is zero). The rest of the block is shared
    equally by the pairs and split evenly between uplink and downlink.
    """
    cfg = cfg or SolverConfig()
    p = instance.params
    n = instance.num_pairs
    rate = p.conversion_efficiency * p.block_time * float(np.sum(
        apply_dedicators(instance, dedicators) * instance.source_relay_gains))
    alpha_max = 1.0 - n * p.min_pair_time_fraction
    if alpha_max <= cfg.alpha_min:
        raise InfeasibleTimeError("per-pair time floors leave no harvest time")
    if not rate * alpha_max > p.relay_fixed_cost:
        return None
    alpha_need = p.relay_fixed_cost / rate
    alpha = 2.0 * alpha_need
    if p.relay_fixed_cost == 0 or alpha >= alpha_max:
        alpha = 0.5 * (alpha_need + alpha_max)
    alpha = max(alpha, cfg.alpha_min)
    share = (1.0 - alpha) / n / 2.0
    return TimeAllocation(alpha, np.full(n, share), np.full(n, share))


def _initial_gamma(coeffs: TimeCoefficients, cfg: SolverConfig) -> np.ndarray | None:
    """Interior starting point for the downlink times with a positive relay margin."""
    w, lo, n = coeffs.weights, coeffs.lower, coeffs.d1.size
    alpha_max = 1.0 - w @ lo
    if alpha_max <= cfg.alpha_min:
        raise InfeasibleTimeError("per-pair time floors leave no harvest time")
    # relay margin along gamma = lo + s * extra, alpha = alpha_max - s * (w @ extra)
    if not coeffs.f1 * alpha_max - coeffs.f2 - coeffs.d4 @ lo > 0:
        return None
    extra = (1.0 - cfg.alpha_min - w @ lo) / (w @ np.ones(n)) * np.ones(n)
    for s in (0.5, 0.25, 0.1, 0.03, 0.01, 1e-3, 1e-4, 0.0):
        g = lo * (1.0 + 1e-9) + s * extra
        if math.isfinite(coeffs.log_objective(g)):
            return g
    return None


# Coordinates this close (relatively) to a bound count as on it.
ACTIVE_RTOL = 1e-12


def _newton_direction(coeffs: TimeCoefficients, z, g, budget):
    """Newton direction on the face of active bounds, or ``None``.

    Pairs on their time floor whose gradient points outward are held fixed;
    when alpha is at its minimum and the free pairs would grow, their total
    is held fixed as well. ``None`` when the reduced Hessian is not negative
    definite.
    """
    w = coeffs.weights
    floor = coeffs.min_pair_time
    free = ~((z <= floor * (1.0 + ACTIVE_RTOL)) & (g < 0))
    if not free.any():
        return None
    h = coeffs.hessian(z / w) / np.outer(w, w)
    hf = h[np.ix_(free, free)]
    gf = g[free]
    try:
        np.linalg.cholesky(-hf)
        d = np.linalg.solve(-hf, gf)
    except np.linalg.LinAlgError:
        return None
    if z.sum() >= budget * (1.0 - ACTIVE_RTOL) and d.sum() > 0:
        # keep sum(z) on the budget: Newton step restricted to sum(d) = 0
        ones = np.ones_like(d)
        u = np.linalg.solve(-hf, ones)
        d = d - (d.sum() / u.sum()) * u
    out = np.zeros_like(z)
    out[free] = d
    return out if g @ out > 0 else None


def _projected_gradient(coeffs: TimeCoefficients, gamma0, cfg: SolverConfig):
    """Projected ascent with Armijo backtracking.

    Iterates on each pair's total data time ``z = (1 + D5) gamma``, which
    keeps the problem well scaled when the hop-rate ratios differ by orders
    of magnitude. Each iteration first tries a projected Newton step on the
    face of active bounds (the objective's curvature grows like
    ``1 / alpha**2`` when the harvest phase is short, which stalls plain
    gradient steps) and falls back to a Barzilai-Borwein gradient step.
    """
    w = coeffs.weights
    lo = w * coeffs.lower
    ones = np.ones_like(w)
    budget = 1.0 - cfg.alpha_min

    def f(z):
        return coeffs.log_objective(z / w)

    def grad(z):
        return coeffs.gradient(z / w) / w

    def armijo(x, fx, gx, direction, t):
        while t >= 1e-20:
            y = project_weighted_box(x + t * direction, lo, ones, budget)
            fy = f(y)
            if fy >= fx + 1e-4 * gx @ (y - x):
                return y, fy, t
            t *= 0.5
        return None

    x = project_weighted_box(w * np.asarray(gamma0, dtype=float), lo, ones, budget)
    fx = f(x)
    gx = grad(x)
    step = 1e-3 / max(1.0, float(np.max(np.abs(gx))))
    iters = 0
    for iters in range(1, cfg.max_inner_iterations + 1):
        found = None
        d = _newton_direction(coeffs, x, gx, budget)
        if d is not None:
            found = armijo(x, fx, gx, d, 1.0)
        if found is None:
            found = armijo(x, fx, gx, gx, step)
        if found is None:
            break
        y, fy, t = found
        s = y - x
        if not np.any(s):
            break
        gy = grad(y)
        yk = gx - gy
        sy = s @ yk
        step = (s @ s) / sy if sy > 0 else 10.0 * t
        step = min(max(step, 1e-12), 1e6)
        x_old_alpha = 1.0 - x.sum()
        x, fx, gx = y, fy, gy
        residual = np.max(np.abs(project_weighted_box(x + gx, lo, ones, budget) - x))
        if abs((1.0 - x.sum()) - x_old_alpha) <= cfg.epsilon2 * 1e-3 and residual <= cfg.epsilon2:
            break
    return x / w, iters


def _dual_ascent(coeffs: TimeCoefficients, gamma0, cfg: SolverConfig):
    """Primal-dual iteration on the Lagrangian of the time subproblem.

    Works on ``alpha`` and the per-pair data times ``z = (1 + D5) gamma``.
    Each primal step follows the Lagrangian gradient, coupled so that
    ``alpha + sum(z)`` stays 1, with normalised length ``kappa0 / sqrt(k)``
    shrunk by backtracking until the log objective does not drop. A pair at
    its time floor carries a multiplier equal to the gradient component that
    pushes it below the floor, which removes that pair from the step.
    """
    w = coeffs.weights
    floor = coeffs.min_pair_time
    n = w.size
    z = w * np.array(gamma0, dtype=float)
    alpha = 1.0 - z.sum()
    f_cur = coeffs.log_objective(z / w)
    k = 0
    outer = 0
    for outer in range(1, cfg.max_inner_iterations + 1):
        alpha_start, f_start = alpha, f_cur
        for _ in range(50):
            k += 1
            gamma = z / w
            relay = coeffs.f1 * alpha - coeffs.f2 - coeffs.d4 @ gamma
            spend = coeffs.d2 * alpha + coeffs.d3 * gamma
            g_alpha = -np.sum(coeffs.d2 / spend) + coeffs.f1 / relay
            g_z = (1.0 / gamma - coeffs.d3 / spend - coeffs.d4 / relay) / w
            full = np.concatenate(([g_alpha], g_z))
            at_floor = np.concatenate(([alpha <= cfg.alpha_min * (1.0 + ACTIVE_RTOL)],
                                       z <= floor * (1.0 + ACTIVE_RTOL)))
            free = np.ones(n + 1, dtype=bool)
            direction = np.zeros(n + 1)
            for _ in range(n + 1):
                direction = np.where(free, full - full[free].mean(), 0.0)
                # floor multipliers: active pairs that would leave the box
                blocked = free & at_floor & (direction < 0)
                if not blocked.any():
                    break
                free &= ~blocked
            norm = float(np.linalg.norm(direction))
            if norm == 0.0 or free.sum() < 2:
                break
            direction /= norm
            lower = np.concatenate(([cfg.alpha_min], np.full(n, floor)))
            point = np.concatenate(([alpha], z))
            shrinking = direction < 0
            t_max = np.min((point[shrinking] - lower[shrinking]) / -direction[shrinking],
                           initial=math.inf)
            t = min(cfg.dual_time_step / math.sqrt(k), t_max)
            while t > 1e-300:
                cand = np.maximum(point + t * direction, lower)
                cand[0] = 1.0 - cand[1:].sum()
                f_new = coeffs.log_objective(cand[1:] / w)
                if f_new >= f_cur and cand[0] >= cfg.alpha_min:
                    break
                t *= 0.5
            else:
                break
            alpha, z, f_cur = float(cand[0]), cand[1:], f_new
        if (abs(alpha - alpha_start) < cfg.epsilon2 * 1e-3
                and f_cur - f_start <= 1e-12 * max(1.0, abs(f_cur))):
            break
    return z / w, outer


def solve_time_division(coeffs: TimeCoefficients, cfg: SolverConfig | None = None,
                        start: TimeAllocation | None = None,
                        mode: str | None = None) -> TimeAllocation | None:
    """Best time split for fixed powers; ``None`` if the relay cannot break even.

    ``substitution`` (default) eliminates the harvest time through the
    budget and runs projected gradient ascent on the downlink times.
    ``dual`` runs the multiplier iteration of :func:`_dual_ascent`.
    ``start`` seeds the iteration when it is strictly feasible.
    """
    cfg = cfg or SolverConfig()
    mode = mode or cfg.time_mode
    gamma0 = None
    if start is not None:
        g = np.asarray(start.downlink_fraction, dtype=float)
        # pairs sitting exactly on their time floor are still a valid start
        if (np.all(g >= coeffs.lower * (1.0 - 1e-9))
                and math.isfinite(coeffs.log_objective(g))):
            gamma0 = g
    if gamma0 is None:
        gamma0 = _initial_gamma(coeffs, cfg)
        if gamma0 is None:
            return None
    if mode == "substitution":
        gamma, _ = _projected_gradient(coeffs, gamma0, cfg)
    elif mode == "dual":
        gamma, _ = _dual_ascent(coeffs, gamma0, cfg)
    else:
        raise ValueError(f"unknown time mode {mode!r}")
    if not math.isfinite(coeffs.log_objective(gamma)):
        return None
    return coeffs.allocation(gamma)
