"""Data-power subproblem: the relay power, with source powers slaved to it.

For a fixed time split, each source's data power is chosen so its uplink
carries exactly the bits the relay forwards. The Nash product then depends on
the relay power alone, through

    prod_i  gamma_i log2(1 + L1_i P) / (L3_i ((1 + L1_i P)^L2_i - 1) + L4_i)
          * (K1 - K2 P),

maximised over ``0 <= P <= upper_bound``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .config import SolverConfig
from .dedicators import DedicatorSet, apply_dedicators
from .network import NetworkInstance
from .optimize import count_local_maxima, golden_section_max
from .timediv import TimeAllocation

LN2 = math.log(2.0)
# The box stops this far (relatively) short of the relay break-even power.
POLE_MARGIN = 1e-9
# Exponents above this overflow a double.
_MAX_EXP = 700.0


class DegenerateTimeError(ValueError):
    """A pair has zero uplink or downlink time."""


class CapViolationError(ValueError):
    """A recovered source power exceeds the source power cap."""


class NonUnimodalError(RuntimeError):
    """The power objective has more than one peak on its box (debug mode)."""


def _expm1_capped(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return np.where(x > _MAX_EXP, np.inf, np.expm1(np.minimum(x, _MAX_EXP)))


@dataclass(frozen=True)
class PowerCoefficients:
    """Constants of the relay-power objective.

    l1 = |g|^2 / noise, l2 = gamma / beta, l3 = beta * noise / |h|^2,
    l4 = alpha_i * P_i^s1, k1 = harvested energy minus fixed cost,
    k2 = total downlink time. ``downlink`` keeps gamma so the objective is the
    actual Nash product rather than a rescaled one.
    """

    l1: np.ndarray
    l2: np.ndarray
    l3: np.ndarray
    l4: np.ndarray
    k1: float
    k2: float
    downlink: np.ndarray
    upper_bound: float

    @property
    def feasible(self) -> bool:
        return self.k1 > 0 and self.upper_bound > 0

    @property
    def pole(self) -> float:
        """Relay power at which forwarding eats all harvested energy."""
        return self.k1 / self.k2

    def log_objective(self, relay_power):
        """Natural log of the objective; ``-inf`` outside ``0 < P < K1/K2``.

        Accepts a scalar or an array of relay powers.
        """
        p = np.asarray(relay_power, dtype=float)
        pc = p[..., None]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            y = np.log1p(self.l1 * pc)
            spend = self.l3 * _expm1_capped(self.l2 * y) + self.l4
            val = (np.sum(np.log(self.downlink * y / LN2) - np.log(spend), axis=-1)
                   + np.log(self.k1 - self.k2 * p))
        ok = (p > 0) & (self.k1 - self.k2 * p > 0) & np.isfinite(val)
        out = np.where(ok, val, -np.inf)
        return float(out) if out.ndim == 0 else out

    def log_gradient(self, relay_power):
        """Derivative of :meth:`log_objective` with respect to the relay power."""
        p = np.asarray(relay_power, dtype=float)
        pc = p[..., None]
        x1 = 1.0 + self.l1 * pc
        y = np.log(x1)
        growth = np.exp(self.l2 * y)
        spend = self.l3 * (growth - 1.0) + self.l4
        terms = self.l1 / (x1 * y) - self.l3 * self.l2 * self.l1 * growth / (x1 * spend)
        out = np.sum(terms, axis=-1) - self.k2 / (self.k1 - self.k2 * p)
        return float(out) if out.ndim == 0 else out


def source_power_caps_on_relay(instance: NetworkInstance, allocation: TimeAllocation) -> np.ndarray:
    """Largest relay power at which each source's balancing data power stays capped."""
    p = instance.params
    snr_cap = p.source_power_cap * instance.source_relay_gains / p.noise_power
    ratio = allocation.uplink_fraction / allocation.downlink_fraction
    return p.noise_power / instance.relay_destination_gains * _expm1_capped(ratio * np.log1p(snr_cap))


def power_coefficients(instance: NetworkInstance, dedicators: DedicatorSet,
                       allocation: TimeAllocation, k1_form: str = "harvest") -> PowerCoefficients:
    p = instance.params
    beta = allocation.uplink_fraction
    gamma = allocation.downlink_fraction
    if np.any(~(beta > 0)) or np.any(~(gamma > 0)):
        raise DegenerateTimeError("every pair needs positive uplink and downlink time")
    t = p.block_time
    energy_power = apply_dedicators(instance, dedicators)
    alpha_i = allocation.per_source_harvest(dedicators)
    if k1_form == "harvest":
        harvest = p.conversion_efficiency * t * float(np.sum(
            alpha_i * energy_power * instance.source_relay_gains))
    elif k1_form == "literal":
        harvest = p.conversion_efficiency * t * float(np.sum(alpha_i * energy_power))
    else:
        raise ValueError(f"unknown k1_form {k1_form!r}")
    k1 = harvest - p.relay_fixed_cost * t
    k2 = float(np.sum(gamma)) * t
    ub = min(p.relay_power_cap, float(np.min(source_power_caps_on_relay(instance, allocation))))
    if k1 > 0:
        ub = min(ub, (1.0 - POLE_MARGIN) * k1 / k2)
    else:
        ub = 0.0
    return PowerCoefficients(
        l1=instance.relay_destination_gains / p.noise_power,
        l2=gamma / beta,
        l3=beta * t * p.noise_power / instance.source_relay_gains,
        l4=alpha_i * t * energy_power,
        k1=k1,
        k2=k2,
        downlink=gamma * t,
        upper_bound=ub,
    )


def source_powers_from_relay(relay_power: float, instance: NetworkInstance,
                             allocation: TimeAllocation, rtol: float = 1e-9) -> np.ndarray:
    """Data power of each source that balances its uplink against the relay hop."""
    p = instance.params
    beta = allocation.uplink_fraction
    if np.any(~(beta > 0)):
        raise DegenerateTimeError("every pair needs positive uplink time")
    ratio = allocation.downlink_fraction / beta
    y = np.log1p(relay_power * instance.relay_destination_gains / p.noise_power)
    out = p.noise_power / instance.source_relay_gains * _expm1_capped(ratio * y)
    cap = p.source_power_cap
    if np.any(out > cap * (1.0 + rtol)):
        raise CapViolationError(f"source data power {out.max()} exceeds the cap {cap}")
    return np.minimum(out, cap)


def _check_unimodal(coeffs: PowerCoefficients, points: int = 1000) -> None:
    grid = coeffs.upper_bound * np.arange(1, points + 1) / points
    count, _ = count_local_maxima(coeffs.log_objective(grid))
    if count > 1:
        raise NonUnimodalError(f"power objective has {count} local maxima on its box")


# The maximiser can sit many decades below the box edge, so the search runs
# on log(P) over this many e-folds below the upper end.
LOG_SPAN = 80.0
LOG_XTOL = 1e-13
# Smallest uplink log-SNR a dedicator may be given by the split step.
SPLIT_X_FLOOR = 1e-12


def _log_golden(f, hi: float, eps1: float) -> float:
    """Golden-section on ``log P`` over ``[hi * e**-LOG_SPAN, hi]``.

    The bracket shrinks until it is narrower than both ``eps1`` in P and
    ``LOG_XTOL`` relative.
    """
    lo = math.log(hi) - LOG_SPAN
    xtol = min(LOG_XTOL, eps1 / hi)
    u, _ = golden_section_max(lambda u: f(math.exp(u)), lo, math.log(hi), xtol)
    return min(math.exp(u), hi)


def _golden(coeffs: PowerCoefficients, cfg: SolverConfig) -> float:
    return _log_golden(coeffs.log_objective, coeffs.upper_bound, cfg.epsilon1)


def _dual(coeffs: PowerCoefficients, cfg: SolverConfig) -> float:
    """Multiplier iteration on the box constraints ``0 <= P <= upper_bound``.

    Each step minimises the Lagrangian (negative log objective plus
    multiplier terms) over the open interval where the objective is defined,
    then moves both multipliers by a projected step ``c / sqrt(t)``.
    """
    ub = coeffs.upper_bound
    hi = (1.0 - POLE_MARGIN) * coeffs.pole
    scale = 1.0 / ub ** 2
    rho_low = rho_high = 0.0
    prev = None
    p = ub
    for t in range(1, cfg.max_inner_iterations + 1):
        def lagrangian(x, rl=rho_low, rh=rho_high):
            return coeffs.log_objective(x) + rl * x - rh * (x - ub)

        p = _log_golden(lagrangian, hi, cfg.epsilon1)
        step = scale / math.sqrt(t)
        rho_low = max(0.0, rho_low + step * (0.0 - p))
        rho_high = max(0.0, rho_high + step * (p - ub))
        if prev is not None and abs(p - prev) < cfg.epsilon1 and p <= ub + cfg.epsilon1:
            break
        prev = p
    return float(min(max(p, 0.0), ub))


def solve_relay_power(coeffs: PowerCoefficients, cfg: SolverConfig | None = None,
                      mode: str | None = None) -> float | None:
    """Relay power maximising the Nash product; ``None`` when the box is infeasible."""
    cfg = cfg or SolverConfig()
    mode = mode or cfg.power_mode
    if not coeffs.feasible:
        return None
    if cfg.debug:
        _check_unimodal(coeffs)
    if mode == "golden":
        return _golden(coeffs, cfg)
    if mode == "dual":
        return _dual(coeffs, cfg)
    raise ValueError(f"unknown power mode {mode!r}")


@dataclass(frozen=True)
class _SplitProblem:
    """Relay power and hop splits at fixed alpha and per-pair data time.

    Variables are ``u = log P^r`` and, for every dedicator, its uplink
    log-SNR ``x = log(1 + P^s0 |h|^2 / noise)``. Given both, the pair's time
    ``t`` divides as ``beta = t y / (x + y)`` and ``gamma = t x / (x + y)``
    with ``y`` the downlink log-SNR, which is hop balance. Enjoyers keep their
    downlink at the floor, where their utility is highest.
    """

    l1: np.ndarray
    unit_cost: np.ndarray  # noise * T / |h|^2
    harvest_spend: np.ndarray  # alpha_i * T * P^s1_i
    total: np.ndarray
    dedicator: np.ndarray
    gamma_floor: float
    k1: float
    block_time: float

    def split(self, u, x):
        p = math.exp(u)
        y = np.log1p(self.l1 * p)
        xs = np.where(self.dedicator, x, 0.0)
        beta = np.where(self.dedicator, self.total * y / (xs + y), self.total - self.gamma_floor)
        gamma = self.total - beta
        return p, y, beta, gamma

    def value_and_grad(self, v):
        u, x = v[0], np.asarray(v[1:])
        xd = np.zeros_like(self.total)
        xd[self.dedicator] = x
        p, y, beta, gamma = self.split(u, xd)
        dy = self.l1 * p / (1.0 + self.l1 * p)  # dy/du
        ded = self.dedicator
        xe = np.where(ded, xd, gamma * y / beta)
        growth = np.exp(xe)
        em1 = np.expm1(xe)
        spend = self.harvest_spend + self.unit_cost * beta * em1
        relay = self.k1 - p * self.block_time * float(np.sum(gamma))
        if not relay > 0 or np.any(~(spend > 0)) or np.any(~(xe > 0)):
            return math.inf, np.zeros_like(v)
        val = float(np.sum(np.log(beta * xe / LN2) - np.log(spend)) + math.log(relay))
        a = xd + y
        # dedicators: derivatives in x (y fixed) and in y (x fixed)
        d_x = -1.0 / a + 1.0 / np.where(ded, xd, 1.0) - self.unit_cost * beta * (growth - em1 / a) / spend
        d_y_ded = gamma / (a * beta) - self.unit_cost * gamma * em1 / (a * spend)
        # enjoyers: beta fixed, x = gamma y / beta
        q = gamma / beta
        d_y_enj = 1.0 / y - q * growth / em1
        d_y = np.where(ded, d_y_ded, d_y_enj)
        dgamma_dy = np.where(ded, -gamma / a, 0.0)
        t = self.block_time
        d_u = float(np.sum(d_y * dy)) + (-p * t * float(np.sum(gamma))
                                         - p * t * float(np.sum(dgamma_dy * dy))) / relay
        d_xr = d_x - p * t * (beta / a) / relay
        grad = np.concatenate([[d_u], d_xr[ded]])
        return val, grad


def _split_problem(instance, dedicators, allocation, cfg):
    p = instance.params
    energy_power = apply_dedicators(instance, dedicators)
    alpha_i = allocation.per_source_harvest(dedicators)
    harvest = p.conversion_efficiency * p.block_time * float(np.sum(
        alpha_i * energy_power * instance.source_relay_gains))
    return _SplitProblem(
        l1=instance.relay_destination_gains / p.noise_power,
        unit_cost=p.block_time * p.noise_power / instance.source_relay_gains,
        harvest_spend=alpha_i * p.block_time * energy_power,
        total=allocation.uplink_fraction + allocation.downlink_fraction,
        dedicator=dedicators.mask & (alpha_i > 0),
        gamma_floor=cfg.gamma_min,
        k1=harvest - p.relay_fixed_cost * p.block_time,
        block_time=p.block_time,
    )


def rebalance_hops(instance: NetworkInstance, dedicators: DedicatorSet,
                   allocation: TimeAllocation, relay_power: float,
                   cfg: SolverConfig | None = None):
    """Jointly move the relay power and every pair's uplink/downlink split.

    Alpha and each pair's ``beta + gamma`` stay fixed and data powers stay on
    hop balance. Returns ``(relay_power, allocation)``; the input is returned
    unchanged when the bounded quasi-Newton search does not improve the log
    Nash product or lands outside the constraints.
    """
    cfg = cfg or SolverConfig()
    p = instance.params
    prob = _split_problem(instance, dedicators, allocation, cfg)
    if not (prob.k1 > 0 and relay_power > 0) or np.any(prob.total <= cfg.gamma_min):
        return relay_power, allocation
    y = np.log1p(prob.l1 * relay_power)
    gamma0 = allocation.downlink_fraction
    x0 = (gamma0 * y / allocation.uplink_fraction)[prob.dedicator]
    x_cap = np.log1p(p.source_power_cap * instance.source_relay_gains / p.noise_power)
    u0 = math.log(relay_power)
    # keeps the relay utility positive for any split
    pole = prob.k1 / (p.block_time * float(np.sum(np.where(prob.dedicator, prob.total, cfg.gamma_min))))
    u_hi = math.log(min(p.relay_power_cap, (1.0 - POLE_MARGIN) * pole))
    u_lo = min(u0, u_hi) - LOG_SPAN
    start = np.concatenate([[min(u0, u_hi)], np.minimum(x0, x_cap[prob.dedicator])])
    bounds = [(u_lo, u_hi)] + [(SPLIT_X_FLOOR, c) for c in x_cap[prob.dedicator]]

    def fun(v):
        val, grad = prob.value_and_grad(v)
        return -val, -grad

    f0, _ = fun(start)
    if not math.isfinite(f0):
        return relay_power, allocation
    res = optimize.minimize(fun, start, jac=True, method="L-BFGS-B", bounds=bounds,
                            options={"maxiter": cfg.max_inner_iterations,
                                     "ftol": 1e-15, "gtol": 1e-12})
    if not (math.isfinite(res.fun) and res.fun < f0):
        return relay_power, allocation
    xd = np.zeros(instance.num_pairs)
    xd[prob.dedicator] = res.x[1:]
    new_power, _, beta, gamma = prob.split(float(res.x[0]), xd)
    if np.any(gamma < np.where(prob.dedicator, 0.0, cfg.gamma_min) * (1 - 1e-12)) or np.any(beta <= 0):
        return relay_power, allocation
    return new_power, TimeAllocation(allocation.harvest_fraction, gamma, beta)
