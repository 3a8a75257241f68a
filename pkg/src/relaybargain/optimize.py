"""Small numerical helpers shared by the subproblem solvers and the oracle."""

from __future__ import annotations

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# Relative tolerance below which neighbouring samples count as equal.
PLATEAU_RTOL = 1e-12


def golden_section_max(f, a: float, b: float, xtol: float, max_iter: int = 500):
    """Maximise a unimodal scalar function on ``[a, b]``.

    Shrinks the bracket until it is narrower than ``xtol``. Returns the best
    ``(x, f(x))`` seen, the right endpoint included, so a maximum sitting on
    the upper bound is found exactly.
    """
    if b < a:
        raise ValueError("empty interval")
    best_x, best_f = b, f(b)
    if b - a <= xtol:
        return best_x, best_f
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def count_local_maxima(values, rtol: float = PLATEAU_RTOL) -> tuple[int, int]:
    """Count strict local maxima of a sampled curve.

    Runs of samples equal within ``rtol`` (relative) collapse to one plateau;
    ``-inf`` samples (infeasible points) form plateaus of their own. A run is
    a local maximum when it is higher than each neighbouring run, so an
    endpoint maximum counts. Returns ``(count, index of the global max)``.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0, -1
    if not np.any(np.isfinite(v)):
        return 0, 0
    levels = [v[0]]
    for x in v[1:]:
        last = levels[-1]
        same = (x == last) or (
            math.isfinite(x) and math.isfinite(last)
            and abs(x - last) <= rtol * max(abs(x), abs(last)))
        if not same:
            levels.append(x)
    count = 0
    for k, x in enumerate(levels):
        if not math.isfinite(x):
            continue
        left = levels[k - 1] if k > 0 else -math.inf
        right = levels[k + 1] if k + 1 < len(levels) else -math.inf
        if x > left and x > right:
            count += 1
    return count, int(np.nanargmax(np.where(np.isfinite(v), v, -np.inf)))


def project_weighted_box(y, lower, weights, budget: float):
    """Euclidean projection onto ``{x >= lower, weights @ x <= budget}``.

    The weights must be positive and ``weights @ lower <= budget``. With
    multiplier ``mu`` on the budget, ``x = max(y - mu * weights, lower)``;
    ``weights @ x`` is piecewise linear in ``mu`` with a kink where each
    coordinate hits its floor, so ``mu`` is found exactly by sorting the kinks.
    """
    y = np.asarray(y, dtype=float)
    lower = np.asarray(lower, dtype=float)
    weights = np.asarray(weights, dtype=float)
    x = np.maximum(y, lower)
    if weights @ x <= budget:
        return x
    kinks = (y - lower) / weights
    order = np.argsort(kinks)
    k_sorted = kinks[order]
    w2 = (weights ** 2)[order]
    # budget use just below kink j: floors for indices < j, free for the rest
    floor_part = np.concatenate(([0.0], np.cumsum((weights * lower)[order])))
    free_y = np.cumsum((weights * y)[order][::-1])[::-1]
    free_w2 = np.cumsum(w2[::-1])[::-1]
    mu = k_sorted[-1]
    for j in range(k_sorted.size):
        # coordinates order[j:] are free on the segment ending at kink j
        cand = (floor_part[j] + free_y[j] - budget) / free_w2[j]
        if cand <= k_sorted[j] and (j == 0 or cand >= k_sorted[j - 1]):
            mu = cand
            break
    x = np.maximum(y - max(mu, 0.0) * weights, lower)
    # absorb rounding so the budget holds exactly
    excess = weights @ x - budget
    if excess > 0:
        free = x > lower
        shift = excess * weights[free] / float(np.sum(weights[free] ** 2))
        x[free] = np.maximum(x[free] - shift, lower[free])
    return x
