import math

import numpy as np
import pytest

from conftest import make_instance
from relaybargain import DedicatorSet, ScenarioConfig, SolverConfig, generate_scenario
from relaybargain.timediv import (DegeneratePowerError, InfeasibleTimeError, TimeAllocation,
                                  TimeCoefficients, initial_allocation, solve_time_division,
                                  time_coefficients, _projected_gradient)
from relaybargain.optimize import count_local_maxima


def one_pair(d5=1.0, **kw):
    base = dict(d1=np.array([5.0]), d2=np.array([10.0]), d3=np.array([0.01 * d5]),
                d4=np.array([0.01]), d5=np.array([d5]), f1=0.05, f2=0.005,
                min_pair_time=0.05)
    base.update(kw)
    return TimeCoefficients(**base)


def test_d5_hand_value():
    n = 1e-9
    inst = make_instance(3.0 * n, 1.0 * n, noise_power=n)
    c = time_coefficients(inst, DedicatorSet((True,)), [1.0], 1.0)
    assert c.d5[0] == pytest.approx(0.5, rel=1e-14)


def test_symmetric_hops_d5_one():
    inst = make_instance(0.02, 0.02)
    c = time_coefficients(inst, DedicatorSet((True,)), [0.3], 0.3)
    assert c.d5[0] == pytest.approx(1.0, rel=1e-14)
    alloc = c.allocation([0.2])
    assert alloc.uplink_fraction[0] == pytest.approx(alloc.downlink_fraction[0])


def test_fixed_cost_coefficient():
    # E0 = 0.12 mW over a unit block
    inst = make_instance(0.02, 0.02, relay_fixed_cost=0.12)
    assert time_coefficients(inst, DedicatorSet((True,)), [0.3], 0.3).f2 == pytest.approx(0.12)


def test_coefficient_hand_values():
    inst = make_instance([0.01, 0.02], [0.03, 0.04])
    c = time_coefficients(inst, DedicatorSet((True, False)), [0.5, 0.25], 0.2)
    n = inst.params.noise_power
    down = np.log2(1 + 0.2 * np.array([0.03, 0.04]) / n)
    up = np.log2(1 + np.array([0.5, 0.25]) * np.array([0.01, 0.02]) / n)
    np.testing.assert_allclose(c.d1, down)
    np.testing.assert_allclose(c.d2, [10.0, 0.0])
    np.testing.assert_allclose(c.d3, np.array([0.5, 0.25]) * down / up)
    np.testing.assert_allclose(c.d4, [0.2, 0.2])
    assert c.f1 == pytest.approx(0.5 * 10.0 * 0.01)
    assert np.all(c.d1 > 0) and np.all(c.d3 > 0)


def test_degenerate_power():
    inst = make_instance(0.02, 0.02)
    with pytest.raises(DegeneratePowerError):
        time_coefficients(inst, DedicatorSet((True,)), [0.0], 0.3)
    with pytest.raises(DegeneratePowerError):
        time_coefficients(inst, DedicatorSet((True,)), [0.3], 0.0)


def test_single_pair_grid_oracle():
    c = one_pair()
    cfg = SolverConfig()
    res = solve_time_division(c, cfg)
    lo, hi = 0.025, (1 - cfg.alpha_min) / 2
    assert lo <= res.downlink_fraction[0] <= hi
    # 500 x 500 grid on (alpha, gamma), kept to budget-feasible points
    alpha = np.linspace(cfg.alpha_min, 1.0, 500)
    gamma = np.linspace(lo, hi, 500)
    A, G = np.meshgrid(alpha, gamma, indexing="ij")
    vals = c.log_objective_grid(A, G[..., None])
    vals = np.where(A + 2 * G <= 1.0 + 1e-12, vals, -np.inf)
    best = c.log_objective(res.downlink_fraction)
    assert best >= vals.max() - 1e-12
    # the grid argmax on the budget line lies within one grid step
    line = c.log_objective_grid(1.0 - 2.0 * gamma, gamma[:, None])
    assert abs(res.downlink_fraction[0] - gamma[int(np.argmax(line))]) <= gamma[1] - gamma[0]
    # on the budget line a 1-D scan with spacing 1e-6 confirms eps2 accuracy
    g = res.downlink_fraction[0] + np.linspace(-1e-4, 1e-4, 201)
    line = np.array([c.log_objective([x]) for x in g])
    assert abs(g[int(np.argmax(line))] - res.downlink_fraction[0]) <= 1e-6 + 1e-12


def test_huge_fixed_cost_infeasible():
    assert solve_time_division(one_pair(f2=10.0)) is None


def test_no_harvest_room():
    c = one_pair(min_pair_time=1.0)
    with pytest.raises(InfeasibleTimeError):
        solve_time_division(c)


def test_symmetric_two_pairs():
    inst = make_instance([0.02, 0.02], [0.03, 0.03], relay_fixed_cost=0.01)
    c = time_coefficients(inst, DedicatorSet((True, True)), [0.01, 0.01], 0.01)
    res = solve_time_division(c)
    assert res.downlink_fraction[0] == pytest.approx(res.downlink_fraction[1], abs=1e-6)


def _random(seed, n=3):
    rng = np.random.default_rng(seed)
    inst = generate_scenario(ScenarioConfig(num_pairs=n), seed).with_params(relay_fixed_cost=0.01)
    d = DedicatorSet(tuple(bool(b) for b in rng.random(n) < 0.6))
    if d.count == 0:
        d = DedicatorSet((True,) + (False,) * (n - 1))
    return time_coefficients(inst, d, rng.uniform(1e-4, 1.0, n), float(rng.uniform(1e-4, 1.0)))


def _interior(c, rng):
    lo = c.lower
    for _ in range(100):
        g = lo + rng.uniform(0, 1, lo.size) * (1 - c.weights @ lo) / (c.weights.sum() * 1.5)
        if math.isfinite(c.log_objective(g)):
            return g
    return None


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    checked = 0
    for seed in range(300):
        c = _random(seed)
        g = _interior(c, rng)
        if g is None:
            continue
        an = c.gradient(g)
        for i in range(g.size):
            h = 1e-7 * g[i]
            e = np.zeros_like(g)
            e[i] = h
            fd = (c.log_objective(g + e) - c.log_objective(g - e)) / (2 * h)
            assert an[i] == pytest.approx(fd, rel=1e-5, abs=1e-6)
        checked += 1
        if checked == 100:
            break
    assert checked == 100


def test_per_gamma_concavity():
    rng = np.random.default_rng(1)
    done = 0
    for seed in range(100):
        c = _random(seed)
        g = _interior(c, rng)
        if g is None:
            continue
        i = int(rng.integers(g.size))
        alpha = c.alpha_of(g)
        xs = np.linspace(0.0, g[i] + (1 - alpha - c.weights @ g) / c.weights[i], 1002)[1:-1]
        gg = np.repeat(g[None, :], xs.size, axis=0)
        gg[:, i] = xs
        # alpha held fixed, only gamma_i moves
        vals = c.log_objective_grid(np.full(xs.size, alpha), gg)
        vals = vals[np.isfinite(vals)]
        d = np.diff(vals)
        assert np.all(np.diff(d) <= 1e-9 * (1 + np.abs(vals).max()))
        done += 1
    assert done >= 30


def test_alpha_line_unimodal():
    for seed in range(30):
        c = _random(seed)
        res = solve_time_division(c)
        if res is None:
            continue
        share = res.downlink_fraction / (res.downlink_fraction @ c.weights)
        alphas = np.linspace(0, 1, 1002)[1:-1]
        vals = [c.log_objective((1 - a) * share) for a in alphas]
        assert count_local_maxima(vals)[0] == 1


def test_budget_and_floors_preserved():
    cfg = SolverConfig()
    for seed in range(30):
        c = _random(seed)
        res = solve_time_division(c, cfg)
        if res is None:
            continue
        total = res.harvest_fraction + np.sum(res.uplink_fraction + res.downlink_fraction)
        assert total == pytest.approx(1.0, abs=1e-12)
        assert np.all(res.uplink_fraction + res.downlink_fraction >= c.min_pair_time * (1 - 1e-12))
        assert res.harvest_fraction >= cfg.alpha_min * (1 - 1e-12)


def test_every_iterate_on_budget(monkeypatch):
    import relaybargain.timediv as td
    seen = []
    real = td.project_weighted_box

    def spy(y, lower, weights, budget):
        x = real(y, lower, weights, budget)
        seen.append((x.sum(), budget))
        return x

    monkeypatch.setattr(td, "project_weighted_box", spy)
    c = _random(2)
    cfg = SolverConfig()
    g0 = td._initial_gamma(c, cfg)
    _projected_gradient(c, g0, cfg)
    assert seen
    for s, b in seen:
        assert s <= b + 1e-12


def test_modes_agree():
    cfg = SolverConfig()
    for seed in range(20):
        c = _random(seed)
        a = solve_time_division(c, cfg, mode="substitution")
        b = solve_time_division(c, cfg, mode="dual")
        if a is None:
            assert b is None
            continue
        fa, fb = c.log_objective(a.downlink_fraction), c.log_objective(b.downlink_fraction)
        assert abs(math.expm1(fb - fa)) <= 1e-4


def test_modes_agree_with_enjoyers_on_floor():
    # time subproblem of a solved default instance: one dedicator, six enjoyers
    # with D5 ~ 5e4 whose floors are active only up to round-off
    c = TimeCoefficients(
        d1=np.array([20.946657753598366, 19.88215161023258, 17.47769668381935,
                     16.44322638974516, 22.374220892805635, 19.5908876653936,
                     21.219629642733217]),
        d2=np.array([0, 0, 0, 0, 0, 0, 10.0]),
        d3=np.array([1.0846898079546857e-06, 5.9794090906139409e-07,
                     2.2197374418634619e-06, 1.6865514305946173e-07,
                     1.1459140315339955e-06, 1.2078670922732653e-06,
                     1.2467271182976919e-01]),
        d4=np.full(7, 0.05365767150528744),
        d5=np.array([4.9998999999956613e+04, 4.9998999999954096e+04,
                     4.9998999999966341e+04, 4.9998999999954649e+04,
                     4.9998999999959990e+04, 4.9998999999959378e+04,
                     7.5014458005050122e-01]),
        f1=3.116702851843173, f2=0.1, min_pair_time=0.05)
    cfg = SolverConfig()
    a = solve_time_division(c, cfg, mode="substitution")
    b = solve_time_division(c, cfg, mode="dual")
    fa, fb = c.log_objective(a.downlink_fraction), c.log_objective(b.downlink_fraction)
    assert abs(math.expm1(fb - fa)) <= 1e-6


def test_initial_allocation_hand():
    inst = make_instance([0.02, 0.02], [0.03, 0.03], relay_fixed_cost=0.01)
    a = initial_allocation(inst, DedicatorSet((True, True)))
    rate = 0.5 * 10.0 * 0.04
    assert a.harvest_fraction == pytest.approx(2 * 0.01 / rate)
    np.testing.assert_allclose(a.uplink_fraction, (1 - a.harvest_fraction) / 4)
    assert isinstance(a, TimeAllocation)
    assert initial_allocation(inst.with_params(relay_fixed_cost=10.0),
                              DedicatorSet((True, True))) is None
