import math

import numpy as np
import pytest

from conftest import make_instance
from relaybargain import (DedicatorSet, ScenarioConfig, SolverConfig, check_feasible,
                          generate_scenario, solve, solve_inner)
from relaybargain.dedicators import candidate_sets
from relaybargain.experiments import balance_ok, trace_is_monotone
from relaybargain.oracle import grid_oracle
from relaybargain.utility import balance_gap


@pytest.fixture(scope="module")
def table1_all(table1):
    return solve_inner(table1, DedicatorSet((True,) * table1.num_pairs))


def test_all_dedicator_trace_monotone(table1_all):
    r = table1_all
    assert r.feasible and r.converged
    assert 1 <= r.alternations < 10_000
    assert trace_is_monotone(r)
    assert [e.phase for e in r.trace[:2]] == ["power", "time"]
    assert len(r.trace) == 2 * r.alternations


def test_converged_reentry_stops_after_one(table1, table1_all):
    again = solve_inner(table1, table1_all.dedicators, start=table1_all.strategy)
    assert again.alternations == 1 and again.converged
    assert abs(math.expm1(again.log_phi - table1_all.log_phi)) < SolverConfig().epsilon


def test_single_weak_dedicator_infeasible_at_high_cost():
    inst = generate_scenario(ScenarioConfig(), 2).with_params(relay_fixed_cost=0.2)
    top1 = candidate_sets(inst)[-1]
    assert top1.count == 1
    assert not solve_inner(inst, top1).feasible
    # some larger set still pays the relay
    assert solve(inst).feasible


def test_solution_validity(table1):
    res = solve(table1)
    assert res.feasible
    s = res.best_strategy
    assert check_feasible(table1, s).feasible
    assert balance_ok(table1, s)
    alpha = s.alpha
    for i in range(table1.num_pairs):
        assert s.harvest_fraction[i] in (0.0, alpha)
        assert s.energy_power[i] in (0.0, table1.params.source_power_cap)
    top = max(r.log_phi for r in res.per_set_results if r.feasible)
    assert res.best_log_phi >= top - 1e-9 * max(1.0, abs(top))
    assert res.total_iterations == sum(r.alternations for r in res.per_set_results)


def test_pruned_stops_at_first_infeasible():
    inst = generate_scenario(ScenarioConfig(), 2).with_params(relay_fixed_cost=0.2)
    res = solve(inst)
    flags = [r.feasible for r in res.per_set_results]
    assert flags[-1] is False
    assert all(flags[:-1])
    assert [r.dedicators.count for r in res.per_set_results] == list(
        range(inst.num_pairs, inst.num_pairs - len(flags), -1))


def test_nothing_feasible():
    inst = generate_scenario(ScenarioConfig(), 0).with_params(relay_fixed_cost=100.0)
    res = solve(inst)
    assert not res.feasible and res.best_phi is None
    assert res.to_record()["feasible"] is False


def test_single_pair_one_candidate():
    inst = generate_scenario(ScenarioConfig(num_pairs=1), 0).with_params(relay_fixed_cost=0.01)
    res = solve(inst)
    assert len(res.per_set_results) == 1


def test_single_pair_close_to_grid_oracle():
    cfg = ScenarioConfig(num_pairs=1, fading_model="deterministic")
    inst = generate_scenario(cfg, 3).with_params(relay_fixed_cost=0.01)
    res = solve(inst)
    orc = grid_oracle(inst, DedicatorSet((True,)), 200)
    assert res.feasible and orc.feasible_points > 0
    assert res.best_log_phi >= orc.best_log_phi + math.log(0.99)


def test_symmetric_two_pairs_pruned_equals_exhaustive():
    inst = make_instance([0.02, 0.02], [0.03, 0.03], relay_fixed_cost=0.01)
    a = solve(inst)
    b = solve(inst, SolverConfig(enumeration_mode="exhaustive"))
    assert a.best_set == b.best_set
    assert a.best_log_phi <= b.best_log_phi + 1e-9


def test_balance_on_every_pair(table1):
    s = solve(table1).best_strategy
    caps = solve(table1).utilities.pair_capacities
    for i in range(table1.num_pairs):
        assert abs(balance_gap(table1, s, i)) <= 1e-6 * max(1.0, caps[i])


def test_requires_a_dedicator(table1):
    with pytest.raises(ValueError):
        solve_inner(table1, DedicatorSet((False,) * table1.num_pairs))


def test_record_is_json_ready(table1):
    import json
    rec = solve(table1).to_record()
    back = json.loads(json.dumps(rec))
    assert back["feasible"] and len(back["strategy"]["relay_power"] if isinstance(
        back["strategy"]["relay_power"], list) else [back["strategy"]["relay_power"]]) == 1
    assert back["dedicators"] and set(back["dedicators"]) <= {"0", "1"}


def test_deterministic(table1):
    assert solve(table1).to_record() == solve(table1).to_record()
