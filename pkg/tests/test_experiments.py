import csv
import io
import math

import numpy as np
import pytest

from relaybargain import ScenarioConfig, SolverConfig, generate_scenario, solve, solve_inner
from relaybargain.experiments import (HEADERS, ExperimentSpec, balance_ok, format_value,
                                      geometric_mean, phase_gains, run, to_csv)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def small(**kw):
    return ScenarioConfig(num_pairs=kw.pop("num_pairs", 3), **kw)


@pytest.mark.parametrize("v, s", [(None, ""), (True, "true"), (False, "false"), (3, "3"),
                                  (0.1, "0.1"), (1 / 3, "0.333333333333"),
                                  (math.inf, "inf"), (1e-20, "1e-20")])
def test_format_value(v, s):
    assert format_value(v) == s


def test_to_csv_header_and_newlines():
    assert to_csv(["a", "b"], [[1, 0.5]]) == "a,b\n1,0.5\n"


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(experiment="nope")
    with pytest.raises(ValueError):
        ExperimentSpec(experiment="dedicator_sweep", sweep_values=())
    with pytest.raises(ValueError):
        ExperimentSpec(experiment="trace", seeds=())


def test_trace_csv(tmp_path):
    out = tmp_path / "t.csv"
    text = run(ExperimentSpec(experiment="trace", seeds=(0,), output_path=out))
    assert out.read_text() == text
    r = rows(text)
    assert list(r[0].keys()) == HEADERS["trace"]
    assert {x["phase"] for x in r} == {"power", "time"}
    logs = [float(x["log_phi"]) for x in r]
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(logs, logs[1:]))


def test_trace_infeasible_status_row():
    text = run(ExperimentSpec(experiment="trace", seeds=(0,),
                              scenario=ScenarioConfig(params=ScenarioConfig().params.__class__(
                                  relay_fixed_cost=100.0))))
    r = rows(text)
    assert len(r) == 1 and r[0]["phase"] == "infeasible" and r[0]["phi"] == ""


def test_phase_gains_comparable():
    inst = generate_scenario(ScenarioConfig(), 0)
    from relaybargain import DedicatorSet
    res = solve_inner(inst, DedicatorSet((True,) * 7))
    power, timed = phase_gains(res)
    assert power >= 0 and timed >= 0


def test_sweep_columns_and_projections():
    base = dict(scenario=small(), seeds=(1,), sweep_values=(0.0, 0.1))
    full = rows(run(ExperimentSpec(experiment="dedicator_sweep", **base)))
    assert len(full) == 2 * 3
    cap = rows(run(ExperimentSpec(experiment="capacity_sweep", **base)))
    res = rows(run(ExperimentSpec(experiment="residual_energy_sweep", **base)))
    assert [c["sum_capacity"] for c in cap] == [f["sum_capacity"] for f in full]
    assert [c["residual_energy"] for c in res] == [f["residual_energy"] for f in full]
    assert list(cap[0].keys()) == HEADERS["capacity_sweep"]


def test_utility_distribution_roles():
    r = rows(run(ExperimentSpec(experiment="utility_distribution", seeds=(0,))))
    roles = {x["role"] for x in r if x["pair"] != "geomean"}
    assert roles <= {"dedicator", "enjoyer"}
    gm = {x["role"]: float(x["utility"]) for x in r if x["pair"] == "geomean"}
    assert set(gm) == roles


def test_all_dedicator_single_role():
    # one pair: the only feasible set makes it a dedicator
    sc = ScenarioConfig(num_pairs=1, params=ScenarioConfig().params.__class__(relay_fixed_cost=0.01))
    r = rows(run(ExperimentSpec(experiment="utility_distribution", seeds=(0,), scenario=sc)))
    assert {x["role"] for x in r} == {"dedicator"}


def test_geometric_mean():
    assert geometric_mean([1.0, 100.0]) == pytest.approx(10.0)


def test_oracle_compare_one_pair():
    sc = ScenarioConfig(num_pairs=1, params=ScenarioConfig().params.__class__(relay_fixed_cost=0.01))
    r = rows(run(ExperimentSpec(experiment="oracle_compare", seeds=(0, 1), scenario=sc,
                                oracle_resolution=100)))
    assert len(r) == 2
    assert all(x["passed"] == "true" for x in r)
    assert all(float(x["ratio"]) >= 0.95 for x in r)


def test_theorem_checks_pass():
    r = rows(run(ExperimentSpec(experiment="theorem_checks", seeds=(0,), exhaustive_gap=False)))
    props = [x["property"] for x in r]
    assert props == ["endpoint_energy_power", "unimodal_relay_power",
                     "unimodal_harvest_fraction", "hop_balance", "monotone_trace",
                     "dedicator_ordering"]
    assert all(x["passed"] == "true" for x in r), r


def test_exhaustive_gap_row():
    r = rows(run(ExperimentSpec(experiment="theorem_checks", seeds=(2,), scenario=small(),
                                exhaustive_gap=True)))
    gap = [x for x in r if x["property"] == "pruned_vs_exhaustive"]
    assert len(gap) == 1 and gap[0]["passed"] == "true"


def test_corrupted_balance_fails():
    inst = generate_scenario(ScenarioConfig(), 0)
    s = solve(inst).best_strategy
    assert balance_ok(inst, s)
    beta = s.uplink_fraction.copy()
    beta[0] *= 1.5
    assert not balance_ok(inst, s.replace(uplink_fraction=beta))


def test_determinism():
    spec = ExperimentSpec(experiment="dedicator_sweep", scenario=small(), seeds=(0, 1),
                          sweep_values=(0.0, 0.08))
    assert run(spec) == run(spec)
