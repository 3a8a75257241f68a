import csv
import io
import json

import pytest

from relaybargain.cli import build_parser, main, parse_seeds


@pytest.mark.parametrize("text, seeds", [("0-3", [0, 1, 2, 3]), ("1,4,7", [1, 4, 7]),
                                         ("0-2,10", [0, 1, 2, 10]), ("5", [5])])
def test_parse_seeds(text, seeds):
    assert parse_seeds(text) == seeds


@pytest.mark.parametrize("bad", ["", "a", "3-1", "1-x"])
def test_parse_seeds_rejects(bad):
    import argparse
    with pytest.raises(argparse.ArgumentTypeError):
        parse_seeds(bad)


def test_usage_error_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--mode", "bogus"])
    assert exc.value.code == 1


def test_generate_and_solve_round_trip(tmp_path, capsys):
    inst = tmp_path / "i.json"
    assert main(["generate", "--seed", "3", "--out", str(inst)]) == 0
    assert json.loads(inst.read_text())["seed"] == 3
    out = tmp_path / "s.json"
    assert main(["solve", "--instance", str(inst), "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert rec["feasible"] and rec["seed"] == 3 and rec["phi"] > 0


def test_solve_infeasible_exit_two(tmp_path):
    out = tmp_path / "s.json"
    assert main(["solve", "--seed", "0", "--e0", "100", "--out", str(out)]) == 2
    assert json.loads(out.read_text())["feasible"] is False


def test_e0_single_value_outside_sweep():
    assert main(["solve", "--e0", "0.1,0.2"]) == 1


def test_missing_config_is_error(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.yaml")]) == 1


def test_sweep_csv(capsys):
    assert main(["sweep", "--seed", "0", "--num-pairs", "2", "--e0", "0,0.05"]) == 0
    r = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(r) == 4 and {x["E0"] for x in r} == {"0", "0.05"}


def test_trace_with_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("num_pairs: 2\nseed: 4\nrelay_fixed_cost_mw: 0.05\n")
    assert main(["trace", "--config", str(cfg)]) == 0
    r = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert r and all(x["seed"] == "4" for x in r)


def test_oracle_scans(capsys):
    assert main(["oracle", "--scans", "--seed", "1", "--num-pairs", "2", "--e0", "0.01"]) == 0
    r = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert {x["axis"] for x in r} >= {"relay_power", "harvest_fraction"}


def test_oracle_compare(capsys):
    assert main(["oracle", "--seed", "0", "--num-pairs", "1", "--e0", "0.01",
                 "--resolution", "60"]) == 0
    r = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(r) == 1 and r[0]["num_pairs"] == "1"


def test_check_exit_codes(capsys):
    assert main(["check", "--seed", "0", "--num-pairs", "3"]) == 0
    assert "dedicator_ordering" in capsys.readouterr().out


def test_byte_identical_outputs(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["sweep", "--seeds", "0-1", "--num-pairs", "3", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_parser_subcommands():
    p = build_parser()
    for cmd in ("generate", "solve", "sweep", "trace", "oracle", "check"):
        assert p.parse_args([cmd]).command == cmd
