"""Command-line front end.

Exit codes: 0 on success, 2 when every result is infeasible (or a check
fails), 1 on error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ENUMERATION_MODES, POWER_MODES, TIME_MODES, SolverConfig
from .experiments import DEFAULT_E0_GRID, ExperimentSpec, run, to_csv
from .network import NetworkInstance, ScenarioConfig, generate_scenario, load_config
from .oracle import endpoint_scan_energy_power, unimodality_scan
from .solver import solve

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def parse_seeds(text: str) -> list[int]:
    """``"0-9"`` (inclusive), ``"1,4,7"`` or a mix such as ``"0-2,10"``."""
    seeds: list[int] = []
    try:
        for part in filter(None, (p.strip() for p in text.split(","))):
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                if hi < lo:
                    raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from exc
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def parse_floats(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not values:
        raise argparse.ArgumentTypeError("no values given")
    return values


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 so that 2 keeps meaning "infeasible"."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML scenario file")
    p.add_argument("--seed", type=int, help="instance seed (overrides the config)")
    p.add_argument("--seeds", type=parse_seeds, help="seed list, e.g. 0-99 or 1,5,9")
    p.add_argument("--num-pairs", type=int, help="override the number of pairs")
    p.add_argument("--mode", choices=ENUMERATION_MODES, default="pruned",
                   help="dedicator-set enumeration")
    p.add_argument("--power-mode", choices=POWER_MODES, default="golden")
    p.add_argument("--time-mode", choices=TIME_MODES, default="substitution")
    p.add_argument("--e0", type=parse_floats, help="E0/T values in mW, comma separated")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="relaybargain",
        description="Nash bargaining allocation for a wireless-powered relay network")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="draw an instance and write it as JSON")
    _common(p)
    p = sub.add_parser("solve", help="solve one instance and write the result as JSON")
    _common(p)
    p.add_argument("--instance", type=Path, help="solve a saved instance instead")
    p = sub.add_parser("sweep", help="dedicator-count sweep over E0 (CSV)")
    _common(p)
    p.add_argument("--experiment", default="dedicator_sweep",
                   choices=("dedicator_sweep", "capacity_sweep", "residual_energy_sweep",
                            "utility_distribution"))
    p = sub.add_parser("trace", help="alternation trace with every source a dedicator (CSV)")
    _common(p)
    p = sub.add_parser("oracle", help="grid-oracle comparison or 1-D scans (CSV)")
    _common(p)
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--scans", action="store_true",
                   help="emit unimodality and endpoint scan reports instead")
    p = sub.add_parser("check", help="structural property checks, one row per property (CSV)")
    _common(p)
    p.add_argument("--exhaustive-gap", action="store_true",
                   help="also compare pruned against exhaustive enumeration")
    return parser


def _scenario_and_seeds(args) -> tuple[ScenarioConfig, list[int], float | None]:
    scenario, seed, epsilon = ScenarioConfig(), 0, None
    if args.config is not None:
        loaded = load_config(args.config)
        scenario, seed, epsilon = loaded["scenario"], loaded["seed"], loaded["epsilon"]
    if args.num_pairs is not None:
        scenario = replace(scenario, num_pairs=args.num_pairs)
    if args.seeds is not None:
        seeds = args.seeds
    else:
        seeds = [args.seed if args.seed is not None else seed]
    if args.e0 is not None and args.command != "sweep":
        if len(args.e0) != 1:
            raise ValueError("--e0 takes a single value outside the sweep command")
        scenario = replace(scenario, params=replace(scenario.params,
                                                    relay_fixed_cost=args.e0[0]))
    return scenario, seeds, epsilon


def _solver_config(args, epsilon) -> SolverConfig:
    cfg = SolverConfig(enumeration_mode=args.mode, power_mode=args.power_mode,
                       time_mode=args.time_mode)
    return cfg.replace(epsilon=epsilon) if epsilon is not None else cfg


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def cmd_generate(args) -> int:
    scenario, seeds, _ = _scenario_and_seeds(args)
    records = [generate_scenario(scenario, s).to_dict() for s in seeds]
    _emit(json.dumps(records[0] if len(records) == 1 else records, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario, seeds, epsilon = _scenario_and_seeds(args)
    cfg = _solver_config(args, epsilon)
    if args.instance is not None:
        instances = [NetworkInstance.load(args.instance)]
    else:
        instances = [generate_scenario(scenario, s) for s in seeds]
    records = []
    for inst in instances:
        rec = solve(inst, cfg).to_record()
        rec["seed"] = inst.seed
        records.append(rec)
    _emit(json.dumps(records[0] if len(records) == 1 else records, indent=2) + "\n", args.out)
    return EXIT_OK if any(r["feasible"] for r in records) else EXIT_INFEASIBLE


def cmd_experiment(args, experiment: str, **extra) -> int:
    scenario, seeds, epsilon = _scenario_and_seeds(args)
    spec = ExperimentSpec(
        experiment=experiment, scenario=scenario, seeds=seeds,
        sweep_values=tuple(args.e0) if args.e0 is not None else DEFAULT_E0_GRID,
        output_path=None, solver=_solver_config(args, epsilon), **extra)
    text = run(spec)
    _emit(text, args.out)
    rows = _rows(text)
    if experiment == "theorem_checks":
        return EXIT_OK if all(r["passed"] == "true" for r in rows) else EXIT_INFEASIBLE
    if experiment in ("dedicator_sweep", "capacity_sweep", "residual_energy_sweep"):
        feasible = any(r["feasible"] == "true" for r in rows)
    elif experiment == "trace":
        feasible = any(r["phase"] != "infeasible" for r in rows)
    elif experiment == "utility_distribution":
        feasible = any(r["pair"] != "infeasible" for r in rows)
    else:
        feasible = any(r["solver_log_phi"] for r in rows)
    return EXIT_OK if feasible else EXIT_INFEASIBLE


SCAN_HEADER = ["seed", "axis", "grid", "argmax_index", "local_maxima_count",
               "is_unimodal", "is_endpoint_argmax"]


def cmd_scans(args) -> int:
    scenario, seeds, epsilon = _scenario_and_seeds(args)
    cfg = _solver_config(args, epsilon)
    rows, any_feasible = [], False
    for seed in seeds:
        inst = generate_scenario(scenario, seed)
        res = solve(inst, cfg)
        if not res.feasible:
            continue
        any_feasible = True
        reports = [unimodality_scan(inst, res.best_strategy, axis, 1000, res.best_set)
                   for axis in ("relay_power", "harvest_fraction")]
        reports += [endpoint_scan_energy_power(inst, res.best_strategy, i)
                    for i in range(inst.num_pairs)]
        rows += [[seed, r.axis, r.grid, r.argmax_index, r.local_maxima_count,
                  r.is_unimodal, r.is_endpoint_argmax] for r in reports]
    _emit(to_csv(SCAN_HEADER, rows), args.out)
    return EXIT_OK if any_feasible else EXIT_INFEASIBLE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "sweep":
            return cmd_experiment(args, args.experiment)
        if args.command == "trace":
            return cmd_experiment(args, "trace")
        if args.command == "oracle":
            if args.scans:
                return cmd_scans(args)
            return cmd_experiment(args, "oracle_compare", oracle_resolution=args.resolution)
        if args.command == "check":
            return cmd_experiment(args, "theorem_checks", exhaustive_gap=args.exhaustive_gap)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
