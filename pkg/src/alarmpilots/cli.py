"""Command-line entry point.

Verbs: ``gen`` writes a random alarm set, ``build`` prints its collision
tree, ``analyze`` prints closed-form metrics, ``simulate`` runs the slot
simulator, ``oracle`` cross-checks the closed forms by enumeration, and
``sweep`` runs a full parameter study to CSV.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .alarms import InstanceConfig, alarms_to_json, generate_instance, load_alarms
from .analysis import DeliveryVariant, analyze
from .errors import ValidationError
from .harness import (
    ExperimentConfig,
    aggregate,
    derive_seed,
    rows_to_csv,
    rows_to_json,
    run_sweep,
    verify_oracle,
)
from .simulator import run_window, summarize
from .tree import build_tree, check_feasibility, enforce_deadlines, serialize_tree

_DOMAIN_ERRORS = (ValueError, AssertionError)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.handler(args)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if text is not None:
        _emit(text, args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alarmpilots",
        description="Collision-tree pilot allocation for alarm traffic.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("gen", help="generate a random alarm set as JSON")
    gen.add_argument("--num-alarms", type=int, required=True)
    gen.add_argument("--p-max", type=float, required=True)
    gen.add_argument("--seed", type=int, default=0)
    _add_out(gen)
    gen.set_defaults(handler=_cmd_gen)

    build = sub.add_parser("build", help="build the collision tree for an alarm set")
    build.add_argument("--alarms", required=True, help="alarm-set JSON file")
    build.add_argument(
        "--format", choices=("structured", "dot"), default="structured"
    )
    build.add_argument(
        "--budget", type=int, help="fail if any level needs more pilots than this"
    )
    _add_out(build)
    build.set_defaults(handler=_cmd_build)

    analyze_p = sub.add_parser("analyze", help="closed-form delivery and pilot metrics")
    analyze_p.add_argument("--alarms", required=True, help="alarm-set JSON file")
    analyze_p.add_argument(
        "--variant",
        choices=[v.value for v in DeliveryVariant],
        default=DeliveryVariant.ROOT_INCLUSIVE.value,
    )
    _add_out(analyze_p)
    analyze_p.set_defaults(handler=_cmd_analyze)

    sim = sub.add_parser("simulate", help="run the slot-level simulator")
    sim.add_argument("--alarms", required=True, help="alarm-set JSON file")
    sim.add_argument("--window", type=int, default=50)
    sim.add_argument("--runs", type=int, default=1)
    sim.add_argument("--seed", type=int, default=0)
    _add_out(sim)
    sim.set_defaults(handler=_cmd_simulate)

    oracle = sub.add_parser("oracle", help="verify closed forms by enumeration")
    oracle.add_argument("--num-alarms", type=int, required=True)
    oracle.add_argument("--trials", type=int, default=100)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--tolerance", type=float, default=1e-9)
    _add_out(oracle)
    oracle.set_defaults(handler=_cmd_oracle)

    sweep = sub.add_parser("sweep", help="parameter study, one CSV row per cell")
    sweep.add_argument(
        "--config", help="JSON file of experiment settings; flags override it"
    )
    sweep.add_argument("--p-max", help="comma-separated list, e.g. 0.01,0.1")
    sweep.add_argument("--num-alarms", help="comma-separated list, e.g. 10,50,100")
    sweep.add_argument("--instances", type=int)
    sweep.add_argument("--runs", type=int)
    sweep.add_argument("--window", type=int)
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--variant", choices=[v.value for v in DeliveryVariant])
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    _add_out(sweep)
    sweep.set_defaults(handler=_cmd_sweep)

    return parser


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file (default: stdout)")


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _cmd_gen(args) -> str:
    alarms = generate_instance(InstanceConfig(args.num_alarms, args.p_max, args.seed))
    return alarms_to_json(alarms)


def _cmd_build(args) -> str:
    alarms = load_alarms(args.alarms)
    tree = build_tree(alarms)
    if any(a.deadline is not None for a in alarms):
        tree = enforce_deadlines(tree, alarms)
    if args.budget is not None:
        report = check_feasibility(tree, args.budget)
        if not report.feasible:
            raise ValidationError(
                f"tree needs {report.max_width} pilots on its widest level, "
                f"budget is {args.budget}"
            )
    return serialize_tree(tree, args.format)


def _cmd_analyze(args) -> str:
    alarms = load_alarms(args.alarms)
    tree = build_tree(alarms)
    if any(a.deadline is not None for a in alarms):
        tree = enforce_deadlines(tree, alarms)
    return analyze(tree, DeliveryVariant(args.variant)).to_json()


def _cmd_simulate(args) -> str:
    alarms = load_alarms(args.alarms)
    tree = build_tree(alarms)
    if any(a.deadline is not None for a in alarms):
        tree = enforce_deadlines(tree, alarms)
    runs = []
    for r in range(args.runs):
        summary = summarize(
            run_window(tree, alarms, args.window, derive_seed(args.seed, r))
        )
        runs.append(dataclasses.asdict(summary))
    payload = {"window": args.window, "runs": runs}
    if len(runs) > 1:
        payload["aggregate"] = {
            key: dataclasses.asdict(aggregate(r[key] for r in runs))
            for key in ("avg_delivery", "max_delivery", "avg_pilots", "max_pilots")
        }
    return json.dumps(payload, indent=2) + "\n"


def _cmd_oracle(args) -> str:
    report = verify_oracle(args.num_alarms, args.trials, args.seed, args.tolerance)
    return json.dumps(dataclasses.asdict(report), indent=2) + "\n"


def _cmd_sweep(args) -> str:
    config = _sweep_config(args)
    rows = run_sweep(config)
    return rows_to_json(rows) if args.json else rows_to_csv(rows)


def _sweep_config(args) -> ExperimentConfig:
    settings: dict = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ValueError(f"{args.config}: expected a JSON object")
        allowed = {f.name for f in dataclasses.fields(ExperimentConfig)}
        unknown = sorted(set(raw) - allowed)
        if unknown:
            raise ValueError(f"{args.config}: unknown keys {', '.join(unknown)}")
        settings.update(raw)
    if args.p_max is not None:
        settings["p_max_values"] = [float(x) for x in args.p_max.split(",")]
    if args.num_alarms is not None:
        settings["num_alarms_values"] = [int(x) for x in args.num_alarms.split(",")]
    for flag, field in (
        ("instances", "instances_per_config"),
        ("runs", "runs_per_instance"),
        ("window", "window"),
        ("seed", "base_seed"),
        ("workers", "workers"),
    ):
        value = getattr(args, flag)
        if value is not None:
            settings[field] = value
    if args.variant is not None:
        settings["delivery_variant"] = args.variant
    if "delivery_variant" in settings:
        settings["delivery_variant"] = DeliveryVariant(settings["delivery_variant"])
    return ExperimentConfig(**settings)


if __name__ == "__main__":
    sys.exit(main())
