"""Parameter sweeps, aggregation, and oracle verification for experiments."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path
from statistics import fmean, stdev

import numpy as np

from .alarms import InstanceConfig, generate_instance
from .analysis import (
    DEFAULT_VARIANT,
    DeliveryVariant,
    average_delivery_time,
    collision_prob,
    conditional_collision_prob,
    expected_delivery_time,
    expected_pilots_per_slot,
)
from .errors import (
    ConfigError,
    EnumerationLimitError,
    ValidationError,
    VerificationError,
)
from .oracle import exact_conditional_collision_probs, exact_metrics
from .simulator import run_window, summarize
from .tree import build_tree

CSV_COLUMNS = [
    "p_max",
    "num_alarms",
    "sim_avg_delivery",
    "sim_avg_delivery_ci",
    "sim_max_delivery",
    "sim_max_delivery_ci",
    "sim_avg_pilots",
    "sim_avg_pilots_ci",
    "sim_max_pilots",
    "sim_max_pilots_ci",
    "ana_avg_delivery",
    "ana_avg_delivery_ci",
    "ana_exp_pilots",
    "ana_exp_pilots_ci",
]

DEFAULT_P_MAX_GRID = (0.001, 0.005, 0.01, 0.05, 0.1, 0.5)
DEFAULT_NUM_ALARMS_GRID = tuple(range(10, 101, 10))

VERIFY_MAX_ALARMS = 12

# derive_seed's hash ignores trailing zeros, so the key (base, i) would equal
# the run-0 key (base, i, 0); instance streams live past 2^64 to stay clear
_INSTANCE_STREAM = 1 << 64


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one sweep; defaults give the reference protocol."""

    p_max_values: tuple[float, ...] = DEFAULT_P_MAX_GRID
    num_alarms_values: tuple[int, ...] = DEFAULT_NUM_ALARMS_GRID
    instances_per_config: int = 20
    runs_per_instance: int = 50
    window: int = 50
    base_seed: int = 0
    delivery_variant: DeliveryVariant = DEFAULT_VARIANT
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "p_max_values", tuple(self.p_max_values))
        object.__setattr__(self, "num_alarms_values", tuple(self.num_alarms_values))
        if not self.p_max_values:
            raise ConfigError("p_max_values must not be empty")
        for p in self.p_max_values:
            if not 0.0 < p <= 1.0:
                raise ConfigError(f"p_max values must be in (0, 1], got {p}")
        if not self.num_alarms_values:
            raise ConfigError("num_alarms_values must not be empty")
        for n in self.num_alarms_values:
            if n < 1:
                raise ConfigError(f"num_alarms values must be >= 1, got {n}")
        for name in ("instances_per_config", "runs_per_instance", "window", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class AggregateStats:
    mean: float
    ci95_half_width: float
    n: int


@dataclass(frozen=True)
class OracleCheckReport:
    """Worst deviations between closed forms and exhaustive enumeration."""

    num_alarms: int
    trials: int
    tolerance: float
    max_abs_deviation: dict[str, float]
    ok: bool


def aggregate(values) -> AggregateStats:
    """Sample mean with a 1.96-sigma normal CI half-width (0 for one value)."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValidationError("cannot aggregate an empty sequence")
    mean = fmean(vals)
    if len(vals) == 1:
        return AggregateStats(mean=mean, ci95_half_width=0.0, n=1)
    hw = 1.96 * stdev(vals) / math.sqrt(len(vals))
    return AggregateStats(mean=mean, ci95_half_width=hw, n=len(vals))


def derive_seed(*entropy: int) -> int:
    """Stable 64-bit stream key for a tuple of non-negative integers.

    The underlying hash absorbs trailing zeros ((a, b) keys the same stream
    as (a, b, 0)), so no key tuple may be a zero-extension of another.
    """
    ss = np.random.SeedSequence(list(entropy))
    return int(ss.generate_state(1, np.uint64)[0])


def run_sweep(
    config: ExperimentConfig, output_path: str | Path | None = None
) -> list[dict]:
    """One aggregated row per (p_max, num_alarms) cell.

    Work is split one task per instance; tasks are reduced in deterministic
    (cell, instance, run) order with seeds derived from indices alone, so the
    output is identical for any worker count. When ``output_path`` is given
    the rows are also written there as CSV.
    """
    cells = [
        (p_max, n)
        for p_max in config.p_max_values
        for n in config.num_alarms_values
    ]
    tasks = []
    for cell_index, (p_max, n) in enumerate(cells):
        for inst in range(config.instances_per_config):
            tasks.append((config, cell_index, p_max, n, inst))
    results = _map_tasks(_instance_job, tasks, config.workers)

    rows = []
    per_cell = config.instances_per_config
    for cell_index, (p_max, n) in enumerate(cells):
        chunk = results[cell_index * per_cell : (cell_index + 1) * per_cell]
        summaries = [s for _, summaries in chunk for s in summaries]
        ana = [a for a, _ in chunk]
        row = {"p_max": p_max, "num_alarms": n}
        for metric, pick in (
            ("sim_avg_delivery", lambda s: s.avg_delivery),
            ("sim_max_delivery", lambda s: s.max_delivery),
            ("sim_avg_pilots", lambda s: s.avg_pilots),
            ("sim_max_pilots", lambda s: s.max_pilots),
        ):
            stats = aggregate(pick(s) for s in summaries)
            row[metric] = stats.mean
            row[metric + "_ci"] = stats.ci95_half_width
        for metric, idx in (("ana_avg_delivery", 0), ("ana_exp_pilots", 1)):
            stats = aggregate(a[idx] for a in ana)
            row[metric] = stats.mean
            row[metric + "_ci"] = stats.ci95_half_width
        rows.append(row)
    if output_path is not None:
        write_sweep_csv(rows, output_path)
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_cell(row[k]) for k in CSV_COLUMNS})
    return buf.getvalue()


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")


def rows_to_json(rows: list[dict]) -> str:
    """Structured mirror of the CSV, same values and column order."""
    return json.dumps([{k: r[k] for k in CSV_COLUMNS} for r in rows], indent=2) + "\n"


def verify_oracle(
    num_alarms: int, trials: int, seed: int, tolerance: float = 1e-9
) -> OracleCheckReport:
    """Cross-check every closed form against exhaustive enumeration.

    Each trial draws a fresh instance with probabilities uniform on (0, 1],
    builds its tree, and compares collision probabilities, conditionals,
    per-alarm and average expected delivery, and expected pilots per slot.
    """
    if num_alarms < 1:
        raise ConfigError(f"num_alarms must be >= 1, got {num_alarms}")
    if num_alarms > VERIFY_MAX_ALARMS:
        raise EnumerationLimitError(
            f"oracle verification enumerates 2^n subsets per trial; "
            f"limit is {VERIFY_MAX_ALARMS} alarms, got {num_alarms}"
        )
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    devs = {
        "collision_prob": 0.0,
        "conditional_collision_prob": 0.0,
        "expected_delivery": 0.0,
        "average_delivery": 0.0,
        "expected_pilots_per_slot": 0.0,
    }
    for trial in range(trials):
        inst_seed = derive_seed(seed, trial)
        inst = generate_instance(InstanceConfig(num_alarms, 1.0, inst_seed))
        tree = build_tree(inst)
        exact = exact_metrics(tree, inst)
        trial_devs = dict.fromkeys(devs, 0.0)
        for node in tree.nodes():
            gap = abs(collision_prob(node) - exact.node_collision_prob[node.node_id])
            trial_devs["collision_prob"] = max(trial_devs["collision_prob"], gap)
        for (node_id, alarm_id), ref in exact_conditional_collision_probs(
            tree, inst
        ).items():
            val = conditional_collision_prob(tree.node_by_id(node_id), alarm_id)
            trial_devs["conditional_collision_prob"] = max(
                trial_devs["conditional_collision_prob"], abs(val - ref)
            )
        for alarm_id, ref in exact.expected_delivery.items():
            val = expected_delivery_time(tree, alarm_id)
            trial_devs["expected_delivery"] = max(
                trial_devs["expected_delivery"], abs(val - ref)
            )
        trial_devs["average_delivery"] = abs(
            average_delivery_time(tree) - exact.average_delivery
        )
        trial_devs["expected_pilots_per_slot"] = abs(
            expected_pilots_per_slot(tree) - exact.expected_resolution_pilots
        )
        for metric, gap in trial_devs.items():
            if gap > tolerance:
                raise VerificationError(metric, inst_seed, gap)
            devs[metric] = max(devs[metric], gap)
    return OracleCheckReport(
        num_alarms=num_alarms,
        trials=trials,
        tolerance=tolerance,
        max_abs_deviation=devs,
        ok=True,
    )


# -- internals ---------------------------------------------------------------


def _csv_cell(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _instance_job(args):
    """Generate, analyze, and simulate one instance; pure in its arguments."""
    config, cell_index, p_max, n, inst = args
    global_instance = cell_index * config.instances_per_config + inst
    inst_seed = derive_seed(config.base_seed, _INSTANCE_STREAM + global_instance)
    alarms = generate_instance(InstanceConfig(n, p_max, inst_seed))
    tree = build_tree(alarms)
    ana = (
        average_delivery_time(tree, config.delivery_variant),
        expected_pilots_per_slot(tree),
    )
    summaries = []
    for run in range(config.runs_per_instance):
        run_seed = derive_seed(config.base_seed, global_instance, run)
        summaries.append(summarize(run_window(tree, alarms, config.window, run_seed)))
    return ana, summaries


def _map_tasks(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(fn, tasks, chunksize=1)
