import csv
import io
import json

import pytest

from alarmpilots import (
    AggregateStats,
    ConfigError,
    EnumerationLimitError,
    ExperimentConfig,
    ValidationError,
    VerificationError,
    aggregate,
    derive_seed,
    run_sweep,
    verify_oracle,
)
from alarmpilots.harness import (
    CSV_COLUMNS,
    DEFAULT_NUM_ALARMS_GRID,
    DEFAULT_P_MAX_GRID,
    rows_to_csv,
    rows_to_json,
)

SMALL = dict(
    p_max_values=[0.2],
    num_alarms_values=[5],
    instances_per_config=3,
    runs_per_instance=4,
    window=6,
    base_seed=11,
)


# -- aggregate -------------------------------------------------------------------


def test_aggregate_of_constants_has_zero_width():
    assert aggregate([1, 1, 1, 1]) == AggregateStats(mean=1.0, ci95_half_width=0.0, n=4)


def test_aggregate_pair():
    stats = aggregate([0.0, 2.0])
    assert stats.mean == 1.0
    assert stats.ci95_half_width == pytest.approx(1.96)
    assert stats.n == 2


def test_aggregate_single_value_is_exact():
    assert aggregate([5.0]) == AggregateStats(mean=5.0, ci95_half_width=0.0, n=1)


def test_aggregate_accepts_any_iterable():
    assert aggregate(iter(range(3))).mean == 1.0


def test_aggregate_rejects_nothing():
    with pytest.raises(ValidationError, match="empty"):
        aggregate([])


# -- ExperimentConfig ------------------------------------------------------------


def test_defaults_describe_the_reference_protocol():
    config = ExperimentConfig()
    assert config.p_max_values == DEFAULT_P_MAX_GRID
    assert config.num_alarms_values == DEFAULT_NUM_ALARMS_GRID
    assert config.instances_per_config == 20
    assert config.runs_per_instance == 50
    assert config.window == 50
    assert config.base_seed == 0
    assert config.workers == 1


def test_grids_are_stored_as_tuples():
    config = ExperimentConfig(p_max_values=[0.5], num_alarms_values=[3, 4])
    assert config.p_max_values == (0.5,)
    assert config.num_alarms_values == (3, 4)


@pytest.mark.parametrize(
    "bad",
    [
        dict(p_max_values=[]),
        dict(p_max_values=[0.0]),
        dict(p_max_values=[1.5]),
        dict(num_alarms_values=[]),
        dict(num_alarms_values=[0]),
        dict(instances_per_config=0),
        dict(runs_per_instance=0),
        dict(window=0),
        dict(workers=0),
        dict(base_seed=-1),
        dict(base_seed=2**64),
    ],
)
def test_config_rejects_out_of_range_values(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)


# -- derive_seed -----------------------------------------------------------------


def test_derived_seeds_are_stable_and_order_sensitive():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert 0 <= derive_seed(3, 1, 4) < 2**64


def test_trailing_zeros_are_absorbed_by_the_hash():
    # documented hazard: key tuples must never zero-extend one another
    assert derive_seed(0) == derive_seed(0, 0)
    assert derive_seed(7, 3) == derive_seed(7, 3, 0, 0)


def test_instance_streams_stay_clear_of_run_streams():
    from alarmpilots.harness import _INSTANCE_STREAM

    base, instance = 0, 4
    instance_key = derive_seed(base, _INSTANCE_STREAM + instance)
    run_keys = {derive_seed(base, instance, r) for r in range(50)}
    assert instance_key not in run_keys


# -- run_sweep -------------------------------------------------------------------


def test_single_cell_sweep_row_shape():
    rows = run_sweep(ExperimentConfig(**SMALL))
    assert len(rows) == 1
    row = rows[0]
    assert list(row) == CSV_COLUMNS
    assert row["p_max"] == 0.2
    assert row["num_alarms"] == 5
    assert row["sim_avg_delivery"] >= 1.0
    assert row["ana_avg_delivery"] >= 1.0
    assert row["ana_exp_pilots"] >= 1.0
    assert all(row[k] >= 0.0 for k in CSV_COLUMNS if k.endswith("_ci"))


def test_sweep_is_deterministic():
    assert run_sweep(ExperimentConfig(**SMALL)) == run_sweep(ExperimentConfig(**SMALL))


def test_worker_count_does_not_change_the_output():
    serial = run_sweep(ExperimentConfig(**SMALL))
    pooled = run_sweep(ExperimentConfig(**SMALL, workers=3))
    assert serial == pooled


def test_sweep_writes_csv_when_asked(tmp_path):
    out = tmp_path / "sweep.csv"
    rows = run_sweep(ExperimentConfig(**SMALL), output_path=out)
    assert out.read_text(encoding="utf-8") == rows_to_csv(rows)


def test_average_pilots_grow_with_trigger_probability():
    config = ExperimentConfig(
        p_max_values=[0.01, 0.1, 0.5],
        num_alarms_values=[20],
        instances_per_config=4,
        runs_per_instance=6,
        window=10,
        base_seed=1,
    )
    rows = run_sweep(config)
    for lighter, heavier in zip(rows, rows[1:]):
        slack = lighter["sim_avg_pilots_ci"] + heavier["sim_avg_pilots_ci"]
        assert heavier["sim_avg_pilots"] >= lighter["sim_avg_pilots"] - slack
        assert heavier["ana_exp_pilots"] > lighter["ana_exp_pilots"]


# -- serialization ---------------------------------------------------------------


def test_csv_header_and_float_round_trip():
    rows = run_sweep(ExperimentConfig(**SMALL))
    text = rows_to_csv(rows)
    header, line = text.splitlines()
    assert header == ",".join(CSV_COLUMNS)
    parsed = next(csv.DictReader(io.StringIO(text)))
    for key in CSV_COLUMNS:
        assert float(parsed[key]) == float(rows[0][key])


def test_json_mirrors_the_csv_columns():
    rows = run_sweep(ExperimentConfig(**SMALL))
    loaded = json.loads(rows_to_json(rows))
    assert [list(entry) for entry in loaded] == [CSV_COLUMNS]
    assert loaded[0]["num_alarms"] == 5


# -- verify_oracle ---------------------------------------------------------------


def test_verify_oracle_passes_on_small_instances():
    report = verify_oracle(num_alarms=5, trials=4, seed=0)
    assert report.ok
    assert report.num_alarms == 5
    assert report.trials == 4
    assert set(report.max_abs_deviation) == {
        "collision_prob",
        "conditional_collision_prob",
        "expected_delivery",
        "average_delivery",
        "expected_pilots_per_slot",
    }
    assert all(d <= report.tolerance for d in report.max_abs_deviation.values())


def test_verify_oracle_with_one_alarm_is_exact():
    report = verify_oracle(num_alarms=1, trials=2, seed=1)
    assert report.ok
    assert all(d == 0.0 for d in report.max_abs_deviation.values())


def test_verify_oracle_refuses_unenumerable_sizes():
    with pytest.raises(EnumerationLimitError):
        verify_oracle(num_alarms=13, trials=1, seed=0)


@pytest.mark.parametrize("kwargs", [dict(num_alarms=0), dict(trials=0)])
def test_verify_oracle_rejects_bad_counts(kwargs):
    args = dict(num_alarms=3, trials=1, seed=0)
    args.update(kwargs)
    with pytest.raises(ConfigError):
        verify_oracle(**args)


def test_verification_failure_names_the_metric_and_seed():
    # an impossible tolerance forces the failure path deterministically
    with pytest.raises(VerificationError) as exc_info:
        verify_oracle(num_alarms=4, trials=1, seed=2, tolerance=-1.0)
    err = exc_info.value
    assert err.metric in {
        "collision_prob",
        "conditional_collision_prob",
        "expected_delivery",
        "average_delivery",
        "expected_pilots_per_slot",
    }
    assert isinstance(err.instance_seed, int)
    assert err.deviation >= 0.0
    assert err.metric in str(err)
