"""Collision-tree pilot allocation for sporadic alarm traffic.

Alarm sources share a slotted uplink with a single always-on common pilot.
A binary merge tree over the sources fixes, ahead of time, which pilot each
source uses on every retransmission attempt, so that any set of
simultaneous alarms resolves in a bounded number of slots. The package
builds those trees, computes closed-form delivery and pilot-usage metrics,
checks them against exhaustive enumeration, and simulates the protocol
slot by slot.
"""

from .alarms import (
    AlarmSet,
    AlarmSource,
    InstanceConfig,
    alarms_from_json,
    alarms_to_json,
    generate_instance,
    load_alarms,
    save_alarms,
)
from .analysis import (
    AnalysisReport,
    DeliveryVariant,
    analyze,
    average_delivery_time,
    collision_prob,
    conditional_collision_prob,
    expected_delivery_time,
    expected_pilots_per_slot,
)
from .errors import (
    ConfigError,
    DeadlineError,
    EnumerationLimitError,
    ParseError,
    ValidationError,
    VerificationError,
)
from .harness import (
    AggregateStats,
    ExperimentConfig,
    OracleCheckReport,
    aggregate,
    derive_seed,
    run_sweep,
    verify_oracle,
    write_sweep_csv,
)
from .oracle import (
    MAX_ENUM_ALARMS,
    BatchOutcome,
    ExactMetrics,
    exact_conditional_collision_probs,
    exact_metrics,
    resolve_batch,
)
from .simulator import RunMetrics, RunSummary, run_window, summarize
from .tree import (
    CollisionTree,
    FeasibilityReport,
    PilotSequence,
    TreeNode,
    build_tree,
    check_feasibility,
    deserialize_tree,
    enforce_deadlines,
    max_delivery_time,
    node_probability,
    pilot_sequence,
    serialize_tree,
)

__version__ = "0.1.0"

__all__ = [
    "AlarmSet",
    "AlarmSource",
    "InstanceConfig",
    "alarms_from_json",
    "alarms_to_json",
    "generate_instance",
    "load_alarms",
    "save_alarms",
    "AnalysisReport",
    "DeliveryVariant",
    "analyze",
    "average_delivery_time",
    "collision_prob",
    "conditional_collision_prob",
    "expected_delivery_time",
    "expected_pilots_per_slot",
    "ConfigError",
    "DeadlineError",
    "EnumerationLimitError",
    "ParseError",
    "ValidationError",
    "VerificationError",
    "AggregateStats",
    "ExperimentConfig",
    "OracleCheckReport",
    "aggregate",
    "derive_seed",
    "run_sweep",
    "verify_oracle",
    "write_sweep_csv",
    "BatchOutcome",
    "ExactMetrics",
    "MAX_ENUM_ALARMS",
    "exact_conditional_collision_probs",
    "exact_metrics",
    "resolve_batch",
    "RunMetrics",
    "RunSummary",
    "run_window",
    "summarize",
    "CollisionTree",
    "FeasibilityReport",
    "PilotSequence",
    "TreeNode",
    "build_tree",
    "check_feasibility",
    "deserialize_tree",
    "enforce_deadlines",
    "max_delivery_time",
    "node_probability",
    "pilot_sequence",
    "serialize_tree",
]
