"""Closed-form collision and delivery metrics over a fixed collision tree.

Everything here treats a single slot of the protocol: each alarm triggers
independently with its own probability, collisions are resolved by walking
pilot labels down the tree, and the formulas below give exact expectations
without simulating.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from statistics import fmean

from .errors import ValidationError
from .tree import CollisionTree, TreeNode


class DeliveryVariant(enum.Enum):
    """How the expected-delivery sum treats a collision on the shared pilot.

    ROOT_INCLUSIVE counts the root like any other ancestor: colliding on the
    shared pilot costs an extra slot. ROOT_EXCLUSIVE drops the root term,
    giving a strictly smaller value whenever the root can collide; it is kept
    for comparison and is never the default.
    """

    ROOT_INCLUSIVE = "root_inclusive"
    ROOT_EXCLUSIVE = "root_exclusive"


DEFAULT_VARIANT = DeliveryVariant.ROOT_INCLUSIVE


def _quiet_product(probs) -> float:
    """Product of (1 - p) factors, via logs when a factor would underflow."""
    factors = [1.0 - p for p in probs]
    if any(f < 1e-12 for f in factors):
        if any(f == 0.0 for f in factors):
            return 0.0
        return math.exp(math.fsum(math.log(f) for f in factors))
    out = 1.0
    for f in factors:
        out *= f
    return out


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def _leaf_probs(node: TreeNode) -> list[float]:
    return [leaf.prob for leaf in _leaves(node)]


def _leaves(node: TreeNode) -> list[TreeNode]:
    out = []
    stack = [node]
    while stack:
        n = stack.pop()
        if n.is_leaf:
            out.append(n)
        else:
            stack.extend(reversed(n.children))
    return out


def collision_prob(node: TreeNode) -> float:
    """Probability that two or more alarms under this node trigger in one slot."""
    probs = _leaf_probs(node)
    if len(probs) == 1:
        return 0.0
    none = _quiet_product(probs)
    exactly_one = 0.0
    for i, p in enumerate(probs):
        exactly_one += p * _quiet_product(probs[:i] + probs[i + 1 :])
    return _clamp(1.0 - exactly_one - none)


def conditional_collision_prob(node: TreeNode, alarm_id: int) -> float:
    """P(another alarm under the node triggers too | this alarm triggered)."""
    leaves = _leaves(node)
    others = [leaf.prob for leaf in leaves if leaf.alarm_id != alarm_id]
    if len(others) == len(leaves):
        raise ValidationError(f"alarm {alarm_id} is not under node {node.node_id}")
    if not others:
        return 0.0
    return _clamp(1.0 - _quiet_product(others))


def expected_delivery_time(
    tree: CollisionTree,
    alarm_id: int,
    variant: DeliveryVariant = DEFAULT_VARIANT,
) -> float:
    """Mean slots from an alarm's first transmission to delivery.

    One guaranteed slot on the shared pilot, plus one expected slot for every
    ancestor whose pilot the alarm would have to retry after a collision.
    """
    if alarm_id not in tree.leaf_of:
        raise KeyError(f"no alarm with id {alarm_id} in this tree")
    leaf = tree.leaf_of[alarm_id]
    parents = tree.parent_map()
    total = 1.0
    node = parents.get(leaf.node_id)
    while node is not None:
        if node.level > 0 or variant is DeliveryVariant.ROOT_INCLUSIVE:
            total += conditional_collision_prob(node, alarm_id)
        node = parents.get(node.node_id)
    return total


def average_delivery_time(
    tree: CollisionTree, variant: DeliveryVariant = DEFAULT_VARIANT
) -> float:
    """Unweighted mean of expected_delivery_time over every alarm in the tree."""
    return fmean(
        expected_delivery_time(tree, alarm_id, variant) for alarm_id in tree.leaf_of
    )


def expected_pilots_per_slot(tree: CollisionTree) -> float:
    """A-priori mean pilots reserved per slot: the shared pilot, plus each
    node's pilot weighted by the chance its parent collided last slot."""
    total = 1.0
    for node in tree.nodes():
        if node.children:
            total += collision_prob(node) * len(node.children)
    return total


@dataclass(frozen=True)
class AnalysisReport:
    """Every closed-form metric for one tree, ready to serialize."""

    per_alarm_expected_delivery: dict[int, float]
    average_delivery: float
    expected_pilots_per_slot: float
    per_node_collision_prob: dict[int, float]
    variant: DeliveryVariant

    def to_json(self) -> str:
        return json.dumps(
            {
                "expected_delivery": {
                    str(aid): v for aid, v in self.per_alarm_expected_delivery.items()
                },
                "average_delivery": self.average_delivery,
                "expected_pilots_per_slot": self.expected_pilots_per_slot,
                "collision_prob": {
                    str(nid): v for nid, v in self.per_node_collision_prob.items()
                },
            },
            indent=2,
        ) + "\n"


def analyze(tree: CollisionTree, variant: DeliveryVariant = DEFAULT_VARIANT) -> AnalysisReport:
    per_alarm = {
        alarm_id: expected_delivery_time(tree, alarm_id, variant)
        for alarm_id in sorted(tree.leaf_of)
    }
    return AnalysisReport(
        per_alarm_expected_delivery=per_alarm,
        average_delivery=fmean(per_alarm.values()),
        expected_pilots_per_slot=expected_pilots_per_slot(tree),
        per_node_collision_prob={n.node_id: collision_prob(n) for n in tree.nodes()},
        variant=variant,
    )
