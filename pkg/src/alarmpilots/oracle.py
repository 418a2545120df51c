"""Exhaustive single-slot reference: replay every trigger subset exactly.

This module is the ground truth the closed forms are checked against. It
shares no arithmetic with analysis.py: delivery times and pilot counts come
from literally replaying the resolution protocol on each subset of alarms,
and expectations are subset-weighted sums.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from statistics import fmean

from .alarms import AlarmSet
from .errors import EnumerationLimitError, ValidationError
from .tree import CollisionTree

MAX_ENUM_ALARMS = 20
_REFRESH_EVERY = 4096  # recompute the running subset weight to cap drift
_NORMAL_MIN = sys.float_info.min  # below this, in-place updates lose precision


@dataclass(frozen=True)
class BatchOutcome:
    """Result of resolving one batch of simultaneous first transmissions."""

    delivery_slot: dict[int, int]  # alarm id -> 1-based slot of delivery
    pilots_by_slot: tuple[int, ...]  # index 0 is the shared-pilot slot


@dataclass(frozen=True)
class ExactMetrics:
    """Expectations over all trigger subsets of one slot."""

    expected_delivery: dict[int, float]  # alarm id -> E[slots | alarm triggered]
    average_delivery: float
    expected_resolution_pilots: float  # E[total pilots consumed by one batch]
    node_collision_prob: dict[int, float]  # node id -> P(>= 2 triggered below)


def resolve_batch(tree: CollisionTree, triggered) -> BatchOutcome:
    """Replay one batch of simultaneous transmissions to completion.

    Slot 1 is the shared pilot everyone uses. While any pilot carried two or
    more transmitters, the next slot reserves one pilot per child of each
    collided node (idle children waste theirs), every unresolved alarm moves
    to the child it sits under, and whoever transmits alone is delivered.
    """
    triggered = set(triggered)
    unknown = triggered - set(tree.leaf_of)
    if unknown:
        raise KeyError(f"alarms not in this tree: {sorted(unknown)}")
    bit, ids, children_of, mask_of = _tables(tree)
    mask = 0
    for alarm_id in triggered:
        mask |= 1 << bit[alarm_id]
    slots, pilots = _replay(mask, ids, children_of, mask_of, tree.root.node_id)
    return BatchOutcome(delivery_slot=slots, pilots_by_slot=pilots)


def exact_metrics(tree: CollisionTree, alarms: AlarmSet) -> ExactMetrics:
    """Exact expectations by enumerating all 2^n trigger subsets.

    Refuses more than MAX_ENUM_ALARMS alarms; the walk is exponential. The
    subsets are visited in Gray-code order so each step swaps one factor of
    the running weight, with a periodic full recompute to keep float drift
    out of the sums.
    """
    n = len(alarms)
    if n > MAX_ENUM_ALARMS:
        raise EnumerationLimitError(
            f"exact enumeration over {n} alarms needs 2^{n} subsets; "
            f"limit is {MAX_ENUM_ALARMS}"
        )
    _check_same_alarms(tree, alarms)
    bit, ids, children_of, mask_of = _tables(tree)
    probs = [0.0] * n
    for a in alarms:
        probs[bit[a.id]] = a.trigger_prob

    node_ids = list(mask_of)
    node_masks = [mask_of[nid] for nid in node_ids]
    coll_weight = [0.0] * len(node_ids)
    delivery_weight = {a.id: 0.0 for a in alarms}
    triggered_weight = {a.id: 0.0 for a in alarms}
    pilots_weight = 0.0

    for mask, w in _subset_weights(probs):
        if w == 0.0:
            continue
        slots, pilots = _replay(mask, ids, children_of, mask_of, tree.root.node_id)
        pilots_weight += w * sum(pilots)
        for alarm_id, slot in slots.items():
            delivery_weight[alarm_id] += w * slot
            triggered_weight[alarm_id] += w
        for i, node_mask in enumerate(node_masks):
            if (node_mask & mask).bit_count() >= 2:
                coll_weight[i] += w

    # an alarm that can never trigger is scored at the 1-slot minimum
    expected = {
        aid: (delivery_weight[aid] / tw if tw > 0.0 else 1.0)
        for aid, tw in triggered_weight.items()
    }
    return ExactMetrics(
        expected_delivery=expected,
        average_delivery=fmean(expected.values()),
        expected_resolution_pilots=pilots_weight,
        node_collision_prob=dict(zip(node_ids, coll_weight)),
    )


def exact_conditional_collision_probs(
    tree: CollisionTree, alarms: AlarmSet
) -> dict[tuple[int, int], float]:
    """P(node saw a collision | alarm triggered), enumerated per (node, alarm).

    Covers every internal node paired with each alarm beneath it; the same
    size limit as exact_metrics applies.
    """
    n = len(alarms)
    if n > MAX_ENUM_ALARMS:
        raise EnumerationLimitError(
            f"exact enumeration over {n} alarms needs 2^{n} subsets; "
            f"limit is {MAX_ENUM_ALARMS}"
        )
    _check_same_alarms(tree, alarms)
    bit, ids, children_of, mask_of = _tables(tree)
    probs = [0.0] * n
    for a in alarms:
        probs[bit[a.id]] = a.trigger_prob

    internal = [(nid, m) for nid, m in mask_of.items() if nid in children_of]
    joint: dict[tuple[int, int], float] = {}
    for nid, m in internal:
        for i in range(n):
            if m >> i & 1:
                joint[(nid, ids[i])] = 0.0

    for mask, w in _subset_weights(probs):
        if w == 0.0:
            continue
        for nid, m in internal:
            hit = m & mask
            if hit.bit_count() >= 2:
                rest = hit
                while rest:
                    low = rest & -rest
                    joint[(nid, ids[low.bit_length() - 1])] += w
                    rest ^= low
    out = {}
    for (nid, aid), jw in joint.items():
        p = probs[bit[aid]]
        out[(nid, aid)] = jw / p if p > 0.0 else 0.0
    return out


# -- internals ---------------------------------------------------------------


def _subset_weights(probs):
    """Yield (bitmask, probability weight) for every subset, in Gray order.

    Each step swaps the one factor whose alarm toggled; zero factors are
    counted rather than multiplied so p = 0 and p = 1 stay exact, and the
    running product is rebuilt every _REFRESH_EVERY steps to cap drift.
    A product that leaves the normal float range is rebuilt from scratch
    instead of updated in place: dividing a subnormal back up would turn
    its rounding error into an arbitrarily large relative error.
    """
    mask = 0
    weight = None  # None marks a product that needs a full rebuild
    zeros = 0
    for step in range(1 << len(probs)):
        if step:
            flip = (step & -step).bit_length() - 1
            mask ^= 1 << flip
            if step % _REFRESH_EVERY == 0:
                weight = None
            elif weight is not None:
                entering = mask >> flip & 1
                old = 1.0 - probs[flip] if entering else probs[flip]
                new = probs[flip] if entering else 1.0 - probs[flip]
                if old == 0.0:
                    zeros -= 1
                else:
                    weight /= old
                if new == 0.0:
                    zeros += 1
                else:
                    weight *= new
                if not _NORMAL_MIN <= weight < math.inf:
                    weight = None
        if weight is None:
            weight, zeros = _fresh_weight(probs, mask)
        yield mask, (0.0 if zeros else weight)
        if not _NORMAL_MIN <= weight < math.inf:
            weight = None


def _tables(tree: CollisionTree):
    """Bit index per alarm, plus per-node child lists and leaf bitmasks."""
    alarm_ids = sorted(tree.leaf_of)
    bit = {aid: i for i, aid in enumerate(alarm_ids)}
    mask_of: dict[int, int] = {}
    children_of: dict[int, list[int]] = {}
    for node in reversed(tree.nodes()):
        if node.is_leaf:
            mask_of[node.node_id] = 1 << bit[node.alarm_id]
        else:
            children_of[node.node_id] = [c.node_id for c in node.children]
            m = 0
            for c in node.children:
                m |= mask_of[c.node_id]
            mask_of[node.node_id] = m
    return bit, alarm_ids, children_of, mask_of


def _replay(mask: int, ids, children_of, mask_of, root_id: int):
    """Core batch replay on bitmasks; returns (delivery slots, pilot counts)."""
    slots: dict[int, int] = {}
    pilots = [1]
    count = mask.bit_count()
    if count == 0:
        return slots, tuple(pilots)
    if count == 1:
        slots[ids[mask.bit_length() - 1]] = 1
        return slots, tuple(pilots)
    frontier = [(root_id, mask)]
    slot = 1
    while frontier:
        slot += 1
        reserved = 0
        advanced = []
        for node_id, group in frontier:
            kids = children_of[node_id]
            reserved += len(kids)
            for kid in kids:
                sub = group & mask_of[kid]
                c = sub.bit_count()
                if c == 1:
                    slots[ids[sub.bit_length() - 1]] = slot
                elif c >= 2:
                    advanced.append((kid, sub))
        pilots.append(reserved)
        frontier = advanced
    return slots, tuple(pilots)


def _fresh_weight(probs, mask: int):
    """Weight of the subset given by mask, tracking zero factors separately."""
    weight = 1.0
    zeros = 0
    for i, p in enumerate(probs):
        f = p if mask >> i & 1 else 1.0 - p
        if f == 0.0:
            zeros += 1
        else:
            weight *= f
    return weight, zeros


def _check_same_alarms(tree: CollisionTree, alarms: AlarmSet) -> None:
    tree_ids = set(tree.leaf_of)
    set_ids = set(a.id for a in alarms)
    if tree_ids != set_ids:
        raise ValidationError(
            f"tree leaves {sorted(tree_ids)} do not match alarm set {sorted(set_ids)}"
        )
