"""Slot-level Monte-Carlo of the pilot protocol over a window of slots.

Unlike the oracle, which scores a single batch, this walks wall-clock slots:
alarms trigger at random times, every batch of simultaneous first
transmissions spawns its own resolution process in a private pilot range,
and the run keeps going past the window until all processes drain.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import fmean

import numpy as np

from .alarms import AlarmSet
from .errors import ConfigError, ValidationError
from .tree import CollisionTree


@dataclass
class ResolutionProcess:
    """One collision cohort descending the tree, isolated from all others."""

    offset_range: int  # which private block of pilot space the cohort uses
    start_slot: int  # the slot whose shared-pilot collision spawned it
    frontier: list[tuple[int, int]]  # (node id, bitmask of unresolved alarms)


@dataclass(frozen=True)
class RunMetrics:
    """Raw outcome of one simulated run."""

    delivery_times: dict[int, int]  # alarm id -> slots, first transmission inclusive
    pilots_per_slot: tuple[int, ...]
    num_triggered: int
    run_seed: int | None


@dataclass(frozen=True)
class RunSummary:
    avg_delivery: float
    max_delivery: float
    avg_pilots: float
    max_pilots: float


def run_window(
    tree: CollisionTree,
    alarms: AlarmSet,
    window: int,
    seed: int = 0,
    *,
    rng=None,
) -> RunMetrics:
    """Simulate `window` slots of triggering plus however long resolution takes.

    Each still-untriggered alarm draws one uniform per slot, in ascending id
    order, and triggers at most once (when the draw falls below its
    probability). Alarms triggering in the same slot transmit on the shared
    pilot immediately: a lone alarm is delivered in that slot, two or more
    start a ResolutionProcess that reserves one pilot per child of each
    collided node and descends one tree level per slot. Processes never
    interact, and every slot, window or tail, counts the shared pilot.

    Pass `rng` (anything with a .random(k) method) to script the draws; the
    seed is then recorded as None.
    """
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if set(tree.leaf_of) != set(a.id for a in alarms):
        raise ValidationError("tree leaves do not match the alarm set")
    gen = rng if rng is not None else np.random.Generator(np.random.PCG64(seed))

    ids = [a.id for a in alarms]
    probs = [a.trigger_prob for a in alarms]
    children_of, mask_of = _tables(tree, {aid: i for i, aid in enumerate(ids)})
    root_id = tree.root.node_id

    untriggered = list(range(len(ids)))
    delivery: dict[int, int] = {}
    pilots: list[int] = []
    processes: list[ResolutionProcess] = []
    next_offset = 1
    slot = 0
    while slot < window or processes:
        slot += 1
        reserved = 0
        alive = []
        for proc in processes:
            count, frontier, done_mask = _advance(proc.frontier, children_of, mask_of)
            reserved += count
            rest = done_mask
            while rest:
                low = rest & -rest
                delivery[ids[low.bit_length() - 1]] = slot - proc.start_slot + 1
                rest ^= low
            if frontier:
                proc.frontier = frontier
                alive.append(proc)
        processes = alive
        if slot <= window and untriggered:
            draws = gen.random(len(untriggered))
            fired = [
                pos
                for i, pos in enumerate(untriggered)
                if float(draws[i]) < probs[pos]
            ]
            if fired:
                fired_set = set(fired)
                untriggered = [p for p in untriggered if p not in fired_set]
                if len(fired) == 1:
                    delivery[ids[fired[0]]] = 1
                else:
                    mask = 0
                    for pos in fired:
                        mask |= 1 << pos
                    processes.append(
                        ResolutionProcess(
                            offset_range=next_offset,
                            start_slot=slot,
                            frontier=[(root_id, mask)],
                        )
                    )
                    next_offset += 1
        pilots.append(1 + reserved)
    return RunMetrics(
        delivery_times=delivery,
        pilots_per_slot=tuple(pilots),
        num_triggered=len(ids) - len(untriggered),
        run_seed=None if rng is not None else seed,
    )


def summarize(metrics: RunMetrics) -> RunSummary:
    """Collapse one run to its four headline numbers; an idle run scores 1.0s."""
    if metrics.num_triggered == 0:
        return RunSummary(1.0, 1.0, 1.0, 1.0)
    times = list(metrics.delivery_times.values())
    pilots = metrics.pilots_per_slot
    return RunSummary(
        avg_delivery=fmean(times),
        max_delivery=float(max(times)),
        avg_pilots=fmean(pilots),
        max_pilots=float(max(pilots)),
    )


# -- internals ---------------------------------------------------------------


def _tables(tree: CollisionTree, bit: dict[int, int]):
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
    return children_of, mask_of


def _advance(frontier, children_of, mask_of):
    """One slot of one process: reserve children's pilots, split the cohort."""
    reserved = 0
    advanced = []
    done_mask = 0
    for node_id, group in frontier:
        kids = children_of[node_id]
        reserved += len(kids)
        for kid in kids:
            sub = group & mask_of[kid]
            c = sub.bit_count()
            if c == 1:
                done_mask |= sub
            elif c >= 2:
                advanced.append((kid, sub))
    return reserved, advanced, done_mask
