"""Alarm sources, random instance generation, and JSON persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, ValidationError


@dataclass(frozen=True)
class AlarmSource:
    """A single alarm with its per-slot trigger probability."""

    id: int
    trigger_prob: float
    deadline: int | None = None  # max tolerable delivery time, in slots

    def __post_init__(self):
        if self.id < 0:
            raise ValidationError(f"alarm id must be >= 0, got {self.id}")
        if not 0.0 <= self.trigger_prob <= 1.0:
            raise ValidationError(
                f"trigger_prob of alarm {self.id} must be in [0, 1], "
                f"got {self.trigger_prob}"
            )
        if self.deadline is not None and self.deadline < 1:
            raise ValidationError(
                f"deadline of alarm {self.id} must be >= 1, got {self.deadline}"
            )


@dataclass(frozen=True)
class AlarmSet:
    """Immutable collection of alarms with unique ids, kept in ascending id order."""

    alarms: tuple[AlarmSource, ...]

    def __post_init__(self):
        ids = [a.id for a in self.alarms]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate alarm ids: {dupes}")
        ordered = tuple(sorted(self.alarms, key=lambda a: a.id))
        object.__setattr__(self, "alarms", ordered)
        object.__setattr__(self, "_by_id", {a.id: a for a in ordered})

    def __len__(self) -> int:
        return len(self.alarms)

    def __iter__(self):
        return iter(self.alarms)

    def __getitem__(self, index: int) -> AlarmSource:
        return self.alarms[index]

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(a.id for a in self.alarms)

    def by_id(self, alarm_id: int) -> AlarmSource:
        try:
            return self._by_id[alarm_id]
        except KeyError:
            raise KeyError(f"no alarm with id {alarm_id}") from None


@dataclass(frozen=True)
class InstanceConfig:
    """Parameters for drawing a random alarm instance."""

    num_alarms: int
    p_max: float
    seed: int

    def __post_init__(self):
        if self.num_alarms < 1:
            raise ConfigError(f"num_alarms must be >= 1, got {self.num_alarms}")
        if not 0.0 < self.p_max <= 1.0:
            raise ConfigError(f"p_max must be in (0, 1], got {self.p_max}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


def generate_instance(config: InstanceConfig) -> AlarmSet:
    """Draw an alarm set with ids 0..n-1 and probabilities uniform on (0, p_max].

    The generator is PCG64, so a given config reproduces the same instance on
    any platform. One uniform is consumed per alarm, in ascending id order;
    the map ``p_max * (1 - u)`` turns the half-open draw [0, 1) into (0, p_max],
    keeping zero-probability alarms out of generated instances.
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    draws = rng.random(config.num_alarms)
    return AlarmSet(
        tuple(
            AlarmSource(id=i, trigger_prob=float(config.p_max * (1.0 - u)))
            for i, u in enumerate(draws)
        )
    )


def save_alarms(alarms: AlarmSet, path: str | Path) -> None:
    """Write an alarm set as JSON; floats keep full round-trip precision."""
    Path(path).write_text(alarms_to_json(alarms), encoding="utf-8")


def load_alarms(path: str | Path) -> AlarmSet:
    """Read an alarm set written by save_alarms, validating every record."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return alarms_from_json(text)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def alarms_to_json(alarms: AlarmSet) -> str:
    records = []
    for a in alarms:
        rec: dict = {"id": a.id, "trigger_prob": a.trigger_prob}
        if a.deadline is not None:
            rec["deadline"] = a.deadline
        records.append(rec)
    return json.dumps({"alarms": records}, indent=2) + "\n"


def alarms_from_json(text: str) -> AlarmSet:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict) or "alarms" not in data:
        raise ParseError("top-level object must contain an 'alarms' array")
    if not isinstance(data["alarms"], list):
        raise ParseError("'alarms' must be an array")
    sources = []
    for i, rec in enumerate(data["alarms"]):
        sources.append(_parse_record(rec, f"alarms[{i}]"))
    return AlarmSet(tuple(sources))


def _parse_record(rec, where: str) -> AlarmSource:
    if not isinstance(rec, dict):
        raise ParseError(f"{where}: expected an object")
    for key in ("id", "trigger_prob"):
        if key not in rec:
            raise ParseError(f"{where}.{key}: missing")
    if not isinstance(rec["id"], int) or isinstance(rec["id"], bool):
        raise ParseError(f"{where}.id: expected an integer")
    prob = rec["trigger_prob"]
    if not isinstance(prob, (int, float)) or isinstance(prob, bool):
        raise ParseError(f"{where}.trigger_prob: expected a number")
    deadline = rec.get("deadline")
    if deadline is not None and (not isinstance(deadline, int) or isinstance(deadline, bool)):
        raise ParseError(f"{where}.deadline: expected an integer")
    unknown = set(rec) - {"id", "trigger_prob", "deadline"}
    if unknown:
        raise ParseError(f"{where}: unknown fields {sorted(unknown)}")
    return AlarmSource(id=rec["id"], trigger_prob=float(prob), deadline=deadline)
