"""Collision-tree construction, pilot labeling, and deadline repair.

A collision tree groups alarms bottom-up so that simultaneous transmissions
can be disambiguated level by level: every node owns one pilot within its
level, the root owns the shared pilot 0, and an alarm's pilot sequence is the
label path from the root down to its private leaf.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .alarms import AlarmSet
from .errors import ConfigError, DeadlineError, ParseError, ValidationError


def node_probability(leaf_probs) -> float:
    """Probability that at least one of the given alarms triggers in a slot."""
    probs = list(leaf_probs)
    if not probs:
        raise ValidationError("node_probability needs at least one probability")
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"probability out of range [0, 1]: {p}")
    quiet = 1.0
    for p in probs:
        quiet *= 1.0 - p
    return 1.0 - quiet


@dataclass(frozen=True)
class TreeNode:
    """One node of a collision tree; leaves carry the alarm they stand for."""

    node_id: int
    prob: float
    level: int
    pilot_label: int
    alarm_id: int | None = None
    children: tuple["TreeNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=True)
class CollisionTree:
    """Immutable alarm hierarchy plus the lookup tables derived from it."""

    root: TreeNode
    leaf_of: dict[int, TreeNode]  # alarm id -> its leaf
    depth: int  # number of levels; the root sits at level 0

    def nodes(self) -> list[TreeNode]:
        """All nodes level by level, each level in its parents' order."""
        out = [self.root]
        i = 0
        while i < len(out):
            out.extend(out[i].children)
            i += 1
        return out

    def levels(self) -> list[list[TreeNode]]:
        by_level: list[list[TreeNode]] = [[] for _ in range(self.depth)]
        for node in self.nodes():
            by_level[node.level].append(node)
        return by_level

    def parent_map(self) -> dict[int, TreeNode]:
        """Map from a child's node_id to its parent node."""
        parents: dict[int, TreeNode] = {}
        for node in self.nodes():
            for child in node.children:
                parents[child.node_id] = node
        return parents

    def node_by_id(self, node_id: int) -> TreeNode:
        for node in self.nodes():
            if node.node_id == node_id:
                return node
        raise KeyError(f"no tree node with id {node_id}")


@dataclass(frozen=True)
class PilotSequence:
    """Root-to-leaf pilot labels an alarm transmits on, one per slot."""

    alarm_id: int
    labels: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    max_width: int


class _Draft:
    """Mutable node used while a tree is being shaped."""

    __slots__ = ("node_id", "prob", "alarm_id", "children")

    def __init__(self, node_id, prob, alarm_id=None, children=None):
        self.node_id = node_id
        self.prob = prob
        self.alarm_id = alarm_id
        self.children = children if children is not None else []


def build_tree(alarms: AlarmSet) -> CollisionTree:
    """Merge alarms bottom-up into a binary hierarchy, quietest first.

    Orphan nodes are paired off in rounds: sort the current orphans by
    (probability, node id), pair neighbours starting from the quietest two,
    and carry an odd leftover into the next round. A parent's probability is
    node_probability() over every alarm beneath it. Pairing whole rounds at
    a time keeps each level as wide as possible, so a tree over n alarms has
    ceil(log2 n) + 1 levels, the fewest any binary tree can achieve, which in
    turn minimises the worst-case pilot-sequence length.

    Leaves reuse their alarm id as node id; merged nodes take ids in creation
    order starting just above the highest alarm id.
    """
    if len(alarms) == 0:
        raise ValidationError("cannot build a tree over zero alarms")
    orphans = [_Draft(a.id, a.trigger_prob, alarm_id=a.id) for a in alarms]
    next_id = max(a.id for a in alarms) + 1
    while len(orphans) > 1:
        orphans.sort(key=lambda d: (d.prob, d.node_id))
        merged = []
        for i in range(0, len(orphans) - 1, 2):
            parent = _Draft(next_id, 0.0, children=[orphans[i], orphans[i + 1]])
            parent.prob = node_probability(_draft_leaf_probs(parent))
            next_id += 1
            merged.append(parent)
        if len(orphans) % 2:
            merged.append(orphans[-1])
        orphans = merged
    return _freeze(orphans[0])


def assign_pilots(tree: CollisionTree) -> CollisionTree:
    """Relabel pilots canonically: 0 at the root, 1.. left-to-right per level."""
    return _freeze(_thaw(tree.root))


def pilot_sequence(tree: CollisionTree, alarm_id: int) -> PilotSequence:
    """Labels the alarm transmits on, slot by slot, from shared pilot to leaf."""
    leaf = _leaf_or_raise(tree, alarm_id)
    parents = tree.parent_map()
    labels = [leaf.pilot_label]
    node = parents.get(leaf.node_id)
    while node is not None:
        labels.append(node.pilot_label)
        node = parents.get(node.node_id)
    return PilotSequence(alarm_id=alarm_id, labels=tuple(reversed(labels)))


def max_delivery_time(tree: CollisionTree, alarm_id: int) -> int:
    """Worst-case slots until delivery: the alarm's pilot-sequence length."""
    return _leaf_or_raise(tree, alarm_id).level + 1


def enforce_deadlines(tree: CollisionTree, alarms: AlarmSet) -> CollisionTree:
    """Promote deadline-constrained leaves until every deadline is met.

    A leaf whose worst-case delivery (level + 1) exceeds its deadline is
    re-attached one level up, as a sibling of its former parent; a parent
    left with a single child is spliced out. Promotions never deepen any
    other leaf, so earlier repairs stay valid. Probabilities are recomputed,
    children re-sorted into (probability, node id) order, and pilots
    reassigned before the new tree is returned. With two or more alarms no
    leaf can sit above level 1, so a deadline of 1 is only feasible for a
    single-alarm tree.
    """
    root = _thaw(tree.root)
    parent_of: dict[int, _Draft] = {}
    leaf_by_alarm: dict[int, _Draft] = {}
    _index_drafts(root, None, parent_of, leaf_by_alarm)
    for alarm in alarms:
        if alarm.id not in leaf_by_alarm:
            raise ValidationError(f"alarm {alarm.id} is not a leaf of this tree")
    for alarm in alarms:
        if alarm.deadline is None:
            continue
        leaf = leaf_by_alarm[alarm.id]
        while _draft_level(leaf, parent_of) + 1 > alarm.deadline:
            parent = parent_of.get(leaf.node_id)
            grand = parent_of.get(parent.node_id) if parent is not None else None
            if parent is None or grand is None:
                raise DeadlineError(
                    alarm.id,
                    f"deadline {alarm.deadline} of alarm {alarm.id} cannot be met: "
                    f"delivery takes at least {_draft_level(leaf, parent_of) + 1} slots",
                )
            parent.children.remove(leaf)
            if len(parent.children) == 1:
                only = parent.children[0]
                grand.children[grand.children.index(parent)] = only
                parent_of[only.node_id] = grand
                del parent_of[parent.node_id]
            grand.children.append(leaf)
            parent_of[leaf.node_id] = grand
    _recompute_probs(root)
    _sort_children(root)
    return _freeze(root)


def check_feasibility(tree: CollisionTree, pilot_budget: int) -> FeasibilityReport:
    """Whether every level fits in the per-slot pilot budget."""
    if pilot_budget < 1:
        raise ConfigError(f"pilot_budget must be >= 1, got {pilot_budget}")
    max_width = max(len(level) for level in tree.levels())
    return FeasibilityReport(feasible=max_width <= pilot_budget, max_width=max_width)


def serialize_tree(tree: CollisionTree, fmt: str = "structured") -> str:
    """Render a tree as structured JSON or as a DOT graph description."""
    if fmt == "structured":
        return json.dumps(_node_record(tree.root), indent=2) + "\n"
    if fmt == "dot":
        return _to_dot(tree)
    raise ConfigError(f"unknown tree format {fmt!r}; use 'structured' or 'dot'")


def deserialize_tree(text: str) -> CollisionTree:
    """Parse the structured JSON format back into a tree, validating as it goes."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}: {exc.msg}") from None
    root = _parse_node(data, "root", level=0)
    tree = _finish(root)
    _validate_loaded(tree)
    return tree


# -- internals ---------------------------------------------------------------


def _draft_leaf_probs(draft: _Draft) -> list[float]:
    if not draft.children:
        return [draft.prob]
    out: list[float] = []
    stack = [draft]
    while stack:
        d = stack.pop()
        if d.children:
            stack.extend(reversed(d.children))
        else:
            out.append(d.prob)
    return out


def _thaw(node: TreeNode) -> _Draft:
    return _Draft(
        node.node_id,
        node.prob,
        alarm_id=node.alarm_id,
        children=[_thaw(c) for c in node.children],
    )


def _index_drafts(draft, parent, parent_of, leaf_by_alarm):
    if parent is not None:
        parent_of[draft.node_id] = parent
    if not draft.children:
        leaf_by_alarm[draft.alarm_id] = draft
    for child in draft.children:
        _index_drafts(child, draft, parent_of, leaf_by_alarm)


def _draft_level(draft: _Draft, parent_of: dict[int, _Draft]) -> int:
    level = 0
    node = draft
    while node.node_id in parent_of:
        node = parent_of[node.node_id]
        level += 1
    return level


def _recompute_probs(draft: _Draft) -> None:
    for child in draft.children:
        _recompute_probs(child)
    if draft.children:
        draft.prob = node_probability(_draft_leaf_probs(draft))


def _sort_children(draft: _Draft) -> None:
    draft.children.sort(key=lambda d: (d.prob, d.node_id))
    for child in draft.children:
        _sort_children(child)


def _freeze(root_draft: _Draft) -> CollisionTree:
    """Assign levels and canonical pilot labels, then emit frozen nodes."""
    order = [root_draft]
    level = {id(root_draft): 0}
    i = 0
    while i < len(order):
        draft = order[i]
        i += 1
        for child in draft.children:
            level[id(child)] = level[id(draft)] + 1
            order.append(child)
    depth = max(level.values()) + 1
    next_label = [1] * depth
    label = {}
    for draft in order:  # breadth-first, so labels run left-to-right per level
        lv = level[id(draft)]
        if lv == 0:
            label[id(draft)] = 0
        else:
            label[id(draft)] = next_label[lv]
            next_label[lv] += 1
    frozen: dict[int, TreeNode] = {}
    for draft in reversed(order):
        children = tuple(frozen[id(c)] for c in draft.children)
        frozen[id(draft)] = TreeNode(
            node_id=draft.node_id,
            prob=draft.prob,
            level=level[id(draft)],
            pilot_label=label[id(draft)],
            alarm_id=draft.alarm_id,
            children=children,
        )
    return _finish(frozen[id(root_draft)])


def _finish(root: TreeNode) -> CollisionTree:
    leaf_of: dict[int, TreeNode] = {}
    depth = 0
    stack = [root]
    while stack:
        node = stack.pop()
        depth = max(depth, node.level + 1)
        if node.is_leaf:
            leaf_of[node.alarm_id] = node
        stack.extend(node.children)
    return CollisionTree(root=root, leaf_of=leaf_of, depth=depth)


def _leaf_or_raise(tree: CollisionTree, alarm_id: int) -> TreeNode:
    try:
        return tree.leaf_of[alarm_id]
    except KeyError:
        raise KeyError(f"no alarm with id {alarm_id} in this tree") from None


def _node_record(node: TreeNode) -> dict:
    rec: dict = {
        "node_id": node.node_id,
        "prob": node.prob,
        "pilot_label": node.pilot_label,
    }
    if node.alarm_id is not None:
        rec["alarm_id"] = node.alarm_id
    rec["children"] = [_node_record(c) for c in node.children]
    return rec


def _parse_node(data, where: str, level: int) -> TreeNode:
    if not isinstance(data, dict):
        raise ParseError(f"{where}: expected an object")
    for key in ("node_id", "prob", "pilot_label"):
        if key not in data:
            raise ParseError(f"{where}.{key}: missing")
    node_id = data["node_id"]
    if not isinstance(node_id, int) or isinstance(node_id, bool):
        raise ParseError(f"{where}.node_id: expected an integer")
    prob = data["prob"]
    if not isinstance(prob, (int, float)) or isinstance(prob, bool):
        raise ParseError(f"{where}.prob: expected a number")
    if not 0.0 <= prob <= 1.0:
        raise ValidationError(f"{where}.prob: out of range [0, 1]: {prob}")
    pilot_label = data["pilot_label"]
    if not isinstance(pilot_label, int) or isinstance(pilot_label, bool) or pilot_label < 0:
        raise ParseError(f"{where}.pilot_label: expected a non-negative integer")
    children_data = data.get("children", [])
    if not isinstance(children_data, list):
        raise ParseError(f"{where}.children: expected an array")
    unknown = set(data) - {"node_id", "prob", "pilot_label", "alarm_id", "children"}
    if unknown:
        raise ParseError(f"{where}: unknown fields {sorted(unknown)}")
    children = tuple(
        _parse_node(c, f"{where}.children[{i}]", level + 1)
        for i, c in enumerate(children_data)
    )
    alarm_id = data.get("alarm_id")
    if children:
        if len(children) == 1:
            raise ValidationError(f"{where}: internal node {node_id} has a single child")
        if alarm_id is not None:
            raise ValidationError(f"{where}: internal node {node_id} carries an alarm_id")
    else:
        if alarm_id is None:
            raise ValidationError(f"{where}: leaf node {node_id} is missing alarm_id")
        if not isinstance(alarm_id, int) or isinstance(alarm_id, bool):
            raise ParseError(f"{where}.alarm_id: expected an integer")
    return TreeNode(
        node_id=node_id,
        prob=float(prob),
        level=level,
        pilot_label=pilot_label,
        alarm_id=alarm_id,
        children=children,
    )


def _validate_loaded(tree: CollisionTree) -> None:
    nodes = tree.nodes()
    node_ids = [n.node_id for n in nodes]
    if len(set(node_ids)) != len(node_ids):
        dupes = sorted({i for i in node_ids if node_ids.count(i) > 1})
        raise ValidationError(f"duplicate node ids: {dupes}")
    alarm_ids = [n.alarm_id for n in nodes if n.is_leaf]
    if len(set(alarm_ids)) != len(alarm_ids):
        dupes = sorted({i for i in alarm_ids if alarm_ids.count(i) > 1})
        raise ValidationError(f"duplicate alarm ids on leaves: {dupes}")
    for lv, members in enumerate(tree.levels()):
        labels = sorted(n.pilot_label for n in members)
        expected = [0] if lv == 0 else list(range(1, len(members) + 1))
        if labels != expected:
            raise ValidationError(
                f"pilot labels at level {lv} must be {expected}, got {labels}"
            )


def _to_dot(tree: CollisionTree) -> str:
    lines = ["digraph collision_tree {"]
    lines.append("  node [shape=circle];")
    for node in tree.nodes():
        extra = " shape=box style=filled fillcolor=lightgrey" if node.is_leaf else ""
        lines.append(
            f'  n{node.node_id} [label="prob={node.prob:.4g} pilot={node.pilot_label}"{extra}];'
        )
    for node in tree.nodes():
        for child in node.children:
            lines.append(f"  n{node.node_id} -> n{child.node_id};")
    for members in tree.levels():
        ids = " ".join(f"n{n.node_id};" for n in members)
        lines.append(f"  {{ rank=same; {ids} }}")
    lines.append("}")
    return "\n".join(lines) + "\n"
