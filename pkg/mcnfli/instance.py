"""Problem data for min-cost flow with linear interdependencies.

An :class:`Instance` is immutable once built. Node ids are the contiguous
integers ``1..m``; arc ids only need to be unique (fixed subproblems keep the
ids of the arcs they did not delete).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

from .conf import tolerance
from .exceptions import InstanceError, InstanceFormatError

log = logging.getLogger(__name__)

INF = math.inf


class InstanceKind(str, Enum):
    LIDM = "mcnfli"
    BIDM = "bidm"


@dataclass(frozen=True)
class NodeRecord:
    id: int
    supply: float = 0.0


@dataclass(frozen=True)
class ArcRecord:
    id: int
    tail: int
    head: int
    capacity: float
    cost: float


@dataclass(frozen=True)
class Interdependence:
    """``x_child <= alpha * x_parent + beta``."""

    parent: int
    child: int
    alpha: float
    beta: float


@dataclass(frozen=True)
class BridgeArc:
    """Arc joining two instances in :func:`merge_networks`.

    Endpoints are ``(instance_index, node_id)`` pairs.
    """

    tail: tuple[int, int]
    head: tuple[int, int]
    capacity: float
    cost: float


@dataclass(frozen=True)
class Violation:
    entity: str
    message: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.message}"


@dataclass(frozen=True)
class Instance:
    nodes: tuple[NodeRecord, ...]
    arcs: tuple[ArcRecord, ...]
    interdeps: tuple[Interdependence, ...] = ()
    kind: InstanceKind = InstanceKind.LIDM

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "interdeps", tuple(self.interdeps))
        object.__setattr__(self, "kind", InstanceKind(self.kind))

    @property
    def m(self) -> int:
        return len(self.nodes)

    @property
    def n(self) -> int:
        return len(self.arcs)

    @property
    def p(self) -> int:
        return len(self.interdeps)

    @cached_property
    def node_index(self) -> dict[int, int]:
        return {node.id: pos for pos, node in enumerate(self.nodes)}

    @cached_property
    def arc_index(self) -> dict[int, int]:
        return {arc.id: pos for pos, arc in enumerate(self.arcs)}

    def arc(self, arc_id: int) -> ArcRecord:
        try:
            return self.arcs[self.arc_index[arc_id]]
        except KeyError:
            raise InstanceError("unknown arc id", entity=f"arc {arc_id}") from None

    def node(self, node_id: int) -> NodeRecord:
        try:
            return self.nodes[self.node_index[node_id]]
        except KeyError:
            raise InstanceError("unknown node id", entity=f"node {node_id}") from None

    @property
    def total_supply(self) -> float:
        return sum(node.supply for node in self.nodes if node.supply > 0)

    @property
    def max_cost(self) -> float:
        return max((arc.cost for arc in self.arcs), default=0.0)


def _scale(values: Iterable[float]) -> float:
    return max(1.0, sum(abs(v) for v in values))


def validate(instance: Instance) -> list[Violation]:
    tol = tolerance()
    problems: list[Violation] = []

    def flag(entity: str, message: str) -> None:
        problems.append(Violation(entity, message))

    if instance.m < 2:
        flag("instance", f"needs at least 2 nodes, has {instance.m}")
    if instance.n < 1:
        flag("instance", "needs at least 1 arc")

    seen_nodes: set[int] = set()
    for node in instance.nodes:
        if node.id in seen_nodes:
            flag(f"node {node.id}", "duplicate node id")
        seen_nodes.add(node.id)
        if not math.isfinite(node.supply):
            flag(f"node {node.id}", f"supply {node.supply!r} is not finite")
    if seen_nodes and sorted(seen_nodes) != list(range(1, len(seen_nodes) + 1)):
        flag("instance", "node ids must be the contiguous range 1..m")

    supplies = [node.supply for node in instance.nodes if math.isfinite(node.supply)]
    imbalance = sum(supplies)
    if abs(imbalance) > tol * _scale(supplies):
        flag("supply", f"supplies sum to {imbalance:g}, expected 0")

    seen_arcs: set[int] = set()
    for arc in instance.arcs:
        entity = f"arc {arc.id}"
        if arc.id in seen_arcs:
            flag(entity, "duplicate arc id")
        seen_arcs.add(arc.id)
        for end in (arc.tail, arc.head):
            if end not in seen_nodes:
                flag(entity, f"endpoint {end} is not a node")
        if arc.tail == arc.head:
            flag(entity, "self-loop")
        if math.isnan(arc.capacity) or arc.capacity < 0:
            flag(entity, f"capacity {arc.capacity!r} is negative")
        if not math.isfinite(arc.cost):
            flag(entity, f"cost {arc.cost!r} is not finite")

    used: dict[int, int] = {}
    for t, rec in enumerate(instance.interdeps, start=1):
        entity = f"interdependence {t}"
        if rec.parent == rec.child:
            flag(entity, "parent and child are the same arc")
        for arc_id in (rec.parent, rec.child):
            if arc_id not in seen_arcs:
                flag(entity, f"arc {arc_id} does not exist")
            if arc_id in used and used[arc_id] != t:
                flag(entity, f"arc {arc_id} already used by interdependence {used[arc_id]}")
            used.setdefault(arc_id, t)
        if not (math.isfinite(rec.alpha) and math.isfinite(rec.beta)):
            flag(entity, "alpha and beta must be finite")
            continue
        if rec.beta < -tol:
            flag(entity, f"alpha*0 + beta = {rec.beta:g} < 0")
        parent = instance.arcs[instance.arc_index[rec.parent]] if rec.parent in instance.arc_index else None
        child = instance.arcs[instance.arc_index[rec.child]] if rec.child in instance.arc_index else None
        if parent is not None:
            if math.isinf(parent.capacity):
                if rec.alpha < 0:
                    flag(entity, "negative alpha on an uncapacitated parent")
            elif rec.alpha * parent.capacity + rec.beta < -tol:
                flag(entity, f"alpha*u + beta = {rec.alpha * parent.capacity + rec.beta:g} < 0")
        if instance.kind is InstanceKind.BIDM:
            for role, arc in (("parent", parent), ("child", child)):
                if arc is not None and not math.isfinite(arc.capacity):
                    flag(entity, f"{role} arc {arc.id} needs a finite capacity")
            if parent is not None and parent.capacity <= 0:
                flag(entity, f"parent arc {parent.id} needs a positive capacity")
    return problems


def ensure_valid(instance: Instance) -> Instance:
    problems = validate(instance)
    if problems:
        raise InstanceError("; ".join(str(v) for v in problems[:5]), entity="instance")
    return instance


# ---------------------------------------------------------------------------
# Extended DIMACS text format
# ---------------------------------------------------------------------------

_KINDS = {kind.value: kind for kind in InstanceKind}


def _int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise InstanceFormatError(f"expected an integer, got {token!r}", lineno) from None


def _real(token: str, lineno: int) -> float:
    if token.lower() in ("inf", "+inf"):
        return INF
    try:
        value = float(token)
    except ValueError:
        raise InstanceFormatError(f"expected a number, got {token!r}", lineno) from None
    if math.isnan(value):
        raise InstanceFormatError("NaN is not allowed", lineno)
    return value


def _expect(tokens: list[str], count: int, lineno: int) -> None:
    if len(tokens) != count:
        raise InstanceFormatError(
            f"'{tokens[0]}' record needs {count - 1} fields, got {len(tokens) - 1}", lineno
        )


def parse(text: bytes | str) -> Instance:
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")

    header: tuple[InstanceKind, int, int, int] | None = None
    supplies: dict[int, float] = {}
    arcs: list[ArcRecord] = []
    arc_ids: set[int] = set()
    interdeps: list[Interdependence] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens or tokens[0] == "c":
            continue
        tag = tokens[0]
        if tag == "p":
            if header is not None:
                raise InstanceFormatError("second problem line", lineno)
            _expect(tokens, 5, lineno)
            kind = _KINDS.get(tokens[1].lower())
            if kind is None:
                raise InstanceFormatError(f"unknown problem type {tokens[1]!r}", lineno)
            m, n, p = (_int(tok, lineno) for tok in tokens[2:5])
            if min(m, n, p) < 0:
                raise InstanceFormatError("negative count in problem line", lineno)
            header = (kind, m, n, p)
            continue
        if header is None:
            raise InstanceFormatError(f"'{tag}' record before the problem line", lineno)
        if tag == "n":
            _expect(tokens, 3, lineno)
            node_id = _int(tokens[1], lineno)
            if not 1 <= node_id <= header[1]:
                raise InstanceFormatError(f"node id {node_id} outside 1..{header[1]}", lineno)
            if node_id in supplies:
                raise InstanceError(f"duplicate node record (line {lineno})", entity=f"node {node_id}")
            supplies[node_id] = _real(tokens[2], lineno)
        elif tag == "a":
            _expect(tokens, 6, lineno)
            arc_id, tail, head = (_int(tok, lineno) for tok in tokens[1:4])
            if arc_id in arc_ids:
                raise InstanceError(f"duplicate arc id (line {lineno})", entity=f"arc {arc_id}")
            arc_ids.add(arc_id)
            arcs.append(
                ArcRecord(arc_id, tail, head, _real(tokens[4], lineno), _real(tokens[5], lineno))
            )
        elif tag == "i":
            _expect(tokens, 5, lineno)
            interdeps.append(
                Interdependence(
                    _int(tokens[1], lineno),
                    _int(tokens[2], lineno),
                    _real(tokens[3], lineno),
                    _real(tokens[4], lineno),
                )
            )
        else:
            raise InstanceFormatError(f"unknown record type {tag!r}", lineno)

    if header is None:
        raise InstanceFormatError("missing problem line")
    kind, m, n, p = header
    if len(arcs) != n:
        raise InstanceFormatError(f"problem line declares {n} arcs, found {len(arcs)}")
    if len(interdeps) != p:
        raise InstanceFormatError(f"problem line declares {p} interdependencies, found {len(interdeps)}")
    nodes = tuple(NodeRecord(i, supplies.get(i, 0.0)) for i in range(1, m + 1))
    return Instance(nodes, tuple(arcs), tuple(interdeps), kind)


def format_number(value: float) -> str:
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def serialize(instance: Instance) -> bytes:
    lines = [f"p {instance.kind.value} {instance.m} {instance.n} {instance.p}"]
    lines += [f"n {node.id} {format_number(node.supply)}" for node in instance.nodes]
    lines += [
        f"a {arc.id} {arc.tail} {arc.head} {format_number(arc.capacity)} {format_number(arc.cost)}"
        for arc in instance.arcs
    ]
    lines += [
        f"i {rec.parent} {rec.child} {format_number(rec.alpha)} {format_number(rec.beta)}"
        for rec in instance.interdeps
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_instance(path: str | Path) -> Instance:
    return parse(Path(path).read_bytes())


def write_instance(path: str | Path, instance: Instance) -> None:
    Path(path).write_bytes(serialize(instance))


# ---------------------------------------------------------------------------
# Transformations
# ---------------------------------------------------------------------------


def relaxation(instance: Instance) -> Instance:
    """LIDM reading of a BIDM instance: ``x_child <= (u_child / u_parent) x_parent``."""
    if instance.kind is InstanceKind.LIDM:
        return instance
    interdeps = tuple(
        Interdependence(
            rec.parent,
            rec.child,
            instance.arc(rec.child).capacity / instance.arc(rec.parent).capacity,
            0.0,
        )
        for rec in instance.interdeps
    )
    return Instance(instance.nodes, instance.arcs, interdeps, InstanceKind.LIDM)


def merge_networks(instances: Sequence[Instance], bridges: Sequence[BridgeArc] = ()) -> Instance:
    if not instances:
        raise InstanceError("nothing to merge", entity="merge")
    kinds = {inst.kind for inst in instances}
    if len(kinds) > 1:
        raise InstanceError("cannot merge LIDM and BIDM instances", entity="merge")

    node_maps: list[dict[int, int]] = []
    nodes: list[NodeRecord] = []
    arcs: list[ArcRecord] = []
    interdeps: list[Interdependence] = []
    for inst in instances:
        node_map = {}
        for node in inst.nodes:
            node_map[node.id] = len(nodes) + 1
            nodes.append(NodeRecord(len(nodes) + 1, node.supply))
        node_maps.append(node_map)
        arc_map = {}
        for arc in inst.arcs:
            arc_map[arc.id] = len(arcs) + 1
            arcs.append(
                ArcRecord(len(arcs) + 1, node_map[arc.tail], node_map[arc.head], arc.capacity, arc.cost)
            )
        interdeps += [
            Interdependence(arc_map[rec.parent], arc_map[rec.child], rec.alpha, rec.beta)
            for rec in inst.interdeps
        ]

    def endpoint(ref: tuple[int, int], which: str, pos: int) -> int:
        k, node_id = ref
        if not 0 <= k < len(node_maps) or node_id not in node_maps[k]:
            raise InstanceError(f"dangling {which} endpoint {ref}", entity=f"bridge {pos}")
        return node_maps[k][node_id]

    for pos, bridge in enumerate(bridges, start=1):
        arcs.append(
            ArcRecord(
                len(arcs) + 1,
                endpoint(bridge.tail, "tail", pos),
                endpoint(bridge.head, "head", pos),
                bridge.capacity,
                bridge.cost,
            )
        )
    log.debug("merged %d instances into %d nodes / %d arcs", len(instances), len(nodes), len(arcs))
    return Instance(tuple(nodes), tuple(arcs), tuple(interdeps), instances[0].kind)


def default_penalty(instance: Instance) -> float:
    return 10.0 * max(instance.max_cost, 1.0)


def structured_transform(
    instance: Instance,
    parent_nodes: Sequence[int],
    penalty_cost: float | None = None,
) -> tuple[Instance, dict[int, int]]:
    """Turn demand nodes into parent arcs that are saturated iff the demand is met.

    Each listed demand node ``d`` hands its demand to a new node ``d'`` reached by
    the parent arc ``(d, d')``. A hub node collects supply through cost-0 arcs and
    can cover any shortfall at ``penalty_cost`` per unit through ``(hub, d')``.
    """
    if not parent_nodes:
        return instance, {}
    if len(set(parent_nodes)) != len(parent_nodes):
        raise InstanceError("parent node listed twice", entity="structured transform")
    penalty = default_penalty(instance) if penalty_cost is None else float(penalty_cost)
    if penalty <= instance.max_cost:
        raise InstanceError(
            f"penalty {penalty:g} must exceed the largest arc cost {instance.max_cost:g}",
            entity="structured transform",
        )
    for node_id in parent_nodes:
        if instance.node(node_id).supply >= 0:
            raise InstanceError("not a demand node", entity=f"node {node_id}")

    supplies = {node.id: node.supply for node in instance.nodes}
    next_node = instance.m + 1
    next_arc = max(arc.id for arc in instance.arcs) + 1
    new_nodes: list[NodeRecord] = []
    new_arcs: list[ArcRecord] = []
    mapping: dict[int, int] = {}
    shadows: list[tuple[int, float]] = []

    for node_id in parent_nodes:
        demand = supplies[node_id]
        shadow = next_node
        next_node += 1
        supplies[node_id] = 0.0
        new_nodes.append(NodeRecord(shadow, demand))
        new_arcs.append(ArcRecord(next_arc, node_id, shadow, -demand, 0.0))
        mapping[node_id] = next_arc
        next_arc += 1
        shadows.append((shadow, -demand))

    hub = next_node
    new_nodes.append(NodeRecord(hub, 0.0))
    for node in instance.nodes:
        if node.supply > 0:
            new_arcs.append(ArcRecord(next_arc, node.id, hub, node.supply, 0.0))
            next_arc += 1
    for shadow, amount in shadows:
        new_arcs.append(ArcRecord(next_arc, hub, shadow, amount, penalty))
        next_arc += 1

    nodes = tuple(NodeRecord(node.id, supplies[node.id]) for node in instance.nodes) + tuple(new_nodes)
    return replace(instance, nodes=nodes, arcs=instance.arcs + tuple(new_arcs)), mapping
