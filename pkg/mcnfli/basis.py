"""Basis bookkeeping: (B, L, U) partition, spanning forest, and the D / D-hat certificates.

Columns are numbered arcs first (original arcs, then any phase-1 artificial
arcs) and slacks after them, so column ``network.n + t`` is the slack of
interdependence ``t``. Nodes are dense positions ``0..m-1``.
"""

from __future__ import annotations

import io
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Iterable

import numpy as np
import pandas as pd

from .conf import solver_setting, tolerance
from .exceptions import BasisError, SingularMatrixError
from .instance import Instance

log = logging.getLogger(__name__)


class VarKind(str, Enum):
    FLOW = "flow"
    SLACK = "slack"


@dataclass(frozen=True, order=True)
class VariableRef:
    kind: VarKind
    index: int

    @classmethod
    def flow(cls, arc_position: int) -> "VariableRef":
        return cls(VarKind.FLOW, arc_position)

    @classmethod
    def slack(cls, interdep: int) -> "VariableRef":
        return cls(VarKind.SLACK, interdep)


class VarStatus(IntEnum):
    BASIC = 0
    LOWER = 1
    UPPER = 2


# ---------------------------------------------------------------------------
# Dense elimination
# ---------------------------------------------------------------------------


def gauss_rank(matrix: np.ndarray, tol: float | None = None) -> int:
    """Rank by Gaussian elimination with partial pivoting."""
    tol = tolerance() if tol is None else tol
    a = np.array(matrix, dtype=float, copy=True)
    if a.ndim != 2 or a.size == 0:
        return 0
    rows, cols = a.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivot = rank + int(np.argmax(np.abs(a[rank:, col])))
        if abs(a[pivot, col]) <= tol:
            continue
        if pivot != rank:
            a[[rank, pivot]] = a[[pivot, rank]]
        a[rank + 1 :, col:] -= np.outer(a[rank + 1 :, col] / a[rank, col], a[rank, col:])
        rank += 1
    return rank


def gauss_solve(matrix: np.ndarray, rhs: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Solve a square system by partial-pivot elimination; raises SingularMatrixError."""
    tol = tolerance() if tol is None else tol
    a = np.array(matrix, dtype=float, copy=True)
    b = np.array(rhs, dtype=float, copy=True)
    size = b.shape[0]
    if a.shape != (size, size):
        raise SingularMatrixError(f"expected a {size}x{size} system, got {a.shape}")
    for k in range(size):
        pivot = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[pivot, k]) <= tol:
            raise SingularMatrixError(f"pivot {k} below threshold ({abs(a[pivot, k]):.3g})")
        if pivot != k:
            a[[k, pivot]] = a[[pivot, k]]
            b[[k, pivot]] = b[[pivot, k]]
        factors = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(factors, a[k, k:])
        b[k + 1 :] -= factors * b[k]
    x = np.zeros(size)
    for k in range(size - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


# ---------------------------------------------------------------------------
# Network view
# ---------------------------------------------------------------------------


@dataclass
class FlowNetwork:
    """Array view of an instance, optionally extended with phase-1 artificial arcs."""

    m: int
    tail: np.ndarray
    head: np.ndarray
    capacity: np.ndarray
    cost: np.ndarray
    supply: np.ndarray
    parent: np.ndarray
    child: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    node_ids: tuple[int, ...]
    arc_ids: tuple[int, ...]
    n_original: int = -1
    arc_row: np.ndarray = field(init=False, repr=False)
    arc_coef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n_original < 0:
            self.n_original = len(self.tail)
        self.arc_row = np.full(self.n, -1, dtype=int)
        self.arc_coef = np.zeros(self.n)
        for t in range(self.p):
            self.arc_row[self.parent[t]] = t
            self.arc_coef[self.parent[t]] = -self.alpha[t]
            self.arc_row[self.child[t]] = t
            self.arc_coef[self.child[t]] = 1.0
        self.tails = self.tail.tolist()
        self.heads = self.head.tolist()

    @classmethod
    def from_instance(cls, instance: Instance) -> "FlowNetwork":
        index = instance.node_index
        arc_index = instance.arc_index
        return cls(
            m=instance.m,
            tail=np.array([index[a.tail] for a in instance.arcs], dtype=int),
            head=np.array([index[a.head] for a in instance.arcs], dtype=int),
            capacity=np.array([a.capacity for a in instance.arcs], dtype=float),
            cost=np.array([a.cost for a in instance.arcs], dtype=float),
            supply=np.array([node.supply for node in instance.nodes], dtype=float),
            parent=np.array([arc_index[r.parent] for r in instance.interdeps], dtype=int),
            child=np.array([arc_index[r.child] for r in instance.interdeps], dtype=int),
            alpha=np.array([r.alpha for r in instance.interdeps], dtype=float),
            beta=np.array([r.beta for r in instance.interdeps], dtype=float),
            node_ids=tuple(node.id for node in instance.nodes),
            arc_ids=tuple(a.id for a in instance.arcs),
        )

    @property
    def n(self) -> int:
        return len(self.tail)

    @property
    def p(self) -> int:
        return len(self.alpha)

    @property
    def ncols(self) -> int:
        return self.n + self.p

    @property
    def upper_bounds(self) -> np.ndarray:
        return np.concatenate([self.capacity, np.full(self.p, math.inf)])

    def with_artificial_star(self, root: int = 0) -> "FlowNetwork":
        """Append one uncapacitated arc between ``root`` and every other node, oriented by supply sign."""
        others = [i for i in range(self.m) if i != root]
        out_of = [i for i in others if self.supply[i] >= 0]
        into = [i for i in others if self.supply[i] < 0]
        tails = out_of + [root] * len(into)
        heads = [root] * len(out_of) + into
        extra = len(others)
        return replace(
            self,
            tail=np.concatenate([self.tail, np.array(tails, dtype=int)]),
            head=np.concatenate([self.head, np.array(heads, dtype=int)]),
            capacity=np.concatenate([self.capacity, np.full(extra, math.inf)]),
            cost=np.concatenate([self.cost, np.zeros(extra)]),
            n_original=self.n_original,
        )

    def with_capacity(self, capacity: np.ndarray) -> "FlowNetwork":
        return replace(self, capacity=np.asarray(capacity, dtype=float))

    def is_artificial(self, col: int) -> bool:
        return self.n_original <= col < self.n

    def column(self, var: "VariableRef | int") -> int:
        if isinstance(var, VariableRef):
            if var.kind is VarKind.SLACK:
                if not 0 <= var.index < self.p:
                    raise BasisError(f"slack index {var.index} out of range")
                return self.n + var.index
            return var.index
        return int(var)

    def ref(self, col: int) -> VariableRef:
        return VariableRef.slack(col - self.n) if col >= self.n else VariableRef.flow(col)

    def label(self, col: int) -> str:
        if col >= self.n:
            return f"s{col - self.n + 1}"
        tail, head = self.node_ids[self.tails[col]], self.node_ids[self.heads[col]]
        if self.is_artificial(col):
            return f"art({tail},{head})"
        return f"x({tail},{head})"

    def is_interdependent(self, col: int) -> bool:
        return col >= self.n or self.arc_row[col] >= 0


# ---------------------------------------------------------------------------
# Forest
# ---------------------------------------------------------------------------


@dataclass
class Forest:
    """Spanning forest of basic independent arcs.

    Trees are ordered by their smallest node and rooted there; each tree's node
    list is in breadth-first order, so every node comes after its parent.
    """

    tree_of: list[int]
    parent: list[int]
    parent_arc: list[int]
    depth: list[int]
    trees: list[list[int]]

    @property
    def count(self) -> int:
        return len(self.trees)

    @property
    def roots(self) -> list[int]:
        return [tree[0] for tree in self.trees]

    @property
    def tree_array(self) -> np.ndarray:
        return np.asarray(self.tree_of, dtype=int)

    @classmethod
    def build(cls, network: FlowNetwork, arcs: Iterable[int]) -> "Forest":
        m = network.m
        adjacency: list[list[tuple[int, int]]] = [[] for _ in range(m)]
        edges = 0
        for a in arcs:
            u, v = network.tails[a], network.heads[a]
            adjacency[u].append((a, v))
            adjacency[v].append((a, u))
            edges += 1
        tree_of = [-1] * m
        parent = [-1] * m
        parent_arc = [-1] * m
        depth = [0] * m
        trees: list[list[int]] = []
        for root in range(m):
            if tree_of[root] >= 0:
                continue
            h = len(trees)
            tree_of[root] = h
            order = [root]
            queue = deque([root])
            while queue:
                node = queue.popleft()
                for a, other in adjacency[node]:
                    if a == parent_arc[node]:
                        continue
                    if tree_of[other] >= 0:
                        raise BasisError(f"basic independent arcs contain a cycle through arc {a}")
                    tree_of[other] = h
                    parent[other] = node
                    parent_arc[other] = a
                    depth[other] = depth[node] + 1
                    order.append(other)
                    queue.append(other)
            trees.append(order)
        if edges != m - len(trees):
            raise BasisError("basic independent arcs contain a cycle")
        return cls(tree_of, parent, parent_arc, depth, trees)


def delta(tail: int, head: int, tree: int, forest: Forest) -> int:
    """+1 if the arc leaves ``tree``, -1 if it enters it, 0 otherwise."""
    in_tail = forest.tree_of[tail] == tree
    in_head = forest.tree_of[head] == tree
    if in_tail and not in_head:
        return 1
    if in_head and not in_tail:
        return -1
    return 0


# ---------------------------------------------------------------------------
# Basis
# ---------------------------------------------------------------------------


class BasisState:
    def __init__(self, network: FlowNetwork, status: np.ndarray, basic: Iterable[int]):
        self.network = network
        self.status = np.asarray(status, dtype=np.int8)
        self.basic = list(basic)
        self.forest = self._build_forest()

    @classmethod
    def from_sets(
        cls,
        network: FlowNetwork,
        basic: Iterable[VariableRef | int],
        upper: Iterable[VariableRef | int] = (),
    ) -> "BasisState":
        status = np.full(network.ncols, VarStatus.LOWER, dtype=np.int8)
        basic_cols = [network.column(v) for v in basic]
        if len(set(basic_cols)) != len(basic_cols):
            raise BasisError("duplicate basic variable")
        for col in upper:
            col = network.column(col)
            if math.isinf(network.upper_bounds[col]):
                raise BasisError(f"{network.label(col)} has no finite upper bound")
            status[col] = VarStatus.UPPER
        for col in basic_cols:
            if status[col] != VarStatus.LOWER:
                raise BasisError(f"{network.label(col)} is both basic and at its upper bound")
            status[col] = VarStatus.BASIC
        state = cls(network, status, basic_cols)
        state.validate()
        return state

    def _build_forest(self) -> Forest:
        net = self.network
        independent = (c for c in self.basic if c < net.n and net.arc_row[c] < 0)
        return Forest.build(net, independent)

    @property
    def r(self) -> int:
        return sum(1 for c in self.basic if self.network.is_interdependent(c))

    def is_basic(self, col: int) -> bool:
        return self.status[col] == VarStatus.BASIC

    def _refs(self, status: VarStatus) -> set[VariableRef]:
        return {self.network.ref(int(c)) for c in np.flatnonzero(self.status == status)}

    @property
    def lower(self) -> set[VariableRef]:
        return self._refs(VarStatus.LOWER)

    @property
    def upper(self) -> set[VariableRef]:
        return self._refs(VarStatus.UPPER)

    def validate(self) -> None:
        net = self.network
        expected = net.m + net.p - 1
        if len(self.basic) != expected:
            raise BasisError(f"basis has {len(self.basic)} variables, expected {expected}")
        if int(np.count_nonzero(self.status == VarStatus.BASIC)) != len(self.basic):
            raise BasisError("status array disagrees with the basic list")
        components = self.r - net.p + 1
        if self.forest.count != components:
            raise BasisError(f"forest has {self.forest.count} trees, expected r - p + 1 = {components}")

    def exchange(self, entering: int, leaving: int, leaving_status: VarStatus) -> None:
        slot = self.basic.index(leaving)
        self.basic[slot] = entering
        self.status[entering] = VarStatus.BASIC
        self.status[leaving] = leaving_status
        self.forest = self._build_forest()

    def copy(self) -> "BasisState":
        clone = object.__new__(BasisState)
        clone.network = self.network
        clone.status = self.status.copy()
        clone.basic = list(self.basic)
        clone.forest = self.forest
        return clone


# ---------------------------------------------------------------------------
# Certificate matrices
# ---------------------------------------------------------------------------


@dataclass
class CertMatrix:
    d: np.ndarray
    column_vars: list[int]
    row_tags: list[tuple[str, int]]
    dropped_row: np.ndarray
    dhat: np.ndarray
    dhat_columns: list[int]
    dhat_col_pos: list[int]
    dhat_rows: list[int]
    tight: list[int]
    loose: list[int]

    @property
    def r(self) -> int:
        return self.d.shape[0]


def build_cert(basis: BasisState) -> CertMatrix:
    net = basis.network
    forest = basis.forest
    basis.validate()
    trees = forest.count
    status = basis.status

    columns: list[int] = []
    for t in range(net.p):
        for arc in (int(net.parent[t]), int(net.child[t])):
            if status[arc] == VarStatus.BASIC:
                columns.append(arc)
    columns += [net.n + t for t in range(net.p) if status[net.n + t] == VarStatus.BASIC]

    r = len(columns)
    tree_rows = trees - 1
    d = np.zeros((r, r))
    dropped = np.zeros(r)
    last = trees - 1
    for j, col in enumerate(columns):
        if col >= net.n:
            d[tree_rows + col - net.n, j] = 1.0
            continue
        h_tail = forest.tree_of[net.tails[col]]
        h_head = forest.tree_of[net.heads[col]]
        if h_tail != h_head:
            for h, sign in ((h_tail, 1.0), (h_head, -1.0)):
                if h == last:
                    dropped[j] = sign
                else:
                    d[h, j] = sign
        d[tree_rows + net.arc_row[col], j] = net.arc_coef[col]

    row_tags = [("tree", h) for h in range(tree_rows)] + [("interdep", t) for t in range(net.p)]
    slack_basic = [status[net.n + t] == VarStatus.BASIC for t in range(net.p)]
    dhat_col_pos = [j for j, col in enumerate(columns) if col < net.n]
    dhat_rows = list(range(tree_rows)) + [tree_rows + t for t in range(net.p) if not slack_basic[t]]
    dhat = d[np.ix_(dhat_rows, dhat_col_pos)] if dhat_rows and dhat_col_pos else np.zeros((len(dhat_rows), len(dhat_col_pos)))
    arc_cols = [columns[j] for j in dhat_col_pos]
    tight = [c for c in arc_cols if not slack_basic[net.arc_row[c]]]
    loose = [c for c in arc_cols if slack_basic[net.arc_row[c]]]
    return CertMatrix(d, columns, row_tags, dropped, dhat, arc_cols, dhat_col_pos, dhat_rows, tight, loose)


def is_good(cert: CertMatrix, cross_check: bool | None = None) -> bool:
    full = gauss_rank(cert.d) == cert.r
    if cross_check is None:
        cross_check = bool(solver_setting("DEBUG_CHECKS"))
    if cross_check:
        rows, cols = cert.dhat.shape
        reduced = rows == cols and gauss_rank(cert.dhat) == rows
        if reduced != full:
            raise BasisError(f"D rank test says {full} but D-hat says {reduced}")
    return full


def dump_cert_csv(cert: CertMatrix, network: FlowNetwork) -> str:
    """D and D-hat as labelled CSV blocks."""

    def row_label(tag: tuple[str, int]) -> str:
        kind, index = tag
        return f"T{index + 1}" if kind == "tree" else f"I{index + 1}"

    d = pd.DataFrame(
        cert.d,
        index=[row_label(tag) for tag in cert.row_tags],
        columns=[network.label(c) for c in cert.column_vars],
    )
    dhat = pd.DataFrame(
        cert.dhat,
        index=[row_label(cert.row_tags[i]) for i in cert.dhat_rows],
        columns=[network.label(c) for c in cert.dhat_columns],
    )
    buf = io.StringIO()
    buf.write("# D\n")
    d.to_csv(buf, index_label="row")
    buf.write("# D-hat\n")
    dhat.to_csv(buf, index_label="row")
    return buf.getvalue()
