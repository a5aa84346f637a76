"""Exact BIDM solutions and randomized rounding from the linear relaxation."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping

import numpy as np

from .conf import solver_setting, tolerance
from .exceptions import ConfigurationError, InstanceError, NodeLimitError, RoundingError, ZeroReferenceError
from .instance import Instance, InstanceKind, NodeRecord, relaxation
from .simplex import SolveResult, SolveStatus, solve

log = logging.getLogger(__name__)


class RoundingFamily(str, Enum):
    CHILD = "child"
    PARENT = "parent"
    FAIR = "fair"


@dataclass(frozen=True)
class RoundingScheme:
    family: RoundingFamily
    epsilon: float = 0.0
    max_attempts: int = field(default_factory=lambda: int(solver_setting("MAX_ATTEMPTS")))
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", RoundingFamily(self.family))
        if not 0.0 <= self.epsilon <= 0.5:
            raise ConfigurationError(f"epsilon must lie in [0, 0.5], got {self.epsilon!r}")
        if self.max_attempts < 1:
            raise ConfigurationError("max_attempts must be positive")

    @property
    def label(self) -> str:
        if self.family is RoundingFamily.FAIR:
            return "fair"
        return f"{self.family.value}({self.epsilon:.2f})"

    def with_seed(self, seed: int) -> "RoundingScheme":
        return replace(self, seed=seed)


def standard_schemes(max_attempts: int | None = None) -> list[RoundingScheme]:
    """Child and Parent at epsilon 0, 0.01 and 0.05, then Fair."""
    attempts = max_attempts or int(solver_setting("MAX_ATTEMPTS"))
    schemes = [
        RoundingScheme(family, eps, attempts)
        for family in (RoundingFamily.CHILD, RoundingFamily.PARENT)
        for eps in (0.0, 0.01, 0.05)
    ]
    schemes.append(RoundingScheme(RoundingFamily.FAIR, 0.0, attempts))
    return schemes


class RoundingStatus(str, Enum):
    FEASIBLE = "feasible"
    FAILED = "failed"


@dataclass
class RoundingOutcome:
    scheme: str
    status: RoundingStatus
    attempts: int
    y: tuple[int, ...]
    objective: float | None
    relative_error: float | None = None
    probabilities: tuple[float, ...] = ()
    flows: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def feasible(self) -> bool:
        return self.status is RoundingStatus.FEASIBLE


@dataclass(order=True)
class BnBNode:
    bound: float
    seq: int
    fixed: dict[int, int] = field(compare=False)
    depth: int = field(compare=False, default=0)
    flows: np.ndarray | None = field(compare=False, default=None, repr=False)


@dataclass
class FixedProblem:
    """Subproblem with some interdependencies settled.

    ``instance`` keeps the original ids of the arcs it did not delete; unfixed
    interdependencies stay as their linear relaxation.
    """

    instance: Instance
    constant: float
    saturated: dict[int, float]
    deleted: frozenset[int]


def _require_bidm(instance: Instance) -> None:
    if instance.kind is not InstanceKind.BIDM:
        raise InstanceError("expected a BIDM instance", entity="instance")


def fix_binaries(instance: Instance, fixed: Mapping[int, int]) -> FixedProblem:
    _require_bidm(instance)
    relaxed = relaxation(instance)
    supply = {node.id: node.supply for node in instance.nodes}
    deleted: set[int] = set()
    saturated: dict[int, float] = {}
    constant = 0.0
    for t, bit in fixed.items():
        if not 0 <= t < instance.p:
            raise InstanceError("no such interdependence", entity=f"interdependence {t + 1}")
        rec = instance.interdeps[t]
        if bit:
            parent = instance.arc(rec.parent)
            supply[parent.tail] -= parent.capacity
            supply[parent.head] += parent.capacity
            constant += parent.cost * parent.capacity
            saturated[parent.id] = parent.capacity
            deleted.add(parent.id)
        else:
            deleted.add(rec.child)
    sub = Instance(
        nodes=tuple(NodeRecord(node.id, supply[node.id]) for node in instance.nodes),
        arcs=tuple(arc for arc in instance.arcs if arc.id not in deleted),
        interdeps=tuple(rec for t, rec in enumerate(relaxed.interdeps) if t not in fixed),
        kind=InstanceKind.LIDM,
    )
    return FixedProblem(sub, constant, saturated, frozenset(deleted))


def solve_fixed(instance: Instance, fixed: Mapping[int, int]) -> SolveResult:
    """Solve the partially fixed problem; flows come back in ``instance`` arc order."""
    problem = fix_binaries(instance, fixed)
    result = solve(problem.instance)
    flows = np.zeros(instance.n)
    index = instance.arc_index
    for arc, value in zip(problem.instance.arcs, result.flows):
        flows[index[arc.id]] = value
    for arc_id, value in problem.saturated.items():
        flows[index[arc_id]] = value
    objective = result.objective + problem.constant if result.optimal else result.objective
    return SolveResult(
        status=result.status,
        flows=flows,
        slacks=result.slacks,
        objective=objective,
        iterations=result.iterations,
        phase1_iterations=result.phase1_iterations,
        elapsed=result.elapsed,
    )


def check_bidm(instance: Instance, flows: np.ndarray, y: tuple[int, ...]) -> list[str]:
    """Constraint violations of ``(flows, y)`` against the BIDM model; empty when feasible."""
    _require_bidm(instance)
    tol = tolerance()
    flows = np.asarray(flows, dtype=float)
    scale = max(1.0, sum(abs(node.supply) for node in instance.nodes), float(np.abs(flows).max(initial=0.0)))
    slack = tol * scale
    problems: list[str] = []
    if len(y) != instance.p:
        return [f"expected {instance.p} binaries, got {len(y)}"]

    balance = {node.id: node.supply for node in instance.nodes}
    for arc, value in zip(instance.arcs, flows):
        if value < -slack or value > arc.capacity + slack:
            problems.append(f"arc {arc.id}: flow {value:g} outside [0, {arc.capacity:g}]")
        balance[arc.tail] -= value
        balance[arc.head] += value
    for node_id, residue in balance.items():
        if abs(residue) > slack:
            problems.append(f"node {node_id}: conservation off by {residue:g}")

    for t, (bit, rec) in enumerate(zip(y, instance.interdeps), start=1):
        parent = instance.arc(rec.parent)
        child = instance.arc(rec.child)
        x_parent = flows[instance.arc_index[parent.id]]
        x_child = flows[instance.arc_index[child.id]]
        if x_child > child.capacity * bit + slack:
            problems.append(f"interdependence {t}: child flow {x_child:g} with y={bit}")
        if bit and x_parent < parent.capacity - slack:
            problems.append(f"interdependence {t}: y=1 but parent carries {x_parent:g} < {parent.capacity:g}")
    return problems


def relative_error(approx_obj: float, reference_obj: float) -> float:
    if abs(reference_obj) <= tolerance():
        raise ZeroReferenceError(approx_obj, reference_obj)
    return abs(approx_obj - reference_obj) / abs(reference_obj)


# ---------------------------------------------------------------------------
# Randomized rounding
# ---------------------------------------------------------------------------


def probability(scheme: RoundingScheme, interdep: int, lp_flows: np.ndarray, instance: Instance) -> float:
    if scheme.family is RoundingFamily.FAIR:
        return 0.5
    rec = instance.interdeps[interdep]
    arc_id = rec.child if scheme.family is RoundingFamily.CHILD else rec.parent
    capacity = instance.arc(arc_id).capacity
    if not math.isfinite(capacity) or capacity <= 0:
        raise RoundingError(f"arc {arc_id} needs a finite positive capacity to define a saturation ratio")
    ratio = float(lp_flows[instance.arc_index[arc_id]]) / capacity
    eps = scheme.epsilon
    return max(min(ratio, 1.0 - eps), eps)


def draw_streams(seed: int, count: int) -> list[np.random.Generator]:
    """One Philox substream per interdependence, keyed by its position."""
    entropy = int(seed) & 0xFFFFFFFFFFFFFFFF
    return [
        np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy, spawn_key=(t,))))
        for t in range(count)
    ]


def randomized_round(
    instance: Instance,
    scheme: RoundingScheme,
    *,
    lp_result: SolveResult | None = None,
    reference: float | None = None,
) -> RoundingOutcome:
    _require_bidm(instance)
    started = time.perf_counter()
    if lp_result is None:
        lp_result = solve(relaxation(instance))
    if not lp_result.optimal:
        raise RoundingError(f"linear relaxation is {lp_result.status.value}; rounding is undefined")

    probs = tuple(probability(scheme, t, lp_result.flows, instance) for t in range(instance.p))
    streams = draw_streams(scheme.seed, instance.p)
    memo: dict[tuple[int, ...], SolveResult] = {}
    y: tuple[int, ...] = ()
    for attempt in range(1, scheme.max_attempts + 1):
        y = tuple(int(stream.random() < prob) for stream, prob in zip(streams, probs))
        if y not in memo:
            memo[y] = solve_fixed(instance, dict(enumerate(y)))
        fixed = memo[y]
        if fixed.optimal:
            error = relative_error(fixed.objective, reference) if reference is not None else None
            log.debug(
                "%s feasible after %d attempts (%d distinct y)",
                scheme.label,
                attempt,
                len(memo),
                extra={"scheme": scheme.label, "attempts": attempt, "duration_ms": (time.perf_counter() - started) * 1000},
            )
            return RoundingOutcome(
                scheme=scheme.label,
                status=RoundingStatus.FEASIBLE,
                attempts=attempt,
                y=y,
                objective=fixed.objective,
                relative_error=error,
                probabilities=probs,
                flows=fixed.flows,
            )
    log.info("%s failed after %d attempts", scheme.label, scheme.max_attempts)
    return RoundingOutcome(
        scheme=scheme.label,
        status=RoundingStatus.FAILED,
        attempts=scheme.max_attempts,
        y=y,
        objective=None,
        probabilities=probs,
    )


# ---------------------------------------------------------------------------
# Branch-and-bound
# ---------------------------------------------------------------------------


class BranchAndBound:
    """Best-first search over the binaries, bounded by partially fixed relaxations."""

    def __init__(self, instance: Instance, node_limit: int | None = None):
        _require_bidm(instance)
        self.instance = instance
        self.node_limit = node_limit or int(solver_setting("BNB_NODE_LIMIT"))
        self.tol = tolerance()
        self.explored = 0
        self.pruned = 0
        self.incumbent_updates = 0
        self.pivots = 0
        self.bounds: list[tuple[float, float]] = []

    def _evaluate(self, fixed: dict[int, int]) -> SolveResult:
        result = solve_fixed(self.instance, fixed)
        self.pivots += result.iterations
        return result

    def _violations(self, node: BnBNode) -> list[int]:
        inst, tol = self.instance, self.tol
        out = []
        for t, rec in enumerate(inst.interdeps):
            if t in node.fixed:
                continue
            x_child = node.flows[inst.arc_index[rec.child]]
            x_parent = node.flows[inst.arc_index[rec.parent]]
            if x_child > tol and x_parent < inst.arc(rec.parent).capacity - tol:
                out.append(t)
        return out

    def _saturation(self, t: int, node: BnBNode) -> float:
        rec = self.instance.interdeps[t]
        return node.flows[self.instance.arc_index[rec.parent]] / self.instance.arc(rec.parent).capacity

    def _completion(self, node: BnBNode) -> tuple[int, ...]:
        y = []
        for t, rec in enumerate(self.instance.interdeps):
            if t in node.fixed:
                y.append(node.fixed[t])
            else:
                y.append(int(self._saturation(t, node) >= 1.0 - self.tol))
        return tuple(y)

    def run(self) -> tuple[SolveResult, tuple[int, ...] | None]:
        started = time.perf_counter()
        inst, tol = self.instance, self.tol
        root = self._evaluate({})
        if not root.optimal:
            objective = -math.inf if root.status is SolveStatus.UNBOUNDED else math.nan
            return self._finish(root.status, None, None, objective, started)

        seq = 0
        heap = [BnBNode(root.objective, seq, {}, 0, root.flows)]
        incumbent = math.inf
        best_flows: np.ndarray | None = None
        best_y: tuple[int, ...] | None = None
        while heap:
            node = heapq.heappop(heap)
            if node.bound >= incumbent - tol:
                self.pruned += 1
                continue
            self.explored += 1
            if self.explored > self.node_limit:
                raise NodeLimitError(self.node_limit)
            violating = self._violations(node)
            if not violating:
                incumbent, best_flows, best_y = node.bound, node.flows, self._completion(node)
                self.incumbent_updates += 1
                continue
            t = min(violating, key=lambda k: (abs(self._saturation(k, node) - 0.5), k))
            for bit in (0, 1):
                fixed = {**node.fixed, t: bit}
                result = self._evaluate(fixed)
                if not result.optimal:
                    continue
                self.bounds.append((node.bound, result.objective))
                if result.objective >= incumbent - tol:
                    self.pruned += 1
                    continue
                seq += 1
                heapq.heappush(heap, BnBNode(result.objective, seq, fixed, node.depth + 1, result.flows))

        if best_y is None:
            return self._finish(SolveStatus.INFEASIBLE, None, None, math.nan, started)
        return self._finish(SolveStatus.OPTIMAL, best_flows, best_y, incumbent, started)

    def _finish(
        self,
        status: SolveStatus,
        flows: np.ndarray | None,
        y: tuple[int, ...] | None,
        objective: float,
        started: float,
    ) -> tuple[SolveResult, tuple[int, ...] | None]:
        elapsed = time.perf_counter() - started
        log.info(
            "branch-and-bound %s: %d nodes explored, %d pruned, %d incumbents",
            status.value,
            self.explored,
            self.pruned,
            self.incumbent_updates,
            extra={
                "status": status.value,
                "explored": self.explored,
                "pruned": self.pruned,
                "incumbent_updates": self.incumbent_updates,
                "duration_ms": elapsed * 1000,
            },
        )
        result = SolveResult(
            status=status,
            flows=flows if flows is not None else np.zeros(self.instance.n),
            slacks=np.zeros(0),
            objective=objective,
            iterations=self.pivots,
            phase1_iterations=0,
            elapsed=elapsed,
        )
        return result, y


def solve_bidm(instance: Instance, node_limit: int | None = None) -> tuple[SolveResult, tuple[int, ...] | None]:
    return BranchAndBound(instance, node_limit).run()
