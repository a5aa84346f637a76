"""Independent reference solvers.

Nothing here touches the network simplex: the dense LP is a textbook
bounded-variable simplex on the full block system, solved with
``numpy.linalg`` and Bland's rule throughout.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .conf import solver_setting, tolerance
from .exceptions import ConfigurationError, InstanceError, IterationLimitError
from .instance import Instance, InstanceKind, relaxation
from .simplex import SolveResult, SolveStatus

log = logging.getLogger(__name__)


@dataclass
class DenseLP:
    """``min cost.x`` s.t. ``a x = rhs``, ``0 <= x <= upper``; first ``n_arcs`` columns are flows."""

    a: np.ndarray
    rhs: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    n_arcs: int
    constant: float = 0.0


def _incidence(instance: Instance) -> np.ndarray:
    a = np.zeros((instance.m, instance.n))
    index = instance.node_index
    for e, arc in enumerate(instance.arcs):
        a[index[arc.tail], e] = 1.0
        a[index[arc.head], e] = -1.0
    return a


def assemble(instance: Instance) -> DenseLP:
    """Block system ``[[A_hat, 0], [Q_hat, I]] (x; s) = (b; beta)``."""
    if instance.kind is InstanceKind.BIDM:
        instance = relaxation(instance)
    m, n, p = instance.m, instance.n, instance.p
    a = np.zeros((m + p, n + p))
    a[:m, :n] = _incidence(instance)
    for t, rec in enumerate(instance.interdeps):
        a[m + t, instance.arc_index[rec.parent]] = -rec.alpha
        a[m + t, instance.arc_index[rec.child]] = 1.0
        a[m + t, n + t] = 1.0
    rhs = np.concatenate(
        [[node.supply for node in instance.nodes], [rec.beta for rec in instance.interdeps]]
    ).astype(float)
    upper = np.concatenate([[arc.capacity for arc in instance.arcs], np.full(p, math.inf)]).astype(float)
    cost = np.concatenate([[arc.cost for arc in instance.arcs], np.zeros(p)]).astype(float)
    return DenseLP(a, rhs, upper, cost, n)


def dense_rank(matrix: np.ndarray) -> int:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return 0
    return int(np.linalg.matrix_rank(matrix))


class _BoundedSimplex:
    def __init__(self, a: np.ndarray, rhs: np.ndarray, upper: np.ndarray, limit: int):
        self.tol = tolerance()
        rows, cols = a.shape
        sign = np.where(rhs < 0, -1.0, 1.0)
        self.cols = cols
        self.a = np.hstack([a * sign[:, None], np.eye(rows)])
        self.rhs = rhs * sign
        self.upper = np.concatenate([upper, np.full(rows, math.inf)])
        self.x = np.concatenate([np.zeros(cols), self.rhs])
        self.at_upper = np.zeros(cols + rows, dtype=bool)
        self.basis = list(range(cols, cols + rows))
        self.limit = limit
        self.iterations = 0

    def _refresh(self) -> None:
        nonbasic = np.ones(len(self.x), dtype=bool)
        nonbasic[self.basis] = False
        self.x[nonbasic] = np.where(self.at_upper[nonbasic], self.upper[nonbasic], 0.0)
        residual = self.rhs - self.a[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = np.linalg.solve(self.a[:, self.basis], residual)

    def run(self, cost: np.ndarray, phase: int) -> SolveStatus:
        tol = self.tol
        while True:
            self._refresh()
            basic_matrix = self.a[:, self.basis]
            duals = np.linalg.solve(basic_matrix.T, cost[self.basis])
            reduced = cost - duals @ self.a
            in_basis = set(self.basis)
            entering = None
            for j in range(len(self.x)):
                if j in in_basis or self.upper[j] <= tol:
                    continue
                if (not self.at_upper[j] and reduced[j] < -tol) or (self.at_upper[j] and reduced[j] > tol):
                    entering = j
                    break
            if entering is None:
                return SolveStatus.OPTIMAL
            if self.iterations >= self.limit:
                raise IterationLimitError(self.limit, phase)
            self.iterations += 1

            direction = -1.0 if self.at_upper[entering] else 1.0
            change = -direction * np.linalg.solve(basic_matrix, self.a[:, entering])
            best: tuple[float, int, int] | None = None  # (ratio, variable, basis row or -1)
            if math.isfinite(self.upper[entering]):
                best = (self.upper[entering], entering, -1)
            for row, var in enumerate(self.basis):
                if change[row] < -tol:
                    ratio = max(self.x[var], 0.0) / -change[row]
                elif change[row] > tol and math.isfinite(self.upper[var]):
                    ratio = max(self.upper[var] - self.x[var], 0.0) / change[row]
                else:
                    continue
                if best is None or ratio < best[0] - tol or (abs(ratio - best[0]) <= tol and var < best[1]):
                    best = (ratio, var, row)
            if best is None:
                return SolveStatus.UNBOUNDED
            ratio, leaving, row = best
            if row < 0:
                self.at_upper[entering] = not self.at_upper[entering]
                continue
            self.at_upper[leaving] = change[row] > 0
            self.basis[row] = entering
            self.at_upper[entering] = False


def solve_dense(lp: DenseLP, iteration_limit: int | None = None) -> SolveResult:
    started = time.perf_counter()
    rows, cols = lp.a.shape
    limit = iteration_limit or max(1000, 50 * (rows + cols))
    engine = _BoundedSimplex(lp.a, lp.rhs, lp.upper, limit)
    tol = tolerance()

    phase_one = np.concatenate([np.zeros(cols), np.ones(rows)])
    engine.run(phase_one, phase=1)
    engine._refresh()
    phase1 = engine.iterations
    leftover = float(engine.x[cols:].sum())

    def result(status: SolveStatus, objective: float) -> SolveResult:
        return SolveResult(
            status=status,
            flows=engine.x[: lp.n_arcs].copy(),
            slacks=engine.x[lp.n_arcs : cols].copy(),
            objective=objective,
            iterations=engine.iterations,
            phase1_iterations=phase1,
            elapsed=time.perf_counter() - started,
        )

    if leftover > tol * max(1.0, float(np.abs(lp.rhs).sum())):
        return result(SolveStatus.INFEASIBLE, math.nan)
    engine.upper[cols:] = 0.0
    phase_two = np.concatenate([lp.cost, np.zeros(rows)])
    status = engine.run(phase_two, phase=2)
    if status is SolveStatus.UNBOUNDED:
        return result(status, -math.inf)
    engine._refresh()
    return result(status, float(lp.cost @ engine.x[:cols]) + lp.constant)


def fixed_lp(instance: Instance, y: tuple[int, ...]) -> tuple[DenseLP, list[int]]:
    """Network-only LP with every interdependence fixed by ``y``; returns the kept arc positions."""
    incidence = _incidence(instance)
    rhs = np.array([node.supply for node in instance.nodes], dtype=float)
    removed: set[int] = set()
    constant = 0.0
    for bit, rec in zip(y, instance.interdeps):
        parent = instance.arc_index[rec.parent]
        child = instance.arc_index[rec.child]
        if bit:
            cap = instance.arcs[parent].capacity
            rhs -= cap * incidence[:, parent]
            constant += cap * instance.arcs[parent].cost
            removed.add(parent)
        else:
            removed.add(child)
    keep = [e for e in range(instance.n) if e not in removed]
    lp = DenseLP(
        a=incidence[:, keep],
        rhs=rhs,
        upper=np.array([instance.arcs[e].capacity for e in keep], dtype=float),
        cost=np.array([instance.arcs[e].cost for e in keep], dtype=float),
        n_arcs=len(keep),
        constant=constant,
    )
    return lp, keep


def brute_force_bidm(instance: Instance) -> tuple[SolveResult, tuple[int, ...] | None]:
    if instance.kind is not InstanceKind.BIDM:
        raise InstanceError("brute force needs a BIDM instance", entity="instance")
    limit = int(solver_setting("BRUTE_FORCE_MAX_P"))
    if instance.p > limit:
        raise ConfigurationError(f"2^{instance.p} assignments exceed the brute-force limit of 2^{limit}")
    tol = tolerance()
    best: SolveResult | None = None
    best_y: tuple[int, ...] | None = None
    best_keep: list[int] = []
    explored = 0
    unbounded = False
    for y in itertools.product((0, 1), repeat=instance.p):
        lp, keep = fixed_lp(instance, y)
        outcome = solve_dense(lp)
        explored += outcome.iterations
        unbounded = unbounded or outcome.status is SolveStatus.UNBOUNDED
        if outcome.status is not SolveStatus.OPTIMAL:
            continue
        if best is None or outcome.objective < best.objective - tol:
            best, best_y, best_keep = outcome, y, keep
    log.debug("brute force over %d assignments, %d dense pivots", 2**instance.p, explored)
    if unbounded:
        # one unbounded assignment makes the whole binary problem unbounded
        return (
            SolveResult(SolveStatus.UNBOUNDED, np.zeros(instance.n), np.zeros(0), -math.inf, explored, 0),
            None,
        )
    if best is None:
        return (
            SolveResult(SolveStatus.INFEASIBLE, np.zeros(instance.n), np.zeros(0), math.nan, explored, 0),
            None,
        )
    flows = np.zeros(instance.n)
    flows[best_keep] = best.flows
    for bit, rec in zip(best_y, instance.interdeps):
        if bit:
            flows[instance.arc_index[rec.parent]] = instance.arc(rec.parent).capacity
    best.flows = flows
    best.slacks = np.zeros(0)
    return best, best_y
