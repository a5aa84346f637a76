"""Generalized network simplex for min-cost flow with linear interdependencies.

Every basis is a good forest: basic independent arcs form a spanning forest and
the small matrix D (see :mod:`mcnfli.basis`) ties the trees together through
the basic interdependent variables. Potentials are guessed tree by tree and
then corrected by solving ``D^T sigma = c_pi``; basic values come from
``D x = b`` followed by leaf-to-root sweeps inside each tree.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

from .basis import (
    BasisState,
    CertMatrix,
    FlowNetwork,
    VariableRef,
    VarStatus,
    build_cert,
    gauss_solve,
    is_good,
)
from .conf import solver_setting, tolerance
from .exceptions import BasisError, IterationLimitError, SingularMatrixError
from .instance import Instance, InstanceKind, relaxation

log = logging.getLogger(__name__)


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class PricingRule(str, Enum):
    DANTZIG = "dantzig"
    BLAND = "bland"


class PivotCase(str, Enum):
    CASE1 = "case1"
    CASE2 = "case2"


@dataclass
class PotentialState:
    node_pot: np.ndarray
    interdep_pot: np.ndarray
    correction: np.ndarray
    guess: np.ndarray


@dataclass
class PivotPlan:
    entering: int
    direction: int
    delta: dict[int, float]
    theta_star: float
    blocking: int | None
    blocking_status: VarStatus | None
    case: PivotCase

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.theta_star)


@dataclass
class SolveResult:
    status: SolveStatus
    flows: np.ndarray
    slacks: np.ndarray
    objective: float
    iterations: int
    phase1_iterations: int
    elapsed: float = 0.0
    basis: BasisState | None = field(default=None, repr=False, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass
class IterationRecord:
    iteration: int
    phase: int
    entering: str | None
    leaving: str | None
    theta: float | None
    objective: float
    case: str | None = None
    detail: dict[str, Any] | None = None

    def as_dict(self) -> dict[str, Any]:
        out = {
            "iteration": self.iteration,
            "phase": self.phase,
            "entering": self.entering,
            "leaving": self.leaving,
            "theta": self.theta,
            "objective": self.objective,
            "case": self.case,
        }
        if self.detail is not None:
            out.update(self.detail)
        return out


# ---------------------------------------------------------------------------
# Potentials and pricing
# ---------------------------------------------------------------------------


def _costs(network: FlowNetwork, costs: np.ndarray | None) -> np.ndarray:
    return network.cost if costs is None else costs


def _guess_potentials(basis: BasisState, costs: np.ndarray, previous: PotentialState | None) -> np.ndarray:
    net = basis.network
    forest = basis.forest
    tails = net.tails
    cost = costs.tolist()
    pot = [0.0] * net.m if previous is None else previous.node_pot.tolist()
    tol = tolerance()
    for tree in forest.trees:
        if previous is not None:
            # trees untouched by the last pivot still satisfy c - (pi_i - pi_j) = 0
            stale = False
            for node in tree[1:]:
                a = forest.parent_arc[node]
                i, j = (node, forest.parent[node]) if tails[a] == node else (forest.parent[node], node)
                if abs(cost[a] - (pot[i] - pot[j])) > tol:
                    stale = True
                    break
            if not stale:
                continue
        else:
            pot[tree[0]] = 0.0
        for node in tree[1:]:
            a = forest.parent_arc[node]
            up = forest.parent[node]
            pot[node] = pot[up] + cost[a] if tails[a] == node else pot[up] - cost[a]
    return np.array(pot)


def compute_potentials(
    basis: BasisState,
    previous: PotentialState | None = None,
    *,
    costs: np.ndarray | None = None,
    use_dhat: bool = False,
    cert: CertMatrix | None = None,
) -> PotentialState:
    net = basis.network
    costs = _costs(net, costs)
    cert = build_cert(basis) if cert is None else cert
    guess = _guess_potentials(basis, costs, previous)
    trees = basis.forest.count

    c_pi = np.array(
        [
            costs[col] - guess[net.tails[col]] + guess[net.heads[col]] if col < net.n else 0.0
            for col in cert.column_vars
        ]
    )
    sigma = np.zeros(cert.r)
    try:
        if use_dhat:
            if cert.dhat.size:
                sigma[cert.dhat_rows] = gauss_solve(cert.dhat.T, c_pi[cert.dhat_col_pos])
        elif cert.r:
            sigma = gauss_solve(cert.d.T, c_pi)
    except SingularMatrixError as exc:
        raise BasisError(f"certificate matrix is singular at a supposedly good basis: {exc}") from exc

    offsets = np.append(sigma[: trees - 1], 0.0)
    node_pot = guess + offsets[basis.forest.tree_array]
    return PotentialState(
        node_pot=node_pot,
        interdep_pot=sigma[trees - 1 :].copy(),
        correction=sigma,
        guess=guess,
    )


def reduced_costs(network: FlowNetwork, potentials: PotentialState, costs: np.ndarray | None = None) -> np.ndarray:
    costs = _costs(network, costs)
    row_pot = np.append(potentials.interdep_pot, 0.0)
    arcs = (
        costs
        - potentials.node_pot[network.tail]
        + potentials.node_pot[network.head]
        - network.arc_coef * row_pot[network.arc_row]
    )
    return np.concatenate([arcs, -potentials.interdep_pot])


def reduced_cost(
    var: VariableRef | int,
    potentials: PotentialState,
    network: FlowNetwork,
    costs: np.ndarray | None = None,
) -> float:
    col = network.column(var)
    if col >= network.n:
        return float(-potentials.interdep_pot[col - network.n])
    costs = _costs(network, costs)
    value = costs[col] - potentials.node_pot[network.tails[col]] + potentials.node_pot[network.heads[col]]
    row = network.arc_row[col]
    if row >= 0:
        value -= network.arc_coef[col] * potentials.interdep_pot[row]
    return float(value)


def price(
    basis: BasisState,
    potentials: PotentialState,
    rule: PricingRule | str = PricingRule.DANTZIG,
    *,
    costs: np.ndarray | None = None,
) -> VariableRef | None:
    col = _price_column(basis, potentials, PricingRule(rule), costs)
    return None if col is None else basis.network.ref(col)


def _price_column(
    basis: BasisState, potentials: PotentialState, rule: PricingRule, costs: np.ndarray | None
) -> int | None:
    net = basis.network
    tol = tolerance()
    rc = reduced_costs(net, potentials, costs)
    movable = net.upper_bounds > tol
    violation = np.where(
        (basis.status == VarStatus.LOWER) & movable,
        -rc,
        np.where((basis.status == VarStatus.UPPER) & movable, rc, 0.0),
    )
    candidates = violation > tol
    if not candidates.any():
        return None
    if rule is PricingRule.BLAND:
        return int(np.flatnonzero(candidates)[0])
    return int(np.argmax(np.where(candidates, violation, -np.inf)))


# ---------------------------------------------------------------------------
# Basic values
# ---------------------------------------------------------------------------


def bound_rhs(basis: BasisState) -> tuple[np.ndarray, np.ndarray]:
    """Node and interdependence right-hand sides with nonbasic-at-upper variables moved over."""
    net = basis.network
    at_upper = np.flatnonzero(basis.status[: net.n] == VarStatus.UPPER)
    node_rhs = net.supply.astype(float).copy()
    amounts = net.capacity[at_upper]
    np.subtract.at(node_rhs, net.tail[at_upper], amounts)
    np.add.at(node_rhs, net.head[at_upper], amounts)
    row_rhs = net.beta.astype(float).copy()
    rows = net.arc_row[at_upper]
    linked = rows >= 0
    np.subtract.at(row_rhs, rows[linked], net.arc_coef[at_upper][linked] * amounts[linked])
    return node_rhs, row_rhs


def net_requirements(basis: BasisState) -> tuple[np.ndarray, np.ndarray]:
    """b(T_h) for every tree and b(t) for every interdependence."""
    node_rhs, row_rhs = bound_rhs(basis)
    tree_req = np.bincount(basis.forest.tree_array, weights=node_rhs, minlength=basis.forest.count)
    return tree_req, row_rhs


def _solve_basic(
    basis: BasisState,
    cert: CertMatrix,
    node_rhs: np.ndarray,
    row_rhs: np.ndarray,
    use_dhat: bool,
) -> np.ndarray:
    net = basis.network
    forest = basis.forest
    trees = forest.count
    tree_req = np.bincount(forest.tree_array, weights=node_rhs, minlength=trees)
    rhs = np.concatenate([tree_req[: trees - 1], row_rhs])
    out = np.zeros(net.ncols)

    try:
        if use_dhat:
            if cert.dhat.size:
                out[cert.dhat_columns] = gauss_solve(cert.dhat, rhs[cert.dhat_rows])
            for col in cert.column_vars:
                if col >= net.n:
                    t = col - net.n
                    value = row_rhs[t]
                    for arc in (net.parent[t], net.child[t]):
                        if basis.status[arc] == VarStatus.BASIC:
                            value -= net.arc_coef[arc] * out[arc]
                    out[col] = value
        elif cert.r:
            out[cert.column_vars] = gauss_solve(cert.d, rhs)
    except SingularMatrixError as exc:
        raise BasisError(f"certificate matrix is singular at a supposedly good basis: {exc}") from exc

    residual = node_rhs.tolist()
    for col in cert.column_vars:
        if col < net.n:
            value = out[col]
            residual[net.tails[col]] -= value
            residual[net.heads[col]] += value
    tails = net.tails
    for tree in forest.trees:
        for node in reversed(tree[1:]):
            a = forest.parent_arc[node]
            value = residual[node]
            out[a] = value if tails[a] == node else -value
            residual[forest.parent[node]] += value
    return out


def column_values(basis: BasisState, cert: CertMatrix | None = None, use_dhat: bool = False) -> np.ndarray:
    """Value of every column: basics solved, nonbasics at their bound."""
    cert = build_cert(basis) if cert is None else cert
    node_rhs, row_rhs = bound_rhs(basis)
    values = _solve_basic(basis, cert, node_rhs, row_rhs, use_dhat)
    at_upper = np.flatnonzero(basis.status == VarStatus.UPPER)
    values[at_upper] = basis.network.upper_bounds[at_upper]
    return values


def basic_values(
    basis: BasisState, cert: CertMatrix | None = None, use_dhat: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    values = column_values(basis, cert, use_dhat)
    net = basis.network
    return values[: net.n], values[net.n :]


# ---------------------------------------------------------------------------
# Change of basis
# ---------------------------------------------------------------------------


def pivot_plan(
    entering: VariableRef | int,
    basis: BasisState,
    values: np.ndarray,
    *,
    use_dhat: bool = False,
    cert: CertMatrix | None = None,
) -> PivotPlan:
    net = basis.network
    tol = tolerance()
    cert = build_cert(basis) if cert is None else cert
    col = net.column(entering)
    if basis.status[col] == VarStatus.BASIC:
        raise BasisError(f"{net.label(col)} is already basic")
    direction = 1 if basis.status[col] == VarStatus.LOWER else -1

    # move the entering column to the right-hand side with a unit increase
    node_rhs = np.zeros(net.m)
    row_rhs = np.zeros(net.p)
    if col < net.n:
        node_rhs[net.tails[col]] = -1.0
        node_rhs[net.heads[col]] = 1.0
        if net.arc_row[col] >= 0:
            row_rhs[net.arc_row[col]] = -net.arc_coef[col]
    else:
        row_rhs[col - net.n] = -1.0
    change = _solve_basic(basis, cert, node_rhs, row_rhs, use_dhat) * direction

    delta = {c: float(change[c]) for c in basis.basic if abs(change[c]) > tol}
    delta[col] = float(direction)

    tree_of = basis.forest.tree_of
    moves_between_trees = any(
        c < net.n and tree_of[net.tails[c]] != tree_of[net.heads[c]] for c in delta
    )
    case = PivotCase.CASE2 if moves_between_trees else PivotCase.CASE1

    upper = net.upper_bounds
    candidates: list[tuple[float, int, VarStatus]] = []
    if math.isfinite(upper[col]):
        candidates.append((upper[col], col, VarStatus.UPPER if direction > 0 else VarStatus.LOWER))
    for c, dc in delta.items():
        if c == col:
            continue
        if dc < 0:
            candidates.append((max(values[c], 0.0) / -dc, c, VarStatus.LOWER))
        elif math.isfinite(upper[c]):
            candidates.append((max(upper[c] - values[c], 0.0) / dc, c, VarStatus.UPPER))

    if not candidates:
        return PivotPlan(col, direction, delta, math.inf, None, None, case)
    theta = min(limit for limit, _, _ in candidates)
    ties = [(c, s) for limit, c, s in candidates if limit <= theta + tol]
    blocking, reached = min(ties, key=lambda item: item[0])
    return PivotPlan(col, direction, delta, theta, blocking, reached, case)


def apply_pivot(basis: BasisState, plan: PivotPlan) -> int | None:
    """Update B/L/U and the forest; returns the leaving column (None for a bound flip)."""
    if plan.blocking is None:
        raise BasisError("cannot apply an unbounded pivot")
    if plan.blocking == plan.entering:
        basis.status[plan.entering] = plan.blocking_status
        return None
    basis.exchange(plan.entering, plan.blocking, plan.blocking_status)
    return plan.blocking


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def initial_basis(source: Instance | FlowNetwork) -> BasisState:
    """Artificial star rooted at the first node, every slack basic."""
    net = source if isinstance(source, FlowNetwork) else FlowNetwork.from_instance(source)
    net = net.with_artificial_star(root=0)
    status = np.full(net.ncols, VarStatus.LOWER, dtype=np.int8)
    basic = list(range(net.n_original, net.n)) + [net.n + t for t in range(net.p)]
    status[basic] = VarStatus.BASIC
    return BasisState(net, status, basic)


TraceHook = Callable[[IterationRecord], None]


class NetworkSimplex:
    def __init__(
        self,
        instance: Instance,
        rule: PricingRule | str | None = None,
        use_dhat: bool | None = None,
        *,
        trace: TraceHook | None = None,
        trace_detail: bool = False,
        check_invariants: bool = False,
        iteration_limit: int | None = None,
    ):
        if instance.kind is InstanceKind.BIDM:
            instance = relaxation(instance)
        self.instance = instance
        self.network = FlowNetwork.from_instance(instance)
        self.rule = PricingRule(rule or solver_setting("DEFAULT_RULE"))
        self.use_dhat = bool(solver_setting("USE_DHAT") if use_dhat is None else use_dhat)
        self.tol = tolerance()
        self.degenerate_limit = int(solver_setting("DEGENERATE_PIVOT_LIMIT"))
        factor = int(solver_setting("ITERATION_FACTOR"))
        self.iteration_limit = iteration_limit or factor * (instance.m + instance.p) * max(instance.n, 1)
        self.trace = trace
        self.trace_detail = trace_detail
        self.check_invariants = check_invariants
        self.iterations = 0

    def run(self, start: BasisState | None = None) -> SolveResult:
        started = time.perf_counter()
        net = self.network
        phase1 = 0
        if start is None:
            basis = initial_basis(net)
            art = basis.network
            costs = np.zeros(art.n)
            costs[art.n_original :] = 1.0
            _, values = self._optimize(basis, costs, phase=1)
            phase1 = self.iterations
            infeasibility = float(values[art.n_original : art.n].sum())
            scale = max(1.0, float(np.abs(net.supply).sum()))
            if infeasibility > self.tol * scale:
                log.info("phase 1 left %.6g units on artificial arcs: infeasible", infeasibility)
                return self._result(SolveStatus.INFEASIBLE, basis, values, math.nan, phase1, started)
            capacity = art.capacity.copy()
            capacity[art.n_original :] = 0.0
            basis.network = art.with_capacity(capacity)
        else:
            basis = start
            if basis.network.n_original != net.n_original or basis.network.p != net.p:
                raise BasisError("start basis belongs to a different network")
        costs = basis.network.cost
        status, values = self._optimize(basis, costs, phase=2)
        objective = float(costs @ values[: basis.network.n]) if status is SolveStatus.OPTIMAL else -math.inf
        return self._result(status, basis, values, objective, phase1, started)

    def _result(
        self, status: SolveStatus, basis: BasisState, values: np.ndarray, objective: float, phase1: int, started: float
    ) -> SolveResult:
        net = basis.network
        elapsed = time.perf_counter() - started
        log.info(
            "%s after %d iterations (%d in phase 1) in %.2fms",
            status.value,
            self.iterations,
            phase1,
            elapsed * 1000,
            extra={
                "status": status.value,
                "iterations": self.iterations,
                "phase1_iterations": phase1,
                "duration_ms": elapsed * 1000,
                "m": net.m,
                "n": net.n_original,
                "p": net.p,
            },
        )
        return SolveResult(
            status=status,
            flows=values[: net.n_original].copy(),
            slacks=values[net.n :].copy(),
            objective=objective,
            iterations=self.iterations,
            phase1_iterations=phase1,
            elapsed=elapsed,
            basis=basis,
        )

    def _optimize(self, basis: BasisState, costs: np.ndarray, phase: int) -> tuple[SolveStatus, np.ndarray]:
        cert = build_cert(basis)
        values = column_values(basis, cert, self.use_dhat)
        potentials: PotentialState | None = None
        degenerate_run = 0
        rule = self.rule
        n = basis.network.n
        while True:
            potentials = compute_potentials(
                basis, potentials, costs=costs, use_dhat=self.use_dhat, cert=cert
            )
            entering = _price_column(basis, potentials, rule, costs)
            detail = self._detail(basis, cert, values, potentials) if self.trace_detail else None
            if entering is None:
                if self.trace is not None:
                    self.trace(
                        IterationRecord(self.iterations, phase, None, None, None, float(costs @ values[:n]), None, detail)
                    )
                return SolveStatus.OPTIMAL, values
            if self.iterations >= self.iteration_limit:
                raise IterationLimitError(self.iteration_limit, phase)
            plan = pivot_plan(entering, basis, values, use_dhat=self.use_dhat, cert=cert)
            if plan.unbounded:
                log.info("unbounded ray along %s", basis.network.label(entering))
                return SolveStatus.UNBOUNDED, values
            leaving = apply_pivot(basis, plan)
            self.iterations += 1
            if leaving is not None:
                cert = build_cert(basis)
            values = column_values(basis, cert, self.use_dhat)
            degenerate_run = degenerate_run + 1 if plan.theta_star <= self.tol else 0
            rule = PricingRule.BLAND if degenerate_run >= self.degenerate_limit else self.rule
            if self.trace is not None:
                label = basis.network.label
                self.trace(
                    IterationRecord(
                        iteration=self.iterations,
                        phase=phase,
                        entering=label(plan.entering),
                        leaving=label(plan.blocking) if plan.blocking is not None else None,
                        theta=plan.theta_star,
                        objective=float(costs @ values[:n]),
                        case=plan.case.value,
                        detail=detail,
                    )
                )
            if self.check_invariants:
                self._check(basis, cert, values)

    def _detail(
        self, basis: BasisState, cert: CertMatrix, values: np.ndarray, potentials: PotentialState
    ) -> dict[str, Any]:
        net = basis.network
        tree_req, row_req = net_requirements(basis)
        trees = basis.forest.count
        return {
            "basic_values": {net.label(c): float(values[c]) for c in sorted(basis.basic)},
            "trees": [[net.node_ids[i] for i in sorted(tree)] for tree in basis.forest.trees],
            "tree_requirements": tree_req[: trees - 1].tolist(),
            "interdep_requirements": row_req.tolist(),
            "potentials": potentials.node_pot.tolist() + potentials.interdep_pot.tolist(),
            "correction": potentials.correction.tolist(),
            "d_columns": [net.label(c) for c in cert.column_vars],
            "d": cert.d.tolist(),
        }

    def _check(self, basis: BasisState, cert: CertMatrix, values: np.ndarray) -> None:
        net = basis.network
        basis.validate()
        if not is_good(cert, cross_check=True):
            raise BasisError("basis lost its certificate after a pivot")
        scale = max(1.0, float(np.abs(net.supply).sum()), float(np.abs(values).max(initial=0.0)))
        slack = self.tol * scale
        upper = net.upper_bounds
        if (values < -slack).any() or (values > upper + slack).any():
            raise BasisError("a variable left its bounds")
        balance = net.supply.astype(float).copy()
        np.subtract.at(balance, net.tail, values[: net.n])
        np.add.at(balance, net.head, values[: net.n])
        if np.abs(balance).max(initial=0.0) > slack:
            raise BasisError("flow conservation violated")
        linking = values[net.n :] - net.beta
        linked = net.arc_row >= 0
        np.add.at(linking, net.arc_row[linked], net.arc_coef[linked] * values[: net.n][linked])
        if np.abs(linking).max(initial=0.0) > slack:
            raise BasisError("linking equality violated")


def solve(
    instance: Instance,
    rule: PricingRule | str | None = None,
    use_dhat: bool | None = None,
    *,
    start: BasisState | None = None,
    trace: TraceHook | None = None,
    trace_detail: bool = False,
    check_invariants: bool = False,
) -> SolveResult:
    solver = NetworkSimplex(
        instance,
        rule,
        use_dhat,
        trace=trace,
        trace_detail=trace_detail,
        check_invariants=check_invariants,
    )
    return solver.run(start)
