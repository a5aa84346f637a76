"""Seeded random instances with interdependent arc pairs.

Networks follow the usual generator recipe: a connected skeleton routed at
maximum cost so that every instance has a fallback route, random extra arcs with
uniform costs and capacities, and a fixed share of source and sink nodes.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .approx import solve_bidm, solve_fixed
from .conf import solver_setting
from .exceptions import ConfigurationError, GenerationError
from .instance import ArcRecord, Instance, InstanceKind, Interdependence, NodeRecord, structured_transform, validate

log = logging.getLogger(__name__)

SKELETON_LABEL = "hamiltonian-cycle stand-in"
_SEED_MASK = 0xFFFFFFFFFFFFFFFF


class InterdepMode(str, Enum):
    STRUCTURED = "structured"
    UNSTRUCTURED = "unstructured"


@dataclass(frozen=True)
class GenSpec:
    """Generation parameters.

    ``interdep_frac`` is a share of sink nodes in structured mode and a share of
    arcs in unstructured mode.
    """

    nodes: int
    arcs_per_node: int = 4
    source_frac: float = 0.20
    sink_frac: float = 0.20
    cost_range: tuple[int, int] = (1, 100)
    cap_range: tuple[int, int] = (100, 500)
    supply_per_256: float = 10000.0
    interdep_mode: InterdepMode = InterdepMode.UNSTRUCTURED
    interdep_frac: float = 0.02
    seed: int = 0
    ensure_feasible: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "interdep_mode", InterdepMode(self.interdep_mode))
        object.__setattr__(self, "cost_range", tuple(self.cost_range))
        object.__setattr__(self, "cap_range", tuple(self.cap_range))
        if self.nodes < 2:
            raise ConfigurationError("need at least 2 nodes")
        if self.arcs_per_node < 1:
            raise ConfigurationError("arcs_per_node must be positive")
        for name in ("source_frac", "sink_frac", "interdep_frac"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {value!r}")
        for name in ("cost_range", "cap_range"):
            low, high = getattr(self, name)
            if low > high:
                raise ConfigurationError(f"{name} is empty: {low} > {high}")
        if self.cap_range[0] <= 0:
            raise ConfigurationError("capacities must be positive")
        if self.sources + self.sinks > self.nodes:
            raise ConfigurationError("sources and sinks overlap at this size")
        if self.supply_per_256 <= 0 or self.total_supply < max(self.sources, self.sinks):
            raise ConfigurationError("total supply too small to give every source and sink a unit")

    @property
    def arcs(self) -> int:
        return self.nodes * self.arcs_per_node

    @property
    def sources(self) -> int:
        return share(self.source_frac, self.nodes)

    @property
    def sinks(self) -> int:
        return share(self.sink_frac, self.nodes)

    @property
    def total_supply(self) -> int:
        return int(math.floor(self.supply_per_256 * self.nodes / 256 + 0.5))

    def as_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["interdep_mode"] = self.interdep_mode.value
        out["cost_range"] = list(self.cost_range)
        out["cap_range"] = list(self.cap_range)
        return out


@dataclass
class GeneratedInstance:
    instance: Instance
    provenance: dict[str, Any] = field(default_factory=dict)


def share(frac: float, total: int) -> int:
    """Nearest integer to ``frac * total``, at least 1."""
    return max(1, int(math.floor(frac * total + 0.5)))


def _split(total: int, parts: int, rng: np.random.Generator) -> list[int]:
    return (rng.multinomial(total - parts, np.full(parts, 1.0 / parts)) + 1).tolist()


@dataclass
class _Network:
    instance: Instance
    sources: list[int]
    sinks: list[int]
    skeleton: list[int]


def _network(spec: GenSpec, rng: np.random.Generator) -> _Network:
    m = spec.nodes
    order = (rng.permutation(m) + 1).tolist()
    sources = sorted(order[: spec.sources])
    sinks = sorted(order[spec.sources : spec.sources + spec.sinks])
    supply = dict.fromkeys(range(1, m + 1), 0)
    total = spec.total_supply
    for node, amount in zip(sources, _split(total, len(sources), rng)):
        supply[node] = amount
    for node, amount in zip(sinks, _split(total, len(sinks), rng)):
        supply[node] = -amount

    cost_lo, cost_hi = spec.cost_range
    cap_lo, cap_hi = spec.cap_range
    arcs: list[ArcRecord] = []
    cycle = (rng.permutation(m) + 1).tolist()
    skeleton_cap = max(cap_hi, total)
    for pos, tail in enumerate(cycle):
        head = cycle[(pos + 1) % m]
        arcs.append(ArcRecord(len(arcs) + 1, tail, head, skeleton_cap, cost_hi))
    skeleton = [arc.id for arc in arcs]

    extra = max(spec.arcs - len(arcs), 0)
    tails = rng.integers(1, m + 1, size=extra)
    heads = rng.integers(1, m, size=extra)
    heads = np.where(heads >= tails, heads + 1, heads)
    costs = rng.integers(cost_lo, cost_hi + 1, size=extra)
    caps = rng.integers(cap_lo, cap_hi + 1, size=extra)
    for tail, head, cap, cost in zip(tails.tolist(), heads.tolist(), caps.tolist(), costs.tolist()):
        arcs.append(ArcRecord(len(arcs) + 1, tail, head, cap, cost))

    nodes = tuple(NodeRecord(node_id, supply[node_id]) for node_id in range(1, m + 1))
    return _Network(Instance(nodes, tuple(arcs), (), InstanceKind.BIDM), sources, sinks, skeleton)


def _pair(instance: Instance, parent: int, child: int) -> Interdependence:
    alpha = instance.arc(child).capacity / instance.arc(parent).capacity
    return Interdependence(parent, child, alpha, 0.0)


def _interdependencies(
    spec: GenSpec, net: _Network, rng: np.random.Generator
) -> tuple[Instance, dict[str, Any]]:
    base = net.instance
    if spec.interdep_mode is InterdepMode.UNSTRUCTURED:
        count = share(spec.interdep_frac, base.n)
        if 2 * count > base.n:
            raise GenerationError(f"{count} disjoint arc pairs do not fit in {base.n} arcs")
        picked = rng.choice(base.n, size=2 * count, replace=False).tolist()
        ids = [base.arcs[pos].id for pos in picked]
        pairs = [_pair(base, ids[k], ids[count + k]) for k in range(count)]
        return Instance(base.nodes, base.arcs, tuple(pairs), InstanceKind.BIDM), {}

    count = share(spec.interdep_frac, len(net.sinks))
    chosen = sorted(rng.choice(net.sinks, size=count, replace=False).tolist())
    transformed, mapping = structured_transform(base, chosen)
    children = rng.choice(base.n, size=count, replace=False).tolist()
    pairs = [
        _pair(transformed, mapping[node], base.arcs[pos].id) for node, pos in zip(chosen, children)
    ]
    instance = Instance(transformed.nodes, transformed.arcs, tuple(pairs), InstanceKind.BIDM)
    return instance, {"parent_nodes": chosen}


def bidm_feasible(instance: Instance) -> bool:
    """Every child switched off first; the exact search only when that fails."""
    if solve_fixed(instance, dict.fromkeys(range(instance.p), 0)).optimal:
        return True
    result, _ = solve_bidm(instance)
    return result.optimal


def generate(spec: GenSpec) -> GeneratedInstance:
    started = time.perf_counter()
    rng = np.random.default_rng(int(spec.seed) & _SEED_MASK)
    interdep_limit = int(solver_setting("INTERDEP_RESAMPLES"))
    network_limit = int(solver_setting("NETWORK_RESAMPLES"))

    for network_round in range(network_limit + 1):
        net = _network(spec, rng)
        for interdep_round in range(interdep_limit):
            instance, extra = _interdependencies(spec, net, rng)
            problems = validate(instance)
            if problems:
                raise GenerationError(f"generated an invalid instance: {problems[0]}")
            if spec.ensure_feasible and not bidm_feasible(instance):
                continue
            provenance = {
                "spec": spec.as_dict(),
                "seed": spec.seed,
                "skeleton": SKELETON_LABEL,
                "skeleton_arcs": net.skeleton,
                "sources": net.sources,
                "sinks": net.sinks,
                "network_resamples": network_round,
                "interdep_resamples": interdep_round,
                "feasibility_checked": spec.ensure_feasible,
                **extra,
            }
            log.debug(
                "generated m=%d n=%d p=%d after %d/%d resamples",
                instance.m,
                instance.n,
                instance.p,
                network_round,
                interdep_round,
                extra={"duration_ms": (time.perf_counter() - started) * 1000, "seed": spec.seed},
            )
            return GeneratedInstance(instance, provenance)
        log.info("seed %s: no feasible interdependencies on network %d, resampling", spec.seed, network_round)
    raise GenerationError(
        f"no BIDM-feasible instance after {network_limit + 1} networks x {interdep_limit} interdependence draws"
    )
