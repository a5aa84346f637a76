"""Instance builders shared by the test modules."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from mcnfli.basis import BasisState
from mcnfli.instance import ArcRecord, Instance, InstanceKind, Interdependence, NodeRecord, read_instance
from mcnfli.serializers import StartBasisSerializer

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
WORKED_EXAMPLE = FIXTURES / "worked_example.dimacs"
WORKED_BASIS = FIXTURES / "worked_example_basis.json"


def build(
    supplies: Mapping[int, float] | int,
    arcs: Iterable[tuple[int, int, float, float]],
    interdeps: Iterable[tuple[int, int, float, float]] = (),
    kind: InstanceKind = InstanceKind.LIDM,
) -> Instance:
    """``arcs`` are (tail, head, capacity, cost) numbered from 1; ``supplies`` maps node -> supply or gives m."""
    if isinstance(supplies, int):
        supplies = dict.fromkeys(range(1, supplies + 1), 0.0)
    m = max(supplies)
    nodes = tuple(NodeRecord(i, float(supplies.get(i, 0.0))) for i in range(1, m + 1))
    arc_records = tuple(ArcRecord(k, t, h, float(u), float(c)) for k, (t, h, u, c) in enumerate(arcs, start=1))
    records = tuple(Interdependence(p, c, float(a), float(b)) for p, c, a, b in interdeps)
    return Instance(nodes, arc_records, records, kind)


def bidm(supplies, arcs, pairs: Iterable[tuple[int, int]]) -> Instance:
    """BIDM instance with the relaxation coefficients alpha = u_child / u_parent, beta = 0."""
    arcs = list(arcs)
    records = [(p, c, arcs[c - 1][2] / arcs[p - 1][2], 0.0) for p, c in pairs]
    return build(supplies, arcs, records, InstanceKind.BIDM)


def worked_example() -> Instance:
    return read_instance(WORKED_EXAMPLE)


def worked_start(instance: Instance | None = None) -> BasisState:
    instance = worked_example() if instance is None else instance
    serializer = StartBasisSerializer(data=json.loads(WORKED_BASIS.read_text()), context={"instance": instance})
    serializer.is_valid(raise_exception=True)
    return serializer.save()


# ---------------------------------------------------------------------------
# Rounding fixtures
# ---------------------------------------------------------------------------


def saturating_trap() -> Instance:
    """The relaxation saturates the pair (7,8)/(9,10), which no binary solution can use.

    Parent (2,3) sits behind the unit bottleneck (1,2), so child (5,7) is dead, so
    (7,8) never fills. Only y = (0, 0) is feasible, at cost 20.
    """
    return bidm(
        {1: 1, 3: -1, 5: 1, 8: -1, 9: 1, 10: -1, 11: 0},
        [
            (1, 2, 1, 0),
            (2, 3, 2, 0),
            (5, 7, 100, 0),
            (5, 8, 1, 10),
            (7, 8, 1, 0),
            (9, 10, 1, 0),
            (9, 11, 1, 10),
            (11, 10, 1, 0),
        ],
        [(2, 3), (5, 6)],
    )


def idle_trap() -> Instance:
    """The relaxation leaves the pair (6,7)/(8,9) empty, but every binary solution needs it.

    Only y = (0, 1) is feasible, at cost 10.
    """
    return bidm(
        {1: 1, 3: -1, 4: 1, 5: -1, 6: 1, 7: -1, 10: 0},
        [
            (1, 2, 1, 0),
            (2, 3, 2, 0),
            (4, 5, 2, 0),
            (4, 8, 1, 0),
            (8, 9, 1, 0),
            (9, 5, 1, 0),
            (6, 7, 1, 10),
            (6, 10, 1, 0),
            (10, 7, 1, 0),
        ],
        [(2, 3), (7, 5)],
    )


def lower_gap(big: float) -> Instance:
    """Relaxation costs 0; the binary optimum pays ``big`` for one unit on (1,4)."""
    return bidm(
        {1: 2, 4: -2},
        [(1, 2, 1, 0), (2, 4, 2, 0), (1, 3, 2, 0), (3, 4, 2, 0), (1, 4, 2, big)],
        [(2, 4)],
    )


def upper_gap(big: float) -> Instance:
    """Binary optimum 4 via a saturated parent cycle; the y = 0 branch pays ``4 * big``."""
    return bidm(
        {1: 2, 4: -2, 5: 0},
        [(1, 4, 4, 0), (1, 5, 2, big), (5, 4, 2, big), (2, 3, 4, 1), (3, 2, 4, 0)],
        [(4, 1)],
    )


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def random_instance(
    seed: int,
    m: int = 8,
    extra_arcs: int = 14,
    p: int = 3,
    kind: InstanceKind = InstanceKind.LIDM,
) -> Instance:
    """Feasible random instance: a high-cost cycle carries any supply, interdependencies sit on extra arcs.

    LIDM instances use alpha in {0.5, 1, 2} and beta in {0, 1}; BIDM instances the relaxation form.
    """
    rng = np.random.default_rng(seed)
    total = int(rng.integers(2, 12))
    order = (rng.permutation(m) + 1).tolist()
    supply = dict.fromkeys(range(1, m + 1), 0)
    supply[order[0]] = total
    supply[order[1]] = -(total // 2)
    supply[order[2]] -= total - total // 2

    cycle = (rng.permutation(m) + 1).tolist()
    arcs = [(tail, cycle[(pos + 1) % m], total, 40) for pos, tail in enumerate(cycle)]
    while len(arcs) < m + extra_arcs:
        tail, head = (int(v) for v in rng.integers(1, m + 1, size=2))
        if tail != head:
            arcs.append((tail, head, int(rng.integers(1, 8)), int(rng.integers(0, 20))))

    picked = (rng.choice(extra_arcs, size=2 * p, replace=False) + m + 1).tolist()
    pairs = list(zip(picked[:p], picked[p:]))
    if kind is InstanceKind.BIDM:
        return bidm(supply, arcs, pairs)
    records = [
        (parent, child, float(rng.choice([0.5, 1.0, 2.0])), float(rng.integers(0, 2))) for parent, child in pairs
    ]
    return build(supply, arcs, records)
