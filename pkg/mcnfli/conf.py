"""Access to the ``MCNFLI`` settings block with library defaults."""

from __future__ import annotations

from typing import Any

from django.conf import settings

DEFAULTS: dict[str, Any] = {
    "TOLERANCE": 1e-9,
    "DEGENERATE_PIVOT_LIMIT": 50,
    "ITERATION_FACTOR": 10,
    "DEFAULT_RULE": "dantzig",
    "USE_DHAT": False,
    "MAX_ATTEMPTS": 1000,
    "BRUTE_FORCE_MAX_P": 20,
    "BNB_NODE_LIMIT": 100000,
    "INTERDEP_RESAMPLES": 100,
    "NETWORK_RESAMPLES": 10,
    "BENCH_WORKERS": 1,
    "DEBUG_CHECKS": False,
}


def solver_setting(name: str) -> Any:
    if name not in DEFAULTS:
        raise KeyError(f"unknown solver setting {name!r}")
    if not settings.configured:
        return DEFAULTS[name]
    return getattr(settings, "MCNFLI", {}).get(name, DEFAULTS[name])


def tolerance() -> float:
    return float(solver_setting("TOLERANCE"))
