"""Batch experiments: exact BIDM, its relaxation and every rounding scheme per trial."""

from __future__ import annotations

import concurrent.futures
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd

from .approx import RoundingScheme, RoundingStatus, randomized_round, relative_error, solve_bidm, standard_schemes
from .conf import solver_setting, tolerance
from .exceptions import ZeroReferenceError
from .generator import GenSpec, generate
from .instance import relaxation
from .simplex import solve

try:
    from openpyxl import Workbook
except ImportError:  # pragma: no cover
    Workbook = None  # type: ignore

log = logging.getLogger(__name__)

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class TrialGroup:
    spec: GenSpec
    trials: int

    @property
    def key(self) -> str:
        spec = self.spec
        return f"{spec.interdep_mode.value}-n{spec.nodes}-a{spec.arcs_per_node}-d{spec.interdep_frac:g}"


@dataclass
class TrialConfig:
    groups: list[TrialGroup]
    seed: int = 0
    schemes: list[RoundingScheme] = field(default_factory=standard_schemes)
    workers: int = field(default_factory=lambda: int(solver_setting("BENCH_WORKERS")))
    node_limit: int | None = None


@dataclass
class SchemeResult:
    status: str
    attempts: int
    objective: float | None
    relative_error: float | None


@dataclass
class TrialRecord:
    group: str
    trial: int
    seed: int
    nodes: int
    arcs_per_node: int
    density: float
    mode: str
    m: int = 0
    n: int = 0
    p: int = 0
    milp_objective: float | None = None
    lp_objective: float | None = None
    lp_relative_error: float | None = None
    schemes: dict[str, SchemeResult] = field(default_factory=dict)
    wall_time: float = 0.0
    sandwich_violations: list[str] = field(default_factory=list)
    error: str | None = None
    provenance: dict[str, Any] = field(default_factory=dict, repr=False)

    def row(self) -> dict[str, Any]:
        out = {
            "group": self.group,
            "trial": self.trial,
            "seed": self.seed,
            "nodes": self.nodes,
            "arcs_per_node": self.arcs_per_node,
            "density": self.density,
            "mode": self.mode,
            "m": self.m,
            "n": self.n,
            "p": self.p,
            "milp_objective": self.milp_objective,
            "lp_objective": self.lp_objective,
            "lp_relative_error": self.lp_relative_error,
            "wall_time": self.wall_time,
            "sandwich_violations": len(self.sandwich_violations),
            "error": self.error,
        }
        for label, result in self.schemes.items():
            out[f"{label}:status"] = result.status
            out[f"{label}:attempts"] = result.attempts
            out[f"{label}:objective"] = result.objective
            out[f"{label}:relative_error"] = result.relative_error
        return out


@dataclass
class TrialSetSummary:
    group: str
    nodes: int
    arcs_per_node: int
    density: float
    mode: str
    trials: int
    completed: int
    lp_error_mean: float
    lp_error_std: float
    schemes: dict[str, dict[str, float]] = field(default_factory=dict)
    sandwich_violations: int = 0


@dataclass(frozen=True)
class _Task:
    group: str
    trial: int
    spec: GenSpec
    schemes: tuple[RoundingScheme, ...]
    node_limit: int | None


def trial_seed(master: int, group: int, trial: int) -> int:
    sequence = np.random.SeedSequence(int(master) & _SEED_MASK, spawn_key=(group, trial))
    return int(sequence.generate_state(1, np.uint64)[0])


def _error_or_zero(approx: float, reference: float) -> float | None:
    try:
        return relative_error(approx, reference)
    except ZeroReferenceError:
        return 0.0 if abs(approx - reference) <= tolerance() else None


def run_trial(task: _Task) -> TrialRecord:
    started = time.perf_counter()
    spec = task.spec
    record = TrialRecord(
        group=task.group,
        trial=task.trial,
        seed=spec.seed,
        nodes=spec.nodes,
        arcs_per_node=spec.arcs_per_node,
        density=spec.interdep_frac,
        mode=spec.interdep_mode.value,
    )
    try:
        generated = generate(spec)
        instance = generated.instance
        record.provenance = generated.provenance
        record.m, record.n, record.p = instance.m, instance.n, instance.p

        milp, _ = solve_bidm(instance, task.node_limit)
        lp = solve(relaxation(instance))
        if not (milp.optimal and lp.optimal):
            raise RuntimeError(f"reference solves ended {milp.status.value} / {lp.status.value}")
        record.milp_objective = milp.objective
        record.lp_objective = lp.objective
        record.lp_relative_error = _error_or_zero(lp.objective, milp.objective)

        for scheme in task.schemes:
            outcome = randomized_round(instance, scheme.with_seed(spec.seed), lp_result=lp)
            error = None
            if outcome.status is RoundingStatus.FEASIBLE:
                error = _error_or_zero(outcome.objective, milp.objective)
            record.schemes[scheme.label] = SchemeResult(
                outcome.status.value, outcome.attempts, outcome.objective, error
            )
        record.sandwich_violations = check_sandwich(record)
    except Exception as exc:
        log.exception("trial %s/%d failed", task.group, task.trial)
        record.error = f"{type(exc).__name__}: {exc}"
    record.wall_time = time.perf_counter() - started
    log.info(
        "trial %s/%d done in %.2fs",
        task.group,
        task.trial,
        record.wall_time,
        extra={"group": task.group, "trial": task.trial, "duration_ms": record.wall_time * 1000, "p": record.p},
    )
    return record


def check_sandwich(record: TrialRecord) -> list[str]:
    """Breaks of relaxation <= exact <= every feasible rounding, one message each."""
    slack = 1e-6 * max(1.0, abs(record.milp_objective))
    found = []
    if record.lp_objective > record.milp_objective + slack:
        found.append("relaxation above the exact optimum")
    for label, result in record.schemes.items():
        if result.objective is not None and result.objective < record.milp_objective - slack:
            found.append(f"{label} beat the exact optimum")
    for message in found:
        log.warning("trial %s/%d: %s", record.group, record.trial, message)
    return found


def _tasks(config: TrialConfig) -> list[_Task]:
    tasks = []
    schemes = tuple(config.schemes)
    for g, group in enumerate(config.groups):
        for k in range(group.trials):
            spec = replace(group.spec, seed=trial_seed(config.seed, g, k))
            tasks.append(_Task(group.key, k, spec, schemes, config.node_limit))
    return tasks


def run_trials(config: TrialConfig) -> tuple[list[TrialRecord], list[TrialSetSummary]]:
    tasks = _tasks(config)
    started = time.perf_counter()
    if config.workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as executor:
            records = list(executor.map(run_trial, tasks))
    else:
        records = [run_trial(task) for task in tasks]
    summaries = summarize(records_frame(records))
    failed = sum(1 for record in records if record.error)
    log.info(
        "%d trials in %d groups, %d failed, %.1fs",
        len(records),
        len(config.groups),
        failed,
        time.perf_counter() - started,
    )
    return records, summaries


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


def records_frame(records: Iterable[TrialRecord]) -> pd.DataFrame:
    return pd.DataFrame([record.row() for record in records])


def scheme_labels(frame: pd.DataFrame) -> list[str]:
    return [col[: -len(":status")] for col in frame.columns if col.endswith(":status")]


def _stat(values: pd.Series, how: str) -> float:
    values = pd.to_numeric(values, errors="coerce").dropna()
    if values.empty:
        return math.nan
    return float(values.mean() if how == "mean" else values.std())


def summarize(frame: pd.DataFrame) -> list[TrialSetSummary]:
    """Per-group statistics; error fields only count trials whose scheme succeeded."""
    if frame.empty:
        return []
    labels = scheme_labels(frame)
    summaries = []
    for key, group in frame.groupby("group", sort=False):
        done = group[group["error"].isna()] if "error" in group else group
        schemes = {}
        for label in labels:
            status = done[f"{label}:status"]
            ok = done[status == RoundingStatus.FEASIBLE.value]
            schemes[label] = {
                "error_mean": _stat(ok[f"{label}:relative_error"], "mean"),
                "error_std": _stat(ok[f"{label}:relative_error"], "std"),
                "failure_rate": float((status == RoundingStatus.FAILED.value).mean()) if len(done) else math.nan,
                "mean_attempts": _stat(ok[f"{label}:attempts"], "mean"),
                "successes": int(len(ok)),
            }
        first = group.iloc[0]
        summaries.append(
            TrialSetSummary(
                group=str(key),
                nodes=int(first["nodes"]),
                arcs_per_node=int(first["arcs_per_node"]),
                density=float(first["density"]),
                mode=str(first["mode"]),
                trials=int(len(group)),
                completed=int(len(done)),
                lp_error_mean=_stat(done["lp_relative_error"], "mean"),
                lp_error_std=_stat(done["lp_relative_error"], "std"),
                schemes=schemes,
                sandwich_violations=int(done["sandwich_violations"].sum()) if "sandwich_violations" in done else 0,
            )
        )
    return summaries


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    return float(pd.Series(x, dtype=float).rank().corr(pd.Series(y, dtype=float).rank()))


def summary_tables(summaries: Sequence[TrialSetSummary]) -> dict[str, pd.DataFrame]:
    """Densities down, schemes across; one table per statistic and trial family."""
    rows = []
    for summary in summaries:
        base = {"mode": summary.mode, "nodes": summary.nodes, "density": summary.density}
        rows.append({**base, "scheme": "lp", "error_mean": summary.lp_error_mean, "error_std": summary.lp_error_std})
        for label, stats in summary.schemes.items():
            rows.append({**base, "scheme": label, **stats})
    if not rows:
        return {}
    long = pd.DataFrame(rows)
    order = list(dict.fromkeys(long["scheme"]))
    tables = {}
    for metric in ("error_mean", "error_std", "failure_rate", "mean_attempts"):
        if metric not in long:
            continue
        source = long if metric.startswith("error") else long[long["scheme"] != "lp"]
        table = source.pivot_table(index=["mode", "nodes", "density"], columns="scheme", values=metric, dropna=False)
        tables[metric] = table.reindex(columns=[s for s in order if s in table.columns])
    return tables


def _slug(label: str) -> str:
    return label.replace("(", "_").replace(")", "")


def tables_to_xlsx(tables: dict[str, pd.DataFrame], path: Path) -> None:
    if Workbook is None:
        raise RuntimeError("openpyxl is required for XLSX exports")
    wb = Workbook()
    wb.remove(wb.active)
    for metric, table in tables.items():
        ws = wb.create_sheet(metric)
        flat = table.reset_index()
        ws.append([str(col) for col in flat.columns])
        for values in flat.itertuples(index=False):
            ws.append([None if isinstance(v, float) and math.isnan(v) else v for v in values])
    wb.save(path)


def write_outputs(
    records: Sequence[TrialRecord], summaries: Sequence[TrialSetSummary], out_dir: str | Path
) -> list[Path]:
    from .serializers import TrialSetSummarySerializer

    out = Path(out_dir)
    (out / "plots").mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    frame = records_frame(records)
    if not frame.empty:
        for key, group in frame.groupby("group", sort=False):
            path = out / f"trials_{key}.csv"
            group.to_csv(path, index=False)
            written.append(path)

    path = out / "summary.json"
    payload = {"groups": TrialSetSummarySerializer(summaries, many=True).data}
    path.write_text(json.dumps(payload, indent=2))
    written.append(path)

    tables = summary_tables(summaries)
    for metric, table in tables.items():
        path = out / f"table_{metric}.csv"
        table.to_csv(path)
        written.append(path)
    if tables and Workbook is not None:
        path = out / "tables.xlsx"
        tables_to_xlsx(tables, path)
        written.append(path)

    # two-column series, one file per (family, scheme, statistic)
    for metric, suffix in (("error_mean", "error"), ("failure_rate", "failure")):
        if metric not in tables:
            continue
        for (mode, nodes), part in tables[metric].groupby(level=["mode", "nodes"]):
            densities = part.index.get_level_values("density")
            for scheme in part.columns:
                path = out / "plots" / f"{mode}-n{nodes}_{_slug(scheme)}_{suffix}_vs_density.tsv"
                pd.DataFrame({"density": densities, metric: part[scheme].to_numpy()}).to_csv(
                    path, sep="\t", index=False
                )
                written.append(path)
    log.info("wrote %d files to %s", len(written), out)
    return written
