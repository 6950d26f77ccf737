"""Seeded benchmark sweeps over random graphs, heuristics and core counts."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

from .generator import GenSpec, generate
from .graph import TaskGraph, sequential_makespan
from .heuristics import schedule_ish, schedule_dsh
from .schedule import Schedule, duplicate_count, makespan

ALGOS = {
    "ish": lambda graph, m: schedule_ish(graph, m),
    "dsh": lambda graph, m: schedule_dsh(graph, m),
}

#: Relative slack under the best speedup that still counts as "on the plateau".
PLATEAU_RTOL = 0.01


@dataclass(frozen=True)
class BenchRow:
    graph: str
    seed: int
    nodes: int
    density: float
    algo: str
    cores: int
    makespan: float
    speedup: float
    duplicates: int


@dataclass
class BenchReport:
    rows: list[BenchRow]
    aggregates: dict = field(default_factory=dict)
    plateau: dict = field(default_factory=dict)
    wall_seconds: float = 0.0


def run_bench(
    specs: list[GenSpec], algos: list[str], core_counts: list[int]
) -> BenchReport:
    for algo in algos:
        if algo not in ALGOS:
            raise ValueError(f"unknown algorithm {algo!r}")
    t0 = time.monotonic()
    rows: list[BenchRow] = []
    for spec in specs:
        graph = generate(spec)
        label = f"n{spec.n}-d{spec.density:g}-s{spec.seed}"
        seq = sequential_makespan(graph)
        for algo in algos:
            for m in core_counts:
                sched = ALGOS[algo](graph, m)
                ms = makespan(sched)
                rows.append(
                    BenchRow(
                        graph=label,
                        seed=spec.seed,
                        nodes=spec.n,
                        density=spec.density,
                        algo=algo,
                        cores=m,
                        makespan=ms,
                        speedup=seq / ms,
                        duplicates=duplicate_count(graph, sched),
                    )
                )
    report = BenchReport(rows=rows, wall_seconds=time.monotonic() - t0)
    _aggregate(report, algos, core_counts)
    return report


def _aggregate(report: BenchReport, algos: list[str], core_counts: list[int]) -> None:
    for algo in algos:
        for m in core_counts:
            cell = [r.speedup for r in report.rows if r.algo == algo and r.cores == m]
            if not cell:
                continue
            report.aggregates[f"{algo}/m{m}"] = {
                "mean_speedup": sum(cell) / len(cell),
                "min_speedup": min(cell),
                "max_speedup": max(cell),
            }
    by_graph: dict[tuple[str, str], list[BenchRow]] = {}
    for r in report.rows:
        by_graph.setdefault((r.graph, r.algo), []).append(r)
    for (graph, algo), rs in by_graph.items():
        best = max(r.speedup for r in rs)
        plateau_m = min(
            r.cores for r in rs if r.speedup >= best * (1.0 - PLATEAU_RTOL)
        )
        report.plateau[f"{graph}/{algo}"] = plateau_m


def to_csv(report: BenchReport) -> str:
    """Deterministic text: no timestamps, stable ordering and formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["graph", "seed", "nodes", "density", "algo", "cores", "makespan", "speedup", "duplicates"]
    )
    ordered = sorted(report.rows, key=lambda r: (r.graph, r.algo, r.cores))
    for r in ordered:
        writer.writerow(
            [r.graph, r.seed, r.nodes, repr(r.density), r.algo, r.cores,
             repr(r.makespan), repr(r.speedup), r.duplicates]
        )
    return buf.getvalue()


def to_json(report: BenchReport) -> dict:
    return {
        "rows": [r.__dict__ for r in sorted(report.rows, key=lambda r: (r.graph, r.algo, r.cores))],
        "aggregates": report.aggregates,
        "plateau": report.plateau,
        "wall_seconds": report.wall_seconds,
    }
