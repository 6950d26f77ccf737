"""Command line interface."""

from __future__ import annotations

import argparse
import json
import sys

from . import bench as bench_mod
from . import codegen as codegen_mod
from .exact import export_model, schedule_exact
from .generator import GenSpec, generate
from .graph import (
    critical_path_lower_bound,
    density,
    load_graph,
    save_graph,
    sequential_makespan,
    to_dot,
    validate,
)
from .heuristics import schedule_dsh, schedule_ish
from .schedule import (
    check_constraint_semantics,
    check_validity,
    duplicate_count,
    load_schedule,
    makespan,
    render_gantt,
    save_schedule,
    speedup,
)
from .codegen import plan
from .simulator import compare_predicted, simulate, simulated_gantt


def _parse_cores_list(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x]


def cmd_gen(args) -> int:
    spec = GenSpec(
        n=args.nodes,
        density=args.density,
        seed=args.seed,
        wcet_range=(args.wcet_range[0], args.wcet_range[1]),
        comm_range=(args.comm_range[0], args.comm_range[1]),
    )
    graph = generate(spec)
    save_graph(graph, args.out)
    print(f"wrote {args.out}: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    return 0


def cmd_fixture(args) -> int:
    from . import fixtures

    builders = {
        "lenet5-split": fixtures.lenet5_split,
        "googlenet": fixtures.googlenet,
        "googlenet-segment": fixtures.googlenet_segment,
    }
    graph = builders[args.name]()
    save_graph(graph, args.out)
    print(f"wrote {args.out}: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    if args.schedule_out:
        if args.name != "lenet5-split":
            print("error: only lenet5-split ships a reference schedule", file=sys.stderr)
            return 1
        save_schedule(fixtures.lenet5_split_schedule(), args.schedule_out)
        print(f"wrote {args.schedule_out}")
    return 0


def cmd_validate(args) -> int:
    graph = load_graph(args.graph)
    report = validate(graph)
    if report:
        for line in report:
            print(f"graph: {line}", file=sys.stderr)
        return 1
    if args.schedule:
        sched = load_schedule(args.schedule, graph)
        report = check_validity(graph, sched)
        if args.encoding:
            report += check_constraint_semantics(graph, sched, args.encoding)
        if report:
            for line in report:
                print(f"schedule: {line}", file=sys.stderr)
            return 1
    print("ok")
    return 0


def cmd_stats(args) -> int:
    graph = load_graph(args.graph)
    report = validate(graph)
    if report:
        for line in report:
            print(f"graph: {line}", file=sys.stderr)
        return 1
    print(
        json.dumps(
            {
                "nodes": len(graph.nodes),
                "edges": len(graph.edges),
                "density": density(graph),
                "sequential_makespan": sequential_makespan(graph),
                "critical_path_lower_bound": critical_path_lower_bound(graph),
            },
            indent=2,
        )
    )
    return 0


def cmd_dot(args) -> int:
    graph = load_graph(args.graph)
    text = to_dot(graph)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


def cmd_schedule(args) -> int:
    graph = load_graph(args.graph)
    report = validate(graph)
    if report:
        for line in report:
            print(f"graph: {line}", file=sys.stderr)
        return 1
    if args.algo == "ish":
        sched = schedule_ish(graph, args.cores)
        proven = False
    elif args.algo == "dsh":
        sched = schedule_dsh(graph, args.cores)
        proven = False
    else:
        result = schedule_exact(graph, args.cores, budget=args.budget)
        sched = result.schedule
        proven = result.proven_optimal
    save_schedule(sched, args.out)
    summary = {
        "algo": args.algo,
        "cores": args.cores,
        "makespan": makespan(sched),
        "speedup": speedup(graph, sched),
        "duplicates": duplicate_count(graph, sched),
    }
    if args.algo == "exact":
        summary["proven_optimal"] = proven
    print(json.dumps(summary, indent=2))
    if args.gantt:
        print(render_gantt(graph, sched), end="")
    return 0


def cmd_simulate(args) -> int:
    graph = load_graph(args.graph)
    sched = load_schedule(args.schedule, graph)
    report = check_validity(graph, sched)
    if report:
        for line in report:
            print(f"schedule: {line}", file=sys.stderr)
        return 1
    plans = plan(graph, sched)
    result = simulate(graph, plans, margin=args.margin)
    comparison = compare_predicted(graph, sched, margin=args.margin)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for e in result.events:
                fh.write(
                    json.dumps(
                        {
                            "time": e.time,
                            "core": e.core,
                            "kind": e.kind,
                            "node": e.node,
                            "message": e.message,
                            "waited": e.waited,
                        }
                    )
                    + "\n"
                )
    print(
        json.dumps(
            {
                "predicted_makespan": comparison.predicted,
                "simulated_makespan": comparison.simulated,
                "blocked_writes": [
                    {"message": name, "waited": waited}
                    for name, waited in result.blocked_writes
                ],
                "deadlock": result.deadlock,
            },
            indent=2,
        )
    )
    if args.gantt:
        print(simulated_gantt(graph, plans, result), end="")
    return 2 if result.deadlocked else 0


def cmd_export_model(args) -> int:
    graph = load_graph(args.graph)
    text = export_model(graph, args.cores, args.encoding)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_codegen(args) -> int:
    graph = load_graph(args.graph)
    if args.mode == "sequential":
        manifest = codegen_mod.emit_sequential(graph, args.out)
    else:
        if not args.schedule:
            print("codegen: --schedule is required for parallel mode", file=sys.stderr)
            return 1
        sched = load_schedule(args.schedule, graph)
        report = check_validity(graph, sched)
        if report:
            for line in report:
                print(f"schedule: {line}", file=sys.stderr)
            return 1
        manifest = codegen_mod.emit_parallel(graph, sched, args.out)
    print(f"wrote {args.out}: {len(manifest['sources'])} sources")
    return 0


def cmd_bench(args) -> int:
    specs = [
        GenSpec(n=args.nodes, density=args.density, seed=args.seed_base + i)
        for i in range(args.seeds)
    ]
    algos = [a for a in args.algos.split(",") if a]
    cores = _parse_cores_list(args.cores)
    report = bench_mod.run_bench(specs, algos, cores)
    import os

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "bench.csv")
    json_path = os.path.join(args.out, "bench.json")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(bench_mod.to_csv(report))
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(bench_mod.to_json(report), fh, indent=2)
        fh.write("\n")
    print(f"wrote {csv_path} and {json_path} ({len(report.rows)} rows)")
    for key in sorted(report.aggregates):
        agg = report.aggregates[key]
        print(f"  {key}: mean speedup {agg['mean_speedup']:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schedgen",
        description="Schedule layer DAGs onto homogeneous cores and generate C code.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random task graph")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--wcet-range", type=float, nargs=2, default=[1.0, 10.0])
    p.add_argument("--comm-range", type=float, nargs=2, default=[1.0, 10.0])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fixture", help="write one of the built-in reference networks")
    p.add_argument("name", choices=["lenet5-split", "googlenet", "googlenet-segment"])
    p.add_argument("--out", required=True)
    p.add_argument("--schedule-out", help="also write the reference schedule")
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("validate", help="validate a graph and optionally a schedule")
    p.add_argument("graph")
    p.add_argument("--schedule")
    p.add_argument("--encoding", choices=["tang", "improved"])
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="print graph statistics as JSON")
    p.add_argument("graph")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("dot", help="export a graph to Graphviz text")
    p.add_argument("graph")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dot)

    p = sub.add_parser("schedule", help="schedule a graph onto m cores")
    p.add_argument("graph")
    p.add_argument("--algo", choices=["ish", "dsh", "exact"], required=True)
    p.add_argument("--cores", type=int, required=True)
    p.add_argument("--budget", type=float, default=None, help="seconds, exact only")
    p.add_argument("--gantt", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="simulate the communication plans of a schedule")
    p.add_argument("graph")
    p.add_argument("--schedule", required=True)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--trace", help="write JSON lines trace to this file")
    p.add_argument("--gantt", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-model", help="emit solver-neutral constraint text")
    p.add_argument("graph")
    p.add_argument("--encoding", choices=["tang", "improved"], required=True)
    p.add_argument("--cores", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_model)

    p = sub.add_parser("codegen", help="emit C sources for a schedule")
    p.add_argument("graph")
    p.add_argument("--mode", choices=["parallel", "sequential"], required=True)
    p.add_argument("--schedule")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_codegen)

    p = sub.add_parser("bench", help="run a seeded benchmark sweep")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--seeds", type=int, default=30)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--cores", default="2:10", help="range lo:hi or comma list")
    p.add_argument("--algos", default="ish,dsh")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        # bad paths and out-of-range parameters are user errors, not crashes
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
