"""Command line: ``toclayout advise|compare|bench|synth``.

Exit codes: 0 feasible, 2 infeasible, 3 input error, 4 exhaustive-search
budget refusal.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .cost import CostModelConfig, CostVariant, layout_cost
from .domain import (
    IO_TYPES,
    IoType,
    Layout,
    MetricMode,
    ObjectKind,
    ValidationError,
    grouping,
)
from .estimator import (
    TimeEstimate,
    baseline_layout,
    estimate_toc,
    feasible,
)
from .formats import (
    REPORT_SCHEMA,
    FormatError,
    Problem,
    dump_json,
    dump_profile,
    load_config,
    load_fixture,
    load_profile,
    merge_bench_results,
)
from .optimizer import (
    DEFAULT_ES_BUDGET,
    OptimizationResult,
    SearchBudgetExceeded,
    dot_optimize,
    exhaustive_search,
    provision_configurations,
)
from .profiling import SCENARIOS, BenchError, SynthSpec, bench_storage, random_instance, synthesize_profile

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_BUDGET = 0, 2, 3, 4


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def psr(estimate: TimeEstimate, workload, constraints) -> float:
    """Percentage of workload queries (every execution counts) meeting their caps."""
    if constraints.metric_mode is MetricMode.THROUGHPUT:
        return 100.0 if estimate.throughput >= constraints.throughput_floor else 0.0
    total = met = 0
    for stream in workload.streams:
        for q in stream:
            total += 1
            met += estimate.per_query[q] <= constraints.caps[q]
    return 100.0 * met / total


def _sla(value: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}")
    if not 0 < x <= 1:
        raise argparse.ArgumentTypeError("relative SLA must be in (0,1]")
    return x


def _cost_config(args) -> CostModelConfig:
    if args.cost_model == "discrete":
        if args.alpha is None:
            raise InputError("--cost-model discrete requires --alpha")
        return CostModelConfig.discrete(args.alpha, args.count_empty_classes)
    if args.alpha is not None:
        raise InputError("--alpha only applies to --cost-model discrete")
    return CostModelConfig()


def _load(args) -> tuple[Problem, dict]:
    problem = load_config(args.config)
    profiles = {}
    for conf in problem.configurations:
        path = args.profile if (args.profile and len(problem.configurations) == 1) else problem.profile_paths.get(conf.id)
        if path is None:
            raise InputError(f"{args.config}: no profile given for configuration {conf.id!r} (use --profile)")
        profiles[conf.id] = load_profile(
            path,
            problem.objects,
            conf.classes,
            args.plan_invariant or problem.plan_invariant,
            problem.workload.query_ids,
        )
    return problem, profiles


def preset_layout(spec: str, problem: Problem, classes) -> Layout:
    """``all:CLASS`` or ``split:INDEX_CLASS:DATA_CLASS``."""
    ids = {c.id for c in classes}
    parts = spec.split(":")
    for cid in parts[1:]:
        if cid not in ids:
            raise InputError(f"--preset {spec}: unknown storage class {cid!r}")
    if parts[0] == "all" and len(parts) == 2:
        return Layout.uniform(problem.objects, parts[1])
    if parts[0] == "split" and len(parts) == 3:
        return Layout(
            {o.id: parts[1] if o.kind is ObjectKind.INDEX else parts[2] for o in problem.objects}
        )
    raise InputError(f"--preset {spec}: expected all:CLASS or split:INDEX_CLASS:DATA_CLASS")


def _layout_block(layout, problem, classes, profile, constraints, cost_config, both_costs, estimate=None, toc=None):
    groups = grouping(problem.objects)
    if estimate is None:
        toc, estimate = estimate_toc(problem.workload, layout, profile, classes, problem.objects, groups, cost_config)
    verdict = feasible(layout, classes, problem.objects, estimate, constraints)
    block = {
        "layout": {o.id: layout[o.id] for o in sorted(problem.objects, key=lambda o: o.id)},
        "layout_cost_cents_per_hour": layout_cost(layout, classes, problem.objects, cost_config, check=False),
        "workload_time_hours": estimate.total,
        "throughput_tasks_per_hour": estimate.throughput,
        "toc_cents": toc,
        "queries": [
            {
                "query": q,
                "estimated_ms": t,
                "cap_ms": constraints.caps[q] if constraints.caps else None,
                "meets_cap": (t <= constraints.caps[q]) if constraints.caps else None,
            }
            for q, t in sorted(estimate.per_query.items())
        ],
        "psr_percent": psr(estimate, problem.workload, constraints),
        "feasible": verdict.ok,
        "violations": list(verdict.violations),
    }
    if both_costs:
        variants = {"linear": layout_cost(layout, classes, problem.objects, check=False)}
        if cost_config.variant is CostVariant.DISCRETE:
            variants["discrete"] = block["layout_cost_cents_per_hour"]
        block["layout_cost_variants_cents_per_hour"] = variants
    return block


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_json_safe(v) for v in x]
    return x


def build_report(engine, problem, profiles, config_id, result: OptimizationResult, args, cost_config) -> dict:
    conf = next(c for c in problem.configurations if c.id == (config_id or problem.configurations[0].id))
    classes = conf.classes
    profile = profiles[conf.id]
    constraints = result.constraints
    report = {
        "schema": REPORT_SCHEMA,
        "engine": engine,
        "status": result.status.value,
        "configuration": config_id,
        "relative_sla": args.sla,
        "metric_mode": problem.workload.metric_mode.value,
        "cost_model": {
            "variant": cost_config.variant.value,
            "alpha": cost_config.alpha,
            "discrete_counts_empty_classes": cost_config.discrete_counts_empty_classes,
        },
        "profile_plan_invariant": profile.plan_invariant,
        "layouts_examined": result.layouts_examined,
    }
    if result.feasible:
        report["recommendation"] = _layout_block(
            result.layout, problem, classes, profile, constraints, cost_config, args.both_costs,
            result.estimate, result.toc,
        )
        report["infeasibility"] = None
    else:
        l0 = baseline_layout(problem.objects, classes)
        diag = _layout_block(l0, problem, classes, profile, constraints, cost_config, args.both_costs)
        report["recommendation"] = None
        report["infeasibility"] = {
            "explanation": "no examined layout met the capacity and SLA constraints; "
            "relax the relative SLA or capacity limits",
            "baseline": diag,
        }
    report["presets"] = {
        spec: _layout_block(preset_layout(spec, problem, classes), problem, classes, profile, constraints, cost_config, args.both_costs)
        for spec in args.preset
    }
    return _json_safe(report)


def _summary(report: dict) -> str:
    lines = [f"status: {report['status']}  engine: {report['engine']}  relative SLA: {report['relative_sla']}"]
    if report.get("configuration"):
        lines.append(f"configuration: {report['configuration']}")
    rec = report["recommendation"]
    if rec:
        lines.append(
            f"TOC {rec['toc_cents']:.6g} cents  layout cost {rec['layout_cost_cents_per_hour']:.6g} cents/h  "
            f"time {rec['workload_time_hours'] * 3600:.6g} s  PSR {rec['psr_percent']:.1f}%"
        )
        for obj, cid in rec["layout"].items():
            lines.append(f"  {obj:<24} {cid}")
    else:
        base = report["infeasibility"]["baseline"]
        lines.append(report["infeasibility"]["explanation"])
        lines.append(f"baseline PSR {base['psr_percent']:.1f}%")
        lines += [f"  {v}" for v in base["violations"]]
    lines.append(f"layouts examined: {report['layouts_examined']}")
    for name, p in report["presets"].items():
        toc = p["toc_cents"]
        lines.append(f"preset {name}: TOC {toc:.6g} cents  PSR {p['psr_percent']:.1f}%")
    return "\n".join(lines) + "\n"


def _emit(doc: dict, summary: str, out: str | None) -> None:
    text = dump_json(doc)
    if out:
        with open(out, "w") as f:
            f.write(text)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(text)


def cmd_advise(args) -> int:
    cost_config = _cost_config(args)
    problem, profiles = _load(args)
    if args.engine == "es":
        if len(problem.configurations) != 1:
            raise InputError("--engine es supports a single storage configuration")
        conf = problem.configurations[0]
        result = exhaustive_search(
            problem.objects, conf.classes, problem.workload, profiles[conf.id], args.sla, cost_config, args.es_budget
        )
        config_id = None
    elif len(problem.configurations) == 1:
        conf = problem.configurations[0]
        result = dot_optimize(problem.objects, conf.classes, problem.workload, profiles[conf.id], args.sla, cost_config)
        config_id = None
    else:
        config_id, result = provision_configurations(
            problem.configurations, problem.objects, problem.workload, profiles, args.sla, cost_config
        )
        if config_id is None:
            config_id = problem.configurations[-1].id
    report = build_report(args.engine, problem, profiles, config_id, result, args, cost_config)
    _emit(report, _summary(report), args.out)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def _timed(fn, *a):
    t0 = time.perf_counter()
    r = fn(*a)
    return r, time.perf_counter() - t0


def _ratio(a: OptimizationResult, b: OptimizationResult, what):
    if not (a.feasible and b.feasible):
        return None
    x, y = what(a), what(b)
    return x / y if y else (1.0 if x == y else math.inf)


def compare_instance(objects, classes, workload, profile, sla, cost_config, budget):
    dot, t_dot = _timed(dot_optimize, objects, classes, workload, profile, sla, cost_config)
    es, t_es = _timed(exhaustive_search, objects, classes, workload, profile, sla, cost_config, budget)
    return {
        "dot": {"status": dot.status.value, "toc_cents": dot.toc, "layouts_examined": dot.layouts_examined,
                "workload_time_hours": dot.estimate.total if dot.estimate else None, "wall_seconds": t_dot},
        "es": {"status": es.status.value, "toc_cents": es.toc, "layouts_examined": es.layouts_examined,
               "workload_time_hours": es.estimate.total if es.estimate else None, "wall_seconds": t_es},
        "toc_ratio": _ratio(dot, es, lambda r: r.toc),
        "time_ratio": _ratio(dot, es, lambda r: r.estimate.total),
    }, dot


def cmd_compare(args) -> int:
    cost_config = _cost_config(args)
    if args.random_batch:
        ratios = []
        feasible_pairs = 0
        for seed in range(args.seed, args.seed + args.random_batch):
            inst = random_instance(seed, n_objects=args.objects, n_classes=args.classes, max_group_size=args.group_size)
            row, _ = compare_instance(
                inst.objects, inst.classes, inst.workload, inst.profile, args.sla, cost_config, args.es_budget
            )
            if row["toc_ratio"] is not None:
                feasible_pairs += 1
                ratios.append(row["toc_ratio"])
        r = np.array(ratios)
        doc = {
            "schema": REPORT_SCHEMA,
            "mode": "random-batch",
            "instances": args.random_batch,
            "both_feasible": feasible_pairs,
            "toc_ratio": {
                "min": float(r.min()) if r.size else None,
                "median": float(np.median(r)) if r.size else None,
                "p90": float(np.percentile(r, 90)) if r.size else None,
                "max": float(r.max()) if r.size else None,
                "share_within_1.25": float(np.mean(r <= 1.25)) if r.size else None,
            },
        }
        summary = (
            f"{feasible_pairs}/{args.random_batch} instances feasible for both engines; TOC(DOT)/TOC(ES) "
            f"median {doc['toc_ratio']['median']}, p90 {doc['toc_ratio']['p90']}, max {doc['toc_ratio']['max']}\n"
        )
        _emit(_json_safe(doc), summary, args.out)
        return EXIT_OK
    if not args.config:
        raise InputError("compare needs a config file or --random-batch")
    problem, profiles = _load(args)
    if len(problem.configurations) != 1:
        raise InputError("compare supports a single storage configuration")
    conf = problem.configurations[0]
    row, dot = compare_instance(
        problem.objects, conf.classes, problem.workload, profiles[conf.id], args.sla, cost_config, args.es_budget
    )
    doc = _json_safe({"schema": REPORT_SCHEMA, "mode": "single", "relative_sla": args.sla, **row})
    summary = (
        f"DOT {row['dot']['status']} TOC {row['dot']['toc_cents']:.6g} ({row['dot']['layouts_examined']} layouts, "
        f"{row['dot']['wall_seconds']:.3f} s)\nES  {row['es']['status']} TOC {row['es']['toc_cents']:.6g} "
        f"({row['es']['layouts_examined']} layouts, {row['es']['wall_seconds']:.3f} s)\n"
        f"TOC ratio {row['toc_ratio']}  time ratio {row['time_ratio']}\n"
    )
    _emit(doc, summary, args.out)
    return EXIT_OK if dot.feasible else EXIT_INFEASIBLE


def cmd_bench(args) -> int:
    kinds = list(IO_TYPES) if args.io == "all" else [IoType(args.io.upper())]
    results = []
    rr = {}
    for k in args.concurrency:
        for io in kinds:
            res = bench_storage(
                args.target, io, k, args.working_set, args.ops, args.block_size, args.record_size,
                args.direct, args.sync, rr_per_io=rr.get(k),
            )
            if io is IoType.RR:
                rr[k] = res.per_io
            results.append(res)
    rows = [
        {"io_type": r.io_type.value, "concurrency": r.concurrency, "operations": r.operations,
         "elapsed_ms": r.elapsed, "per_io_ms": r.per_io, "anomaly": r.anomaly, "direct_io": r.direct}
        for r in results
    ]
    for row in rows:
        flag = "  (clamped)" if row["anomaly"] else ""
        sys.stdout.write(f"{row['io_type']} K={row['concurrency']}: {row['per_io_ms']:.6g} ms/IO over "
                         f"{row['operations']} ops{flag}\n")
    if args.append_to:
        if not args.class_id:
            raise InputError("--append-to requires --class-id")
        try:
            doc = load_fixture(args.append_to)
        except FormatError:
            doc = {"schema": "toclayout.latency/1", "classes": []}
        doc = merge_bench_results(doc, args.class_id, results, args.price, args.capacity)
        with open(args.append_to, "w") as f:
            f.write(dump_json(doc))
    if args.out:
        with open(args.out, "w") as f:
            f.write(dump_json(rows))
    return EXIT_OK


def cmd_synth(args) -> int:
    problem = load_config(args.config)
    confs = {c.id: c for c in problem.configurations}
    conf = confs.get(args.configuration) if args.configuration else problem.configurations[0]
    if conf is None:
        raise InputError(f"unknown configuration {args.configuration!r}")
    spec = SynthSpec(args.scenario, args.seed, tuple(problem.workload.query_ids), problem.workload.latency_level)
    profile = synthesize_profile(problem.objects, grouping(problem.objects), conf.classes, spec)
    text = dump_profile(profile)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _search_flags(p):
    p.add_argument("--profile", help="profile CSV (overrides the config's profile path)")
    p.add_argument("--plan-invariant", action="store_true",
                   help="profile comes from one uniform layout and applies to every placement")
    p.add_argument("--sla", type=_sla, default=0.5, help="relative SLA in (0,1] (default 0.5)")
    p.add_argument("--cost-model", choices=["linear", "discrete"], default="linear")
    p.add_argument("--alpha", type=float, help="discrete cost weight in [0,1]")
    p.add_argument("--count-empty-classes", action="store_true",
                   help="discrete model: charge the fixed term for unused classes too")
    p.add_argument("--es-budget", type=int, default=DEFAULT_ES_BUDGET)
    p.add_argument("--out", help="write the JSON report here and print a summary")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toclayout", description="TOC-minimizing storage layout advisor")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("advise", help="recommend a layout")
    p.add_argument("config")
    _search_flags(p)
    p.add_argument("--engine", choices=["dot", "es"], default="dot")
    p.add_argument("--preset", action="append", default=[],
                   help="also evaluate a simple layout: all:CLASS or split:INDEX_CLASS:DATA_CLASS")
    p.add_argument("--both-costs", action="store_true", help="report linear and discrete layout cost")
    p.set_defaults(func=cmd_advise)

    p = sub.add_parser("compare", help="DOT against exhaustive search")
    p.add_argument("config", nargs="?")
    _search_flags(p)
    p.add_argument("--random-batch", type=int, default=0, help="compare on N seeded random instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objects", type=int, default=6)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--group-size", type=int, default=2)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="measure SR/RR/SW/RW latency on a directory")
    p.add_argument("target")
    p.add_argument("--io", choices=["sr", "rr", "sw", "rw", "all"], default="all")
    p.add_argument("--concurrency", type=int, action="append", help="worker count (repeatable)")
    p.add_argument("--block-size", type=int, default=8192)
    p.add_argument("--record-size", type=int, default=256)
    p.add_argument("--working-set", type=int, default=8 << 20, help="bytes per worker")
    p.add_argument("--ops", type=int, default=1000, help="operations per worker")
    p.add_argument("--direct", action="store_true", help="use O_DIRECT where supported")
    p.add_argument("--sync", action="store_true", help="fsync after each write")
    p.add_argument("--class-id")
    p.add_argument("--append-to", help="latency fixture to update")
    p.add_argument("--price", type=float, help="cents/GB/hour, for a class new to the fixture")
    p.add_argument("--capacity", type=float, help="GB, for a class new to the fixture")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic profile CSV for a config")
    p.add_argument("config")
    p.add_argument("--scenario", required=True, help=f"one of {', '.join(SCENARIOS)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--configuration")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "concurrency", 0) is None:
        args.concurrency = [1]
    try:
        return args.func(args)
    except SearchBudgetExceeded as e:
        sys.stderr.write(f"toclayout: refused: {e}\n")
        return EXIT_BUDGET
    except (InputError, ValidationError, BenchError, OSError) as e:
        sys.stderr.write(f"toclayout: error: {e}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
