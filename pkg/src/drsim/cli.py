"""Command-line experiment runner.

    drsim run config.json [--seeds a..b] [--parallel N] [--trace]
                          [--no-timestamp] [--check off|bounds|full] [--out DIR]

Writes results.csv, summary.txt and, with --trace, one trace-<id>-<seed>.json
per run. Exits 1 if any run violates a check, 2 on a bad config.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .metrics import CSV_COLUMNS, aggregate
from .runner import RunResult, run_one
from .scenario import CHECK_LEVELS, ScenarioError, parse_scenario, parse_seeds


def _task(args) -> RunResult:
    sc, seed, check, trace = args
    return run_one(sc, seed, check, trace)


def run_suite(scenarios: list, parallel: int = 1, check: str | None = None, trace: bool = False) -> list:
    """Every (scenario, seed) pair, results in input order regardless of parallelism."""
    tasks = [(sc, seed, check, trace) for sc in scenarios for seed in sc.seeds]
    if parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * parallel))))
    return [_task(t) for t in tasks]


def results_csv(results: list, timestamp: str | None) -> str:
    cols = CSV_COLUMNS + (["timestamp"] if timestamp else [])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in results:
        row = r.report.row()
        if timestamp:
            row["timestamp"] = timestamp
        w.writerow(row)
    return buf.getvalue()


def _numeric_diagnostics(results: list) -> dict:
    vals: dict = {}
    for r in results:
        for key, v in r.diagnostics.items():
            if isinstance(v, bool):
                v = int(v)
            if isinstance(v, (int, float)):
                vals.setdefault(key, []).append(v)
            elif isinstance(v, dict):
                for sub, x in v.items():
                    vals.setdefault(f"{key}[{sub}]", []).append(x)
    return {key: (sum(v) / len(v), max(v)) for key, v in sorted(vals.items())}


def summary_text(scenarios: list, results: list, timestamp: str | None) -> str:
    out = []
    if timestamp:
        out.append(f"generated {timestamp}")
    for sc in scenarios:
        rs = [r for r in results if r.scenario_id == sc.id]
        if not rs:
            continue
        agg = aggregate([r.report for r in rs])
        bad = [r for r in rs if r.violations]
        out.append(f"[{sc.id}] {sc.protocol} n={sc.n} k={sc.k} adversary={sc.adversary.get('name')} runs={agg['runs']}")
        out.append(f"  Q_max mean={agg['Q_mean']:.2f} max={agg['Q_max']} p95={agg['Q_p95']}"
                   f"  T mean={agg['T_mean']:.3f}  failure rate={agg['failure_rate']:.4f}")
        out.append("  verdicts " + " ".join(f"{v}={c}" for v, c in agg["verdicts"].items()))
        diag = _numeric_diagnostics(rs)
        if diag:
            out.append("  diagnostics " + " ".join(f"{key}: mean={m:.3f} max={x:.3f}" for key, (m, x) in diag.items()))
        out.append(f"  runs with violations: {len(bad)}")
        for r in bad[:10]:
            out.append(f"    seed {r.seed}: {'; '.join(r.violations)}")
    total = sum(1 for r in results if r.violations)
    out.append(f"TOTAL runs={len(results)} violating={total} -> {'FAIL' if total else 'PASS'}")
    return "\n".join(out) + "\n"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="drsim", description="Run data-retrieval download experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run the scenarios in a JSON config")
    run.add_argument("config")
    run.add_argument("--seeds", help="override seeds, e.g. 1..100")
    run.add_argument("--parallel", type=int, default=1, metavar="N")
    run.add_argument("--trace", action="store_true", help="write per-run JSON traces with event logs")
    run.add_argument("--no-timestamp", action="store_true")
    run.add_argument("--check", choices=CHECK_LEVELS)
    run.add_argument("--out", default=".", help="output directory")
    args = ap.parse_args(argv)

    try:
        scenarios = parse_scenario(Path(args.config).read_text())
        if args.seeds:
            seeds = parse_seeds(args.seeds)
            scenarios = [replace(sc, seeds=seeds) for sc in scenarios]
    except ScenarioError as e:
        for p in e.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    results = run_suite(scenarios, max(1, args.parallel), args.check, args.trace)
    stamp = None if args.no_timestamp else datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(results, stamp))
    summary = summary_text(scenarios, results, stamp)
    (out / "summary.txt").write_text(summary)
    if args.trace:
        for r in results:
            (out / f"trace-{r.scenario_id}-{r.seed}.json").write_text(r.trace_json)
    print(summary, end="")
    return 1 if any(r.violations for r in results) else 0


if __name__ == "__main__":
    sys.exit(main())
