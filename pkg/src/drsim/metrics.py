"""Per-execution complexity reports and their aggregation over seeds.

Q counts source queries, M counts messages (one per packet) and bits, and
T is the simulated time of the last nonfaulty termination. Faulty peers
are excluded from every measure.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field

from .engine import TICKS, ExecutionTrace

CSV_COLUMNS = ["scenario_id", "seed", "protocol", "n", "k", "f_or_beta", "adversary",
               "Q_max", "M_total", "M_bits", "T", "verdict"]
FAILURES = ("Wrong", "Deadlock", "Livelock", "Abort", "ProtocolFailure")


@dataclass(frozen=True)
class ComplexityReport:
    Q_max: int
    Q_per_peer: tuple
    M_total: int
    M_bits: int
    T: float
    verdict: str
    scenario: dict = field(default_factory=dict, compare=False)

    def row(self) -> dict:
        sc = self.scenario
        return {
            "scenario_id": sc.get("id", ""),
            "seed": sc.get("seed", ""),
            "protocol": sc.get("protocol", ""),
            "n": sc.get("n", ""),
            "k": sc.get("k", ""),
            "f_or_beta": sc.get("f", sc.get("beta", "")),
            "adversary": sc.get("adversary", ""),
            "Q_max": self.Q_max,
            "M_total": self.M_total,
            "M_bits": self.M_bits,
            "T": f"{self.T:.6f}",
            "verdict": self.verdict,
        }


def summarize(trace: ExecutionTrace) -> ComplexityReport:
    live = trace.nonfaulty()
    q = tuple(len(p.queries) for p in live)
    ends = [p.term_time for p in live if p.term_time is not None]
    return ComplexityReport(
        Q_max=max(q, default=0),
        Q_per_peer=q,
        M_total=sum(p.msgs_sent for p in live),
        M_bits=sum(p.bits_sent for p in live),
        T=max(ends, default=0) / TICKS,
        verdict=trace.verdict,
        scenario=dict(trace.scenario),
    )


def percentile(values: list, q: float) -> float:
    """Nearest-rank percentile (q in (0, 100])."""
    s = sorted(values)
    return s[max(0, math.ceil(q / 100 * len(s)) - 1)]


def aggregate(reports: list) -> dict:
    if not reports:
        raise ValueError("aggregate needs at least one report")
    qs = [r.Q_max for r in reports]
    fails = sum(1 for r in reports if r.verdict in FAILURES)
    return {
        "runs": len(reports),
        "Q_mean": sum(qs) / len(qs),
        "Q_max": max(qs),
        "Q_p95": percentile(qs, 95),
        "Q_var": sum((x - sum(qs) / len(qs)) ** 2 for x in qs) / len(qs),
        "T_mean": sum(r.T for r in reports) / len(reports),
        "failure_rate": fails / len(reports),
        "verdicts": {v: sum(1 for r in reports if r.verdict == v) for v in sorted({r.verdict for r in reports})},
        "rows": [r.row() for r in reports],
    }


def to_csv(reports: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


class CountingSource:
    """Wraps a source and counts reads per calling peer, independently of the engine."""

    def __init__(self, inner) -> None:
        self.inner = inner
        self.n = inner.n
        self.values = inner.values
        self.counts = Counter()

    def query(self, i: int, peer: int = 0):
        self.counts[peer] += 1
        return self.inner.query(i, peer)

    def query_many(self, idxs, peer: int = 0) -> list:
        self.counts[peer] += len(idxs)
        return self.inner.query_many(idxs, peer)


def double_entry_ok(trace: ExecutionTrace, source: CountingSource) -> bool:
    """Source-side counts match the per-peer query logs for every peer."""
    return all(source.counts.get(p.pid, 0) == len(p.queries) for p in trace.peers)
