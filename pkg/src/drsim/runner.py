"""Runs one (scenario, seed) pair and checks it.

Every run yields a complexity report, a list of violations (empty when the
run is fine at the requested check level) and protocol-specific
diagnostics. ``bounds`` checks correctness, the per-protocol query bounds
and the legality audits; ``full`` also records per-phase snapshots and
checks the invariants stated over them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

from . import byz_rand, crash_multi
from .adversary import BYZ_MODES, ByzantineHandler, make_adversary, byzantine_set
from .committee import CommitteeHandler, flip_report, query_cap
from .core_model import InputArray
from .crash_single import SingleCrashHandler, query_bound_single
from .engine import TICKS, ExecutionTrace, simulate, stream_rng
from .metrics import ComplexityReport, CountingSource, double_entry_ok, summarize
from .naive import NaiveHandler
from .odc import DOWNLOAD, NAIVE, make_sources, run_odc
from .scenario import BYZ_RAND, ODC, Scenario


@dataclass
class RunResult:
    scenario_id: str
    seed: int
    report: ComplexityReport
    violations: list
    diagnostics: dict = field(default_factory=dict)
    trace_json: str | None = None


def source_for(sc: Scenario, seed: int) -> InputArray:
    return InputArray.random(sc.n, stream_rng(seed, 4, 0))


def rand_params(sc: Scenario) -> byz_rand.RandParams:
    gamma = 1 - sc.beta
    if sc.protocol == "byz_multicycle":
        return byz_rand.multi_cycle_params(sc.n, sc.k, gamma, sc.beta, sc.c, sc.phi_seg, sc.threshold)
    p = byz_rand.two_cycle_params(sc.n, sc.k, gamma, sc.beta, sc.c)
    if sc.phi_seg is not None:
        p = byz_rand.with_segment(p, sc.phi_seg)
    return p


def run_one(sc: Scenario, seed: int, check: str | None = None, trace: bool = False) -> RunResult:
    check = check or sc.check
    if sc.protocol in ODC:
        return _run_odc(sc, seed, check, trace)
    x = source_for(sc, seed)
    src = CountingSource(x)
    full = check == "full"
    adv_name = sc.adversary.get("name")
    byz = set(byzantine_set(sc.k, sc.byz_count, seed, sc.adversary)) if sc.byz_count else set()
    adv = make_adversary(sc.adversary, sc.k, sc.f if sc.protocol.startswith("crash") else 0, seed)
    randomized = sc.protocol in BYZ_RAND
    diag: dict = {}
    if sc.protocol == "crash1":
        hs = {p: SingleCrashHandler(sc.n, sc.k) for p in range(1, sc.k + 1)}
    elif sc.protocol in ("crashF", "crashF_opt"):
        variant = crash_multi.TIME_OPTIMIZED if sc.protocol == "crashF_opt" else crash_multi.PLAIN
        hs = {p: crash_multi.MultiCrashHandler(sc.n, sc.k, sc.f, variant, check) for p in range(1, sc.k + 1)}
    elif sc.protocol == "byz_committee":
        hs = {}
        for p in range(1, sc.k + 1):
            h = CommitteeHandler(sc.n, sc.k, sc.f, sc.phi)
            hs[p] = ByzantineHandler(h, BYZ_MODES[adv_name], flip_report()) if p in byz else h
    elif sc.protocol in BYZ_RAND:
        params = rand_params(sc)
        diag["premise_margin"] = params.premise_margin()
        hs = {}
        for p in range(1, sc.k + 1):
            if p in byz and adv_name == "byz_flood":
                hs[p] = byz_rand.FloodHandler(params, x.values, plan_seed=seed)
            elif p in byz and adv_name in BYZ_MODES:
                hs[p] = ByzantineHandler(byz_rand.RandHandler(params), BYZ_MODES[adv_name], byz_rand.flip_segment)
            else:
                hs[p] = byz_rand.RandHandler(params)
    else:
        hs = {p: NaiveHandler(sc.n) for p in range(1, sc.k + 1)}
    tr = simulate(sc.k, src, hs, adv, phi=sc.phi, randomized=randomized, seed=seed, byzantine=byz,
                  collect_snapshots=check != "off", record_events=trace, scenario=sc.echo(seed))
    report = summarize(tr)
    violations = []
    if check != "off":
        violations += _common_checks(sc, tr, src)
        if sc.protocol == "crash1":
            violations += _check_single(sc, tr, full)
        elif sc.protocol in ("crashF", "crashF_opt"):
            violations += _check_multi(sc, tr, hs, full, diag)
        elif sc.protocol == "byz_committee":
            if report.Q_max > query_cap(sc.n, sc.k, sc.f):
                violations.append(f"query cap: Q_max {report.Q_max} > {query_cap(sc.n, sc.k, sc.f)}")
        elif sc.protocol in BYZ_RAND:
            violations += _check_rand(sc, tr, hs, byz, full, diag)
        elif report.Q_max > sc.n:
            violations.append("naive protocol queried more than n cells")
    return RunResult(sc.id, seed, report, violations, diag, tr.to_json() if trace else None)


def _common_checks(sc, tr: ExecutionTrace, src) -> list:
    out = []
    if tr.verdict != "Correct" and not (sc.protocol in BYZ_RAND and tr.verdict == "ProtocolFailure"):
        out.append(f"verdict {tr.verdict}" + (f": {tr.error}" if tr.error else ""))
    crashed = sum(1 for p in tr.peers if p.crashed)
    if crashed > sc.f and sc.protocol.startswith("crash"):
        out.append(f"crash budget: {crashed} peers crashed, f = {sc.f}")
    if not tr.audits["cycle_contract"]:
        out.append("cycle contract audit failed")
    if not tr.audits["crash_legality"]:
        out.append("crash legality audit failed")
    if not double_entry_ok(tr, src):
        out.append("query accounting mismatch between source and peer logs")
    return out


def _check_single(sc, tr, full) -> list:
    out = []
    bound = query_bound_single(sc.n, sc.k)
    q = max((len(p.queries) for p in tr.nonfaulty()), default=0)
    if q > bound:
        out.append(f"query bound: Q_max {q} > {bound}")
    if full:
        live = {p.pid for p in tr.nonfaulty()}
        s3 = {}
        for pid, kind, d in tr.snapshots:
            if kind == "stage3" and pid in live:
                s3.setdefault(d["phase"], []).append(d)
        for phase, ds in s3.items():
            for a, b in combinations(ds, 2):
                if not set(a["evidence"]) & set(b["evidence"]):
                    out.append(f"overlap: disjoint stage-3 evidence in phase {phase}")
                if a["lacking"] and b["lacking"] and a["jf"] != b["jf"]:
                    out.append(f"overlap: lacking peers disagree on the missing peer in phase {phase}")
    return out


def coherence_gaps(tr: ExecutionTrace) -> int:
    """Cells that two nonfaulty peers both lack at a phase start but assign to different owners."""
    live = {p.pid for p in tr.nonfaulty()}
    by_phase: dict = {}
    for pid, kind, d in tr.snapshots:
        if kind == "phase" and pid in live and "sigma" in d:
            by_phase.setdefault(d["phase"], []).append(d["sigma"])
    gaps = 0
    for sigmas in by_phase.values():
        for a, b in combinations(sigmas, 2):
            gaps += sum(1 for i in a.keys() & b.keys() if a[i] != b[i])
    return gaps


def _check_multi(sc, tr, hs, full, diag) -> list:
    out = []
    n, k, f = sc.n, sc.k, sc.f
    bound = crash_multi.query_bound_multi(n, k, f)
    P = crash_multi.phase_limit(n, k, f)
    live = [p for p in tr.peers if p.nonfaulty]
    q = max((len(p.queries) for p in live), default=0)
    if q > bound:
        out.append(f"query bound: Q_max {q} > {bound}")
    runs = max((hs[p.pid].phases_run for p in live), default=0)
    if runs > P:
        out.append(f"phase count {runs} > {P}")
    diag["phases"] = runs
    diag["extra_queries"] = max((hs[p.pid].extra_queries for p in live), default=0)
    live_ids = {p.pid for p in live}
    for pid, kind, d in tr.snapshots:
        if kind == "phase" and pid in live_ids and d["unknown"] * k ** d["phase"] > n * f ** d["phase"]:
            out.append(f"unknown cells: peer {pid} has {d['unknown']} at phase {d['phase']}, "
                       f"bound {n * (f / k) ** d['phase']:.1f}")
    if full:
        diag["coherence_gaps"] = coherence_gaps(tr)
    return out


def premise_holds(params, tr: ExecutionTrace, byz: set) -> bool:
    """Every segment of every cycle was picked by at least t honest heard-from peers, at every peer."""
    honest = {p.pid for p in tr.peers if not p.byzantine}
    live = {p.pid for p in tr.nonfaulty()}
    seen = False
    for pid, kind, d in tr.snapshots:
        if kind != "heard" or pid not in live:
            continue
        seen = True
        i = d["cycle"]
        t = params.t if params.mode == byz_rand.TWO_CYCLE else params.t_at(i)
        for l in range(1, params.K_at(i) + 1):
            if sum(1 for s in d["picks"].get(l, []) if s in honest) < t:
                return False
    return seen or params.query_all


def _check_rand(sc, tr, hs, byz, full, diag) -> list:
    out = []
    params = rand_params(sc)
    live = [p for p in tr.peers if p.nonfaulty]
    if params.mode == byz_rand.TWO_CYCLE and not params.query_all:
        cap = params.phi_seg + math.ceil(sc.k / params.t)
        q = max((len(p.queries) for p in live), default=0)
        if q > cap:
            out.append(f"query bound: Q_max {q} > phi_seg + ceil(k/t) = {cap}")
    if params.mode == byz_rand.MULTI_CYCLE and tr.verdict == "Correct":
        want = list(range(params.cycles))
        if tr.audits["cycles"] != want:
            out.append(f"cycle count: ran {tr.audits['cycles']}, expected {want}")
    held = premise_holds(params, tr, byz)
    diag["premise"] = held
    if held and tr.verdict != "Correct":
        out.append(f"conditional correctness: premise held but verdict {tr.verdict}")
    det = {}
    for p in live:
        for c, v in hs[p.pid].det_queries.items():
            det.setdefault(c, []).append(v)
    diag["det_queries"] = {c: sum(v) / len(live) for c, v in sorted(det.items())}
    return out


def _run_odc(sc: Scenario, seed: int, check: str, trace: bool = False) -> RunResult:
    data = make_sources(sc.m, sc.n, sc.beta_d, seed, sc.w, sc.source_modes)
    mode = NAIVE if sc.protocol == "odc_naive" else DOWNLOAD
    res = run_odc(data, sc.k, sc.beta_d, mode, seed, sc.f_peers, record_events=trace)
    live = sorted(res.res) or [p.pid for p in res.traces[0].nonfaulty()]
    q = {p: sum(len(tr.peers[p - 1].queries) for tr in res.traces) for p in live}
    rep = ComplexityReport(
        Q_max=max(q.values(), default=0),
        Q_per_peer=tuple(q[p] for p in live),
        M_total=sum(tr.peers[p - 1].msgs_sent for tr in res.traces for p in live),
        M_bits=sum(tr.peers[p - 1].bits_sent for tr in res.traces for p in live),
        T=sum(max((tr.peers[p - 1].term_time or 0) for p in live) for tr in res.traces) / TICKS,
        verdict="Correct" if res.in_range else "Wrong",
        scenario=sc.echo(seed),
    )
    violations = [] if res.in_range or check == "off" else ["median left the honest range or a download failed"]
    doc = "[" + ",".join(tr.to_json() for tr in res.traces) + "]" if trace else None
    return RunResult(sc.id, seed, rep, violations, {"total_queries": res.total_queries}, doc)
