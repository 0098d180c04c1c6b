"""Deterministic discrete-event simulator for the asynchronous retrieval model.

Time is kept in integer microseconds; one time unit (the largest latency the
adversary may assign) is 10**6 ticks. Events are ordered by (time, sequence)
with the sequence counter assigned at insertion.

Protocols are written as per-peer handler objects. The engine hands each one
a ``PeerNet`` facade through which it sends, queries the source, terminates,
and announces cycle boundaries and stage marks.
"""
from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .core_model import ExecutionAbort

TICKS = 1_000_000

START, DELIVER, CRASH, TIMER = 0, 1, 2, 3


class DeadlockDetected(RuntimeError):
    """Live peers are blocked, nothing is in flight and nothing is held."""


class LivelockGuard(RuntimeError):
    """The event budget ran out before every nonfaulty peer terminated."""


class ConfigError(ValueError):
    pass


class _Crashed(Exception):
    """Unwinds a handler whose peer crashed in the middle of a step."""


def to_ticks(latency: float) -> int:
    t = int(round(latency * TICKS))
    if t < 1:
        return 1
    return TICKS if t > TICKS else t


def stream_rng(seed: int, stream: int, pid: int = 0) -> random.Random:
    """Independent generator for (seed, stream, peer), via numpy's SeedSequence."""
    state = np.random.SeedSequence([seed, stream, pid]).generate_state(2)
    return random.Random(int(state[0]) << 32 | int(state[1]))


class Handler:
    """Base class for per-peer protocol logic."""

    # Keep receiving after output (used where late requests must still be answered).
    serves_after_termination = False

    def start(self, net: "PeerNet") -> None:
        pass

    def receive(self, net: "PeerNet", src: int, msg: Any) -> None:
        pass

    def timer(self, net: "PeerNet", token: Any) -> None:
        pass


@dataclass
class Envelope:
    sender: int
    receiver: int
    payload: Any
    bit_size: int
    send_time: int
    cycle: int
    packets: int


@dataclass
class PeerRecord:
    pid: int
    queries: list = field(default_factory=list)
    msgs_sent: int = 0
    bits_sent: int = 0
    msgs_received: int = 0
    output: Any = None
    term_time: int | None = None
    failed: str | None = None
    crashed: bool = False
    crash_time: int | None = None
    byzantine: bool = False
    cycle: int = -1

    @property
    def nonfaulty(self) -> bool:
        return not (self.crashed or self.byzantine)

    @property
    def done(self) -> bool:
        return self.term_time is not None


@dataclass
class ExecutionTrace:
    scenario: dict
    peers: list
    verdict: str
    events: int
    end_time: int
    snapshots: list
    audits: dict
    event_log: list | None = None
    error: str | None = None

    def nonfaulty(self) -> list:
        return [p for p in self.peers if p.nonfaulty]

    def to_json(self) -> str:
        doc = {
            "scenario": self.scenario,
            "verdict": self.verdict,
            "error": self.error,
            "events": self.events,
            "end_time": self.end_time / TICKS,
            "audits": self.audits,
            "peers": [
                {
                    "id": p.pid,
                    "output": _render(p.output),
                    "queries": p.queries,
                    "msgs_sent": p.msgs_sent,
                    "bits_sent": p.bits_sent,
                    "msgs_received": p.msgs_received,
                    "term_time": None if p.term_time is None else p.term_time / TICKS,
                    "crashed": p.crashed,
                    "crash_time": None if p.crash_time is None else p.crash_time / TICKS,
                    "byzantine": p.byzantine,
                    "failed": p.failed,
                }
                for p in self.peers
            ],
            "snapshots": [[pid, kind, _render(data)] for pid, kind, data in self.snapshots],
        }
        if self.event_log is not None:
            doc["event_log"] = self.event_log
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _render(value: Any) -> Any:
    if value is None or isinstance(value, (int, float, str, bool)):
        return value
    if isinstance(value, dict):
        return {str(k): _render(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (set, frozenset)):
        return sorted(_render(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_render(v) for v in value]
    return str(value)


class PeerNet:
    """What one peer can do. All calls are attributed to ``pid``."""

    __slots__ = ("pid", "k", "n", "rng", "_eng", "_rec", "checking")

    def __init__(self, engine: "Engine", pid: int, rng: random.Random) -> None:
        self._eng = engine
        self.pid = pid
        self.k = engine.k
        self.n = engine.n
        self.rng = rng
        self._rec = engine.peers[pid]
        self.checking = engine.collect_snapshots

    @property
    def now(self) -> float:
        return self._eng.now / TICKS

    def send(self, dst: int, msg: Any, bits: int) -> None:
        self._eng.send(self.pid, dst, msg, bits)

    def broadcast(self, msg: Any, bits: int, include_self: bool = False) -> None:
        self._eng.broadcast(self.pid, msg, bits, include_self)

    def query(self, i: int) -> int:
        return self._eng.query(self.pid, i)

    def query_many(self, idxs) -> list:
        return self._eng.query_many(self.pid, idxs)

    def terminate(self, output: Any) -> None:
        self._eng.terminate(self.pid, output)

    def fail(self, reason: str, output: Any = None) -> None:
        """Terminate with a protocol-failure verdict (randomized protocols)."""
        self._rec.failed = reason
        self._eng.terminate(self.pid, output)

    def begin_cycle(self, r: int) -> None:
        self._eng.begin_cycle(self.pid, r)

    def mark(self, label: str) -> None:
        self._eng.mark(self.pid, label)

    def snapshot(self, kind: str, data: Any) -> None:
        if self.checking:
            self._eng.snapshots.append((self.pid, kind, data))

    def after(self, delay: float, token: Any) -> None:
        self._eng.schedule(self._eng.now + max(1, int(round(delay * TICKS))), TIMER, self.pid, token, None)

    @property
    def terminated(self) -> bool:
        return self._rec.term_time is not None


class Engine:
    def __init__(
        self,
        k: int,
        source,
        handlers: dict,
        adversary,
        phi: int = 512,
        randomized: bool = False,
        seed: int = 0,
        byzantine: set | frozenset = frozenset(),
        max_events: int = 10**7,
        collect_snapshots: bool = False,
        record_events: bool = False,
    ) -> None:
        if phi < 1:
            raise ConfigError("message cap must be at least 1 bit")
        self.k = k
        self.source = source
        self.n = source.n
        self.phi = phi
        self.adv = adversary
        self.randomized = randomized
        self.max_events = max_events
        self.collect_snapshots = collect_snapshots
        self.now = 0
        self.seq = 0
        self.heap: list = []
        self.events = 0
        self.peers = [None] + [PeerRecord(pid) for pid in range(1, k + 1)]
        for pid in byzantine:
            self.peers[pid].byzantine = True
        self.handlers = handlers
        self.nets = [None] + [PeerNet(self, pid, stream_rng(seed, 1, pid)) for pid in range(1, k + 1)]
        self.link_free: dict = {}
        self.held: list[Envelope] = []
        self.snapshots: list = []
        self.event_log: list | None = [] if record_events else None
        # audit bookkeeping
        self.cycle_lat: dict[int, list] = {}
        self.cycle_oracle: dict[int, tuple] = {}
        self.cycle_first_start: dict[int, tuple] = {}
        self.cycle_violations = 0
        self.crash_log: list[dict] = []
        self.pending_crash: set[int] = set()
        self.sends_since: dict[int, int] = {}
        self.pending_live = sum(1 for p in self.peers[1:] if p.nonfaulty)
        adversary.bind(self)

    # -- scheduling -------------------------------------------------------
    def schedule(self, time: int, kind: int, pid: int, a: Any, b: Any, c: int = -1) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, self.seq, kind, pid, a, b, c))

    # -- peer operations --------------------------------------------------
    def query(self, pid: int, i: int) -> int:
        rec = self.peers[pid]
        if rec.crashed:
            raise _Crashed()
        rec.queries.append(i)
        return self.source.query(i, pid)

    def query_many(self, pid: int, idxs) -> list:
        rec = self.peers[pid]
        if rec.crashed:
            raise _Crashed()
        idxs = list(idxs)
        if not idxs:
            return []
        if min(idxs) < 1 or max(idxs) > self.n:
            raise ExecutionAbort(f"query index out of range 1..{self.n}")
        rec.queries.extend(idxs)
        return self.source.query_many(idxs, pid)

    def broadcast(self, src: int, msg: Any, bits: int, include_self: bool = False) -> None:
        if self.adv.holds or src in self.sends_since:
            # slow path keeps hold and mid-send crash semantics per message
            for dst in range(1, self.k + 1):
                if dst != src or include_self:
                    self.send(src, dst, msg, bits)
            return
        rec = self.peers[src]
        if rec.crashed:
            raise _Crashed()
        npk = 1 if bits <= self.phi else -(-bits // self.phi)
        cycle = rec.cycle
        dispatch = self._dispatch
        count = 0
        for dst in range(1, self.k + 1):
            if dst == src:
                if include_self:
                    count += 1
                    self.schedule(self.now, DELIVER, dst, src, msg, cycle)
                continue
            count += 1
            dispatch(src, dst, msg, npk, cycle)
        rec.msgs_sent += npk * count
        rec.bits_sent += bits * count

    def send(self, src: int, dst: int, msg: Any, bits: int) -> None:
        rec = self.peers[src]
        if rec.crashed:
            raise _Crashed()
        budget = self.sends_since.get(src)
        if budget is not None:
            if budget <= 0:
                self._crash(src, boundary=False, how="midsend")
                raise _Crashed()
            self.sends_since[src] = budget - 1
        if bits <= self.phi:
            npk = 1
        else:
            npk = -(-bits // self.phi)
        rec.msgs_sent += npk
        rec.bits_sent += bits
        cycle = rec.cycle
        if dst == src:
            self.schedule(self.now, DELIVER, dst, src, msg, cycle)
            return
        adv = self.adv
        if adv.holds and adv.hold(src, dst, msg, self.now):
            self.held.append(Envelope(src, dst, msg, bits, self.now, cycle, npk))
            return
        self._dispatch(src, dst, msg, npk, cycle)

    def _dispatch(self, src: int, dst: int, msg: Any, npk: int, cycle: int) -> None:
        key = src * 4096 + dst
        t = self.link_free.get(key, 0)
        if t < self.now:
            t = self.now
        if self.randomized and cycle >= 0:
            lat = self.cycle_lat[cycle][src - 1][dst - 1]
            t += lat * npk
        else:
            latency = self.adv.latency
            for _ in range(npk):
                t += to_ticks(latency(src, dst, self.now))
        self.link_free[key] = t
        self.schedule(t, DELIVER, dst, src, msg, cycle)

    def terminate(self, pid: int, output: Any) -> None:
        rec = self.peers[pid]
        if rec.term_time is not None:
            return
        rec.term_time = self.now
        rec.output = output
        if rec.nonfaulty:
            self.pending_live -= 1
        if self.event_log is not None:
            self.event_log.append([self.now, "terminate", pid])
        if self.held:
            release = self.adv.on_terminate(pid, self.held)
            if release:
                self._release(release)

    def begin_cycle(self, pid: int, r: int) -> None:
        rec = self.peers[pid]
        if r not in self.cycle_lat:
            mat = self.adv.cycle_latencies(r, self.k)
            self.cycle_lat[r] = [[to_ticks(x) for x in row] for row in mat]
            self.cycle_oracle[r] = (self.now, self.seq)
        if r not in self.cycle_first_start:
            self.cycle_first_start[r] = (self.now, self.seq)
        if pid in self.pending_crash or self.adv.crash_at_cycle(pid, r):
            self.pending_crash.discard(pid)
            self._crash(pid, boundary=True, how=f"cycle{r}")
            raise _Crashed()
        rec.cycle = r

    def mark(self, pid: int, label: str) -> None:
        adv = self.adv
        if adv.crash_at_mark(pid, label):
            self._crash(pid, boundary=False, how=label)
            raise _Crashed()
        budget = adv.midsend_budget(pid, label)
        if budget is not None:
            self.sends_since[pid] = budget

    # -- crashes and holds -------------------------------------------------
    def _crash(self, pid: int, boundary: bool, how: str) -> None:
        rec = self.peers[pid]
        if rec.crashed or rec.term_time is not None:
            return
        if rec.nonfaulty:
            self.pending_live -= 1
        rec.crashed = True
        rec.crash_time = self.now
        self.crash_log.append({"peer": pid, "time": self.now, "boundary": boundary, "how": how})
        if self.event_log is not None:
            self.event_log.append([self.now, "crash", pid, how])

    def _release(self, envs: list) -> None:
        ids = {id(e) for e in envs}
        self.held = [e for e in self.held if id(e) not in ids]
        for e in envs:
            self._dispatch(e.sender, e.receiver, e.payload, e.packets, e.cycle)

    def quiescence_release(self) -> list:
        """Force the adversary to let go of at least one held envelope."""
        if not self.held:
            raise DeadlockDetected("peers blocked with no pending or held messages")
        chosen = list(self.adv.release_choice(list(self.held)))
        if not chosen:
            chosen = [self.held[0]]
        self._release(chosen)
        return chosen

    # -- main loop ----------------------------------------------------------
    def _invoke(self, pid: int, fn: Callable, *args) -> None:
        try:
            fn(self.nets[pid], *args)
        except _Crashed:
            pass

    def run(self) -> None:
        for pid in range(1, self.k + 1):
            self.schedule(0, START, pid, None, None)
        for pid, t in sorted(self.adv.crash_times().items()):
            self.schedule(to_ticks(t) if t > 0 else 0, CRASH, pid, None, None)
        peers = self.peers
        handlers = self.handlers
        nets = self.nets
        heap = self.heap
        pop = heapq.heappop
        log = self.event_log
        while self.pending_live > 0:
            if not heap:
                self.quiescence_release()
                continue
            time, _, kind, pid, a, b, c = pop(heap)
            self.now = time
            self.events += 1
            if self.events > self.max_events:
                raise LivelockGuard(f"event budget {self.max_events} exhausted")
            rec = peers[pid]
            if rec.crashed:
                continue
            if kind == DELIVER:
                if c >= 0 and self.randomized:
                    oracle = self.cycle_oracle.get(c)
                    if oracle is None or oracle[0] > time:
                        self.cycle_violations += 1
                if rec.term_time is not None and not handlers[pid].serves_after_termination:
                    continue
                rec.msgs_received += 1
                if log is not None:
                    log.append([time, "deliver", pid, a])
                try:
                    handlers[pid].receive(nets[pid], a, b)
                except _Crashed:
                    pass
            elif kind == START:
                try:
                    self.mark(pid, "start")
                    handlers[pid].start(nets[pid])
                except _Crashed:
                    pass
            elif kind == CRASH:
                if self.randomized:
                    self.pending_crash.add(pid)
                else:
                    self._crash(pid, boundary=False, how="time")
            elif kind == TIMER:
                if rec.term_time is None or handlers[pid].serves_after_termination:
                    try:
                        handlers[pid].timer(nets[pid], a)
                    except _Crashed:
                        pass
        if self.held:
            self._release(list(self.held))

    def audits(self) -> dict:
        ok_cycle = self.cycle_violations == 0 and all(
            self.cycle_oracle[r] <= self.cycle_first_start[r] for r in self.cycle_first_start
        )
        crash_ok = all(c["boundary"] for c in self.crash_log) if self.randomized else True
        return {
            "cycle_contract": ok_cycle,
            "crash_legality": crash_ok,
            "crashes": self.crash_log,
            "cycles": sorted(self.cycle_first_start),
        }


def simulate(
    k: int,
    source,
    handlers: dict,
    adversary,
    *,
    phi: int = 512,
    randomized: bool = False,
    seed: int = 0,
    byzantine=frozenset(),
    max_events: int = 10**7,
    collect_snapshots: bool = False,
    record_events: bool = False,
    scenario: dict | None = None,
    expected: Callable | None = None,
) -> ExecutionTrace:
    """Run one execution and package it, turning engine errors into verdicts.

    ``expected(output) -> bool`` decides correctness of nonfaulty outputs;
    by default an output must equal the source's values.
    """
    eng = Engine(
        k, source, handlers, adversary, phi=phi, randomized=randomized, seed=seed,
        byzantine=set(byzantine), max_events=max_events,
        collect_snapshots=collect_snapshots, record_events=record_events,
    )
    verdict, error = None, None
    try:
        eng.run()
    except DeadlockDetected as e:
        verdict, error = "Deadlock", str(e)
    except LivelockGuard as e:
        verdict, error = "Livelock", str(e)
    except ExecutionAbort as e:
        verdict, error = "Abort", str(e)
    if verdict is None:
        check = expected or (lambda out: out is not None and tuple(out) == tuple(source.values))
        live = [p for p in eng.peers[1:] if p.nonfaulty]
        if any(p.failed for p in live):
            verdict = "ProtocolFailure"
        elif all(check(p.output) for p in live):
            verdict = "Correct"
        else:
            verdict = "Wrong"
    return ExecutionTrace(
        scenario=scenario or {},
        peers=eng.peers[1:],
        verdict=verdict,
        events=eng.events,
        end_time=eng.now,
        snapshots=eng.snapshots,
        audits=eng.audits(),
        event_log=eng.event_log,
        error=error,
    )
