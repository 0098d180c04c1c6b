"""Adversary strategies: latency schedules, crash plans, message holds,
Byzantine peer behaviours, and the delayed-set / replay attack.

A strategy is bound to one engine. The engine consults it for every
latency, asks it which envelopes to hold, tells it when peers terminate,
and forces it to release something whenever the system would otherwise
stall (quiescence).
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable

from .engine import ConfigError, Handler, PeerNet, stream_rng


# --- latency models --------------------------------------------------------

class Latency:
    def __call__(self, src: int, dst: int, now: int) -> float:
        raise NotImplementedError


@dataclass
class UniformLatency(Latency):
    d: float = 1.0

    def __post_init__(self) -> None:
        if not (0 < self.d <= 1):
            raise ConfigError("uniform latency must lie in (0, 1]")

    def __call__(self, src, dst, now):
        return self.d


class RandomLatency(Latency):
    """Independent uniform latencies in (0, 1]."""

    def __init__(self, rng: random.Random) -> None:
        self.rng = rng

    def __call__(self, src, dst, now):
        return 1.0 - self.rng.random()


class Adversary:
    """Benign defaults: constant latency 1, no crashes, no holds."""

    holds = False
    name = "uniform"

    def __init__(self, latency: Latency | None = None, seed: int = 0) -> None:
        self.latency_model = latency or UniformLatency(1.0)
        self.seed = seed
        self.engine = None

    def bind(self, engine) -> None:
        self.engine = engine
        self.k = engine.k

    def latency(self, src: int, dst: int, now: int) -> float:
        return self.latency_model(src, dst, now)

    def cycle_latencies(self, r: int, k: int) -> list:
        # Fixed for the whole cycle before any peer starts it.
        lat = self.latency_model
        return [[lat(s, d, -1) for d in range(1, k + 1)] for s in range(1, k + 1)]

    def hold(self, src: int, dst: int, msg: Any, now: int) -> bool:
        return False

    def on_terminate(self, pid: int, held: list) -> list:
        return []

    def release_choice(self, held: list) -> list:
        return held[:1]

    def crash_times(self) -> dict:
        return {}

    def crash_at_mark(self, pid: int, label: str) -> bool:
        return False

    def midsend_budget(self, pid: int, label: str):
        return None

    def crash_at_cycle(self, pid: int, r: int) -> bool:
        return False

    def crash_budget(self) -> set:
        """Peers this strategy may crash (audited against f)."""
        return set()


class CrashPlan(Adversary):
    """Crashes by time, at named stage marks, or after j sends following a mark."""

    name = "crash_plan"

    def __init__(
        self,
        latency: Latency | None = None,
        at_time: dict | None = None,
        at_mark: dict | None = None,
        midsend: dict | None = None,
        at_cycle: dict | None = None,
        seed: int = 0,
    ) -> None:
        super().__init__(latency, seed)
        self.at_time = dict(at_time or {})
        self.at_mark = {p: set([v] if isinstance(v, str) else v) for p, v in (at_mark or {}).items()}
        # pid -> (label, j): crash when sending the (j+1)-th message after mark ``label``
        self.midsend = dict(midsend or {})
        self.at_cycle = dict(at_cycle or {})

    def crash_times(self):
        return dict(self.at_time)

    def crash_at_mark(self, pid, label):
        return label in self.at_mark.get(pid, ())

    def midsend_budget(self, pid, label):
        plan = self.midsend.get(pid)
        if plan is not None and plan[0] == label:
            return plan[1]
        return None

    def crash_at_cycle(self, pid, r):
        return self.at_cycle.get(pid) == r

    def crash_budget(self):
        return set(self.at_time) | set(self.at_mark) | set(self.midsend) | set(self.at_cycle)


class SlowestPeer(CrashPlan):
    """Hold everything sent by peers in S until a peer terminates (or forever).

    ``until`` is a peer id whose termination releases the held messages, the
    string "any" for the first termination, or None to rely on quiescence.
    """

    name = "slowest_peer"
    holds = True

    def __init__(self, slow: set, until=None, **kw) -> None:
        super().__init__(**kw)
        self.slow = set(slow)
        self.until = until
        self.released = False

    def hold(self, src, dst, msg, now):
        return not self.released and src in self.slow

    def on_terminate(self, pid, held):
        if self.until == "any" or self.until == pid:
            self.released = True
            return list(held)
        return []


# --- Byzantine behaviours ---------------------------------------------------

class _ProxyNet:
    """Wraps a PeerNet so a Byzantine handler can rewrite outgoing traffic."""

    def __init__(self, net: PeerNet, rewrite: Callable) -> None:
        self._net = net
        self._rewrite = rewrite
        self.pid = net.pid
        self.k = net.k
        self.n = net.n
        self.rng = net.rng
        self.checking = False

    def __getattr__(self, name):
        return getattr(self._net, name)

    def send(self, dst, msg, bits):
        out = self._rewrite(dst, msg)
        if out is not None:
            self._net.send(dst, out, bits)

    def broadcast(self, msg, bits, include_self=False):
        for dst in range(1, self.k + 1):
            if dst != self.pid or include_self:
                self.send(dst, msg, bits)

    def snapshot(self, kind, data):
        pass


class ByzantineHandler(Handler):
    """Runs an honest handler but lies in its outgoing messages.

    ``corrupt(msg) -> msg`` is the protocol's notion of a flipped report.
    Modes: flip (always lie), equivocate (lie to even receivers only),
    silent (send nothing).
    """

    def __init__(self, inner: Handler, mode: str, corrupt: Callable) -> None:
        if mode not in ("flip", "equivocate", "silent"):
            raise ConfigError(f"unknown Byzantine mode {mode!r}")
        self.inner = inner
        self.mode = mode
        self.corrupt = corrupt
        self._proxy = None

    def _rewrite(self, dst, msg):
        if self.mode == "silent":
            return None
        if self.mode == "flip" or dst % 2 == 0:
            return self.corrupt(msg)
        return msg

    def _p(self, net):
        if self._proxy is None:
            self._proxy = _ProxyNet(net, self._rewrite)
        return self._proxy

    def start(self, net):
        if self.mode != "silent":
            self.inner.start(self._p(net))

    def receive(self, net, src, msg):
        if self.mode != "silent":
            self.inner.receive(self._p(net), src, msg)

    def timer(self, net, token):
        if self.mode != "silent":
            self.inner.timer(self._p(net), token)


class ReplayHandler(Handler):
    """Re-sends a recorded message log at the recorded times, ignoring input."""

    def __init__(self, log: list) -> None:
        # log entries: (send_time_ticks, dst, msg, bits)
        self.log = sorted(log, key=lambda e: e[0])

    def start(self, net):
        for idx, (t, dst, msg, bits) in enumerate(self.log):
            if t <= 0:
                net.send(dst, msg, bits)
            else:
                net.after(t / 1_000_000, idx)

    def timer(self, net, idx):
        _, dst, msg, bits = self.log[idx]
        net.send(dst, msg, bits)


class RecordingHandler(Handler):
    """Passes through to ``inner`` and records everything it sends."""

    def __init__(self, inner: Handler) -> None:
        self.inner = inner
        self.log: list = []
        self.serves_after_termination = inner.serves_after_termination

    def _wrap(self, net):
        rec = self

        class _Rec(_ProxyNet):
            def send(self_, dst, msg, bits):
                rec.log.append((net._eng.now, dst, msg, bits))
                net.send(dst, msg, bits)

        p = _Rec(net, lambda d, m: m)
        p.checking = net.checking
        return p

    def start(self, net):
        self.inner.start(self._wrap(net))

    def receive(self, net, src, msg):
        self.inner.receive(self._wrap(net), src, msg)

    def timer(self, net, token):
        self.inner.timer(self._wrap(net), token)


# --- the delayed-set / replay attack -----------------------------------------

class DelayedSetAttack(Adversary):
    """Holds all traffic from R until ``target`` terminates, then releases it.

    The corrupted set F is realised by the caller, which installs
    ``ReplayHandler`` instances built from a reference run on the all-zeros
    input in which R crashed at the start.
    """

    name = "delayed_set"
    holds = True

    def __init__(self, target: int, delayed: set, corrupted: set) -> None:
        super().__init__(UniformLatency(1.0))
        if delayed & corrupted:
            raise ConfigError("delayed and corrupted sets must be disjoint")
        if target in delayed | corrupted:
            raise ConfigError("target must be outside the delayed and corrupted sets")
        self.target = target
        self.delayed = set(delayed)
        self.corrupted = set(corrupted)
        self.released = False

    def hold(self, src, dst, msg, now):
        return not self.released and src in self.delayed

    def on_terminate(self, pid, held):
        if pid == self.target:
            self.released = True
            return list(held)
        return []


# --- catalog -------------------------------------------------------------------

BYZ_MODES = {"byz_flip": "flip", "byz_equivocate": "equivocate", "byz_silent": "silent"}


def make_latency(spec, seed: int) -> Latency:
    if spec is None or spec == "seeded_random":
        return RandomLatency(stream_rng(seed, 0, 0))
    if isinstance(spec, (int, float)):
        return UniformLatency(float(spec))
    if isinstance(spec, dict):
        name = spec.get("name", "seeded_random")
        if name == "uniform":
            return UniformLatency(float(spec.get("d", 1.0)))
        if name == "seeded_random":
            return RandomLatency(stream_rng(seed, 0, 0))
    if spec == "uniform" or spec == "max":
        return UniformLatency(1.0)
    raise ConfigError(f"unknown latency model {spec!r}")


def random_crash(k: int, f: int, seed: int, horizon: float = 8.0, marks: list | None = None) -> CrashPlan:
    """Seeded random adversary: random latencies and up to f crashes.

    Each victim crashes either at a random time in (0, horizon] or after a
    random number of sends (which exercises crashes in the middle of a
    broadcast).
    """
    rng = stream_rng(seed, 2, 0)
    victims = rng.sample(range(1, k + 1), rng.randint(0, f)) if f > 0 else []
    at_time, midsend = {}, {}
    for v in victims:
        if rng.random() < 0.5:
            at_time[v] = rng.uniform(0.0, horizon)
        else:
            midsend[v] = ("start", rng.randint(0, 3 * k))
    return CrashPlan(RandomLatency(stream_rng(seed, 0, 0)), at_time=at_time, midsend=midsend, seed=seed)


def builtin_strategies() -> dict:
    """Named adversary factories. Each takes (params, k, f, seed)."""

    def uniform(p, k, f, seed):
        return Adversary(UniformLatency(float(p.get("d", 1.0))), seed)

    def seeded_random(p, k, f, seed):
        return Adversary(RandomLatency(stream_rng(seed, 0, 0)), seed)

    def slowest_peer(p, k, f, seed):
        return SlowestPeer(set(p.get("S", [k])), p.get("until"), latency=make_latency(p.get("latency"), seed), seed=seed)

    def crash_midsend(p, k, f, seed):
        return CrashPlan(
            make_latency(p.get("latency", "uniform"), seed),
            midsend={int(p["peer"]): (p.get("label", "start"), int(p["after"]))},
            seed=seed,
        )

    def crash_at(p, k, f, seed):
        return CrashPlan(
            make_latency(p.get("latency", "uniform"), seed),
            at_mark={int(p["peer"]): p["label"]},
            seed=seed,
        )

    def crash_random(p, k, f, seed):
        return random_crash(k, int(p.get("f", f)), seed, float(p.get("horizon", 8.0)))

    def byz(p, k, f, seed):
        # Byzantine behaviour is installed on handlers; the network part is latencies.
        return Adversary(make_latency(p.get("latency"), seed), seed)

    return {
        "uniform": uniform,
        "seeded_random": seeded_random,
        "slowest_peer": slowest_peer,
        "crash_midsend": crash_midsend,
        "crash_at": crash_at,
        "random_crash": crash_random,
        "byz_flip": byz,
        "byz_equivocate": byz,
        "byz_silent": byz,
        "byz_flood": byz,
    }


def make_adversary(spec: dict, k: int, f: int, seed: int) -> Adversary:
    name = spec.get("name")
    table = builtin_strategies()
    if name not in table:
        raise ConfigError(f"unknown adversary strategy {name!r}")
    adv = table[name](spec, k, f, seed)
    if len(adv.crash_budget()) > f:
        raise ConfigError(f"strategy crashes {len(adv.crash_budget())} peers but f = {f}")
    return adv


def byzantine_set(k: int, count: int, seed: int, spec: dict | None = None) -> list:
    """Which peers are corrupted: explicit ``peers`` or a seeded sample."""
    if spec and "peers" in spec:
        peers = sorted(int(x) for x in spec["peers"])
        if len(peers) > count:
            raise ConfigError(f"{len(peers)} Byzantine peers exceed the budget {count}")
        return peers
    rng = stream_rng(seed, 3, 0)
    return sorted(rng.sample(range(1, k + 1), count))


def indistinguishability_attack(target: int, delayed: set, corrupted: set, x_alt, reference: dict | None, f: int):
    """Delay R past the target's output and let F replay a reference run.

    ``reference`` maps each corrupted peer to the message log it produced in
    a failure-free run on the all-zeros input with R silent. Returns the
    adversary and the replay handlers to install for F.
    """
    delayed, corrupted = set(delayed), set(corrupted)
    if len(delayed) > f or len(corrupted) > f:
        raise ConfigError(f"|R| and |F| must not exceed f = {f}")
    if sum(1 for v in x_alt.values if v) != 1:
        raise ConfigError("the attacked input must differ from all-zeros in exactly one cell")
    if corrupted and (reference is None or not corrupted <= set(reference)):
        raise ConfigError("reference trace missing for a corrupted peer")
    adv = DelayedSetAttack(target, delayed, corrupted)
    return adv, {p: ReplayHandler(reference[p]) for p in corrupted}
