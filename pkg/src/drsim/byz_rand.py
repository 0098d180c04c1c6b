"""Randomized Byzantine download by segment sampling and decision trees.

Two-cycle mode: every peer reads one random segment, broadcasts it, waits
for ceil(gamma*k) segment reports and then settles every segment by
building a decision tree over the strings reported at least t times.

Multi-cycle mode: segment sizes double every cycle. In cycle i a peer
picks one i-segment, settles its two halves from the strings reported in
cycle i-1 and broadcasts the result; the last cycle covers the whole input.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from .core_model import Encoding
from .dtree import EmptyFrequentSet, build_tree, determine, frequent_strings
from .engine import ConfigError, Handler

TWO_CYCLE, MULTI_CYCLE = "two_cycle", "multi_cycle"
GAMMA_MINUS_BETA, LITERAL = "gamma_minus_beta", "literal"


@dataclass(frozen=True)
class RandParams:
    n: int
    k: int
    gamma: float
    beta: float
    c: float
    phi_seg: int
    K: int
    t: float
    case: int = 1
    mode: str = TWO_CYCLE
    threshold: str = GAMMA_MINUS_BETA

    @property
    def query_all(self) -> bool:
        return self.case == 3

    @property
    def cycles(self) -> int:
        """Message rounds: 2 for the two-cycle mode, ceil(lg K) + 1 otherwise."""
        if self.mode == TWO_CYCLE:
            return 2
        return lg_ceil(self.K) + 1

    def K_at(self, i: int) -> int:
        return -(-self.n // (self.phi_seg << i))

    def seg_len(self, i: int) -> int:
        return self.phi_seg << i

    def t_at(self, i: int) -> float:
        """Frequency threshold for strings of cycle-i segments."""
        g = self.gamma - self.beta if self.threshold == GAMMA_MINUS_BETA else self.gamma
        return (2 ** i) * self.phi_seg * g * self.k / (2 * self.n)

    def premise_margin(self) -> float:
        """(gamma-beta) k phi_seg / n divided by 16 (c+2) ln n; >= 1 inside the guarantee."""
        return (self.gamma - self.beta) * self.k * self.phi_seg / self.n / (16 * (self.c + 2) * math.log(self.n))


def lg_ceil(x: int) -> int:
    return max(0, (x - 1).bit_length())


def _check(n, k, beta, c):
    if not 0 <= beta < 0.5:
        raise ConfigError(f"need 0 <= beta < 1/2, got beta={beta}")
    if c < 1:
        raise ConfigError("need c >= 1")
    if n < 2 or k < 1:
        raise ConfigError("need n >= 2 and k >= 1")


def two_cycle_params(n: int, k: int, gamma: float, beta: float, c: float = 1) -> RandParams:
    """Segment length, count and threshold following the three size regimes."""
    _check(n, k, beta, c)
    ln = math.log(n)
    gb = gamma - beta
    if k <= 32 * (c + 1) * ln / gamma:
        return RandParams(n, k, gamma, beta, c, n, 1, gb * k / 2, case=3)
    if k < math.sqrt(n / gb) * ln:
        phi, case = math.ceil(32 * (c + 1) * n * ln / (gb * k)), 2
    else:
        phi, case = math.ceil(32 * (c + 1) * math.sqrt(n / gb)), 1
    phi = min(phi, n)
    K = -(-n // phi)
    return RandParams(n, k, gamma, beta, c, phi, K, gb * k / (2 * K), case=case)


def with_segment(p: RandParams, phi_seg: int, mode: str | None = None, threshold: str | None = None) -> RandParams:
    """Override the segment length (desk-scale scenarios); t follows."""
    if not 1 <= phi_seg <= p.n:
        raise ConfigError(f"segment length must lie in [1, n], got {phi_seg}")
    K = -(-p.n // phi_seg)
    return replace(p, phi_seg=phi_seg, K=K, t=(p.gamma - p.beta) * p.k / (2 * K), case=1 if p.case == 3 else p.case,
                   mode=mode or p.mode, threshold=threshold or p.threshold)


def multi_cycle_params(n, k, gamma, beta, c=1, phi_seg=None, threshold=GAMMA_MINUS_BETA) -> RandParams:
    base = two_cycle_params(n, k, gamma, beta, c)
    if phi_seg is None:
        phi_seg = base.phi_seg
    return with_segment(base, phi_seg, MULTI_CYCLE, threshold)


def segment_bounds(p: RandParams, i: int, l: int) -> tuple:
    """1-based inclusive (start, end) of i-segment l."""
    size = p.seg_len(i)
    start = (l - 1) * size + 1
    return start, min(p.n, l * size)


class RandHandler(Handler):
    """One honest peer for either mode."""

    def __init__(self, params: RandParams, width: int = 1) -> None:
        self.p = params
        self.enc = Encoding(params.n, params.k, width)
        if not 1 <= width <= 8:
            raise ConfigError("segment strings carry cells of at most 8 bits")
        self.width = width
        self.last = params.cycles - 1
        self.lengths = {}
        for i in range(self.last + 1):
            for l in range(1, params.K_at(i) + 1):
                a, b = segment_bounds(params, i, l)
                self.lengths[(i, l)] = b - a + 1
        self.need = math.ceil(params.gamma * params.k - 1e-9)
        self.cycle = 0
        self.got: dict = {}          # cycle -> {sender: (l, string)}
        self.known: dict = {}        # cycle -> {segment: string} settled by this peer
        self.det_queries: dict = {}  # cycle -> queries spent determining
        self.picks: dict = {}        # cycle -> segment picked
        self.done = False

    # -- helpers ---------------------------------------------------------------
    def _seg_bits(self, length: int) -> int:
        return 8 + 16 + self.enc.idx + length * self.width

    def _valid(self, i, l, s) -> bool:
        # (cycle, segment) -> expected length; bool is excluded since it is an int
        want = self.lengths.get((i, l)) if type(i) is int and type(l) is int else None
        return want is not None and type(s) is bytes and len(s) == want

    def _cells_ok(self, s) -> bool:
        return max(s) <= (1 << self.width) - 1

    def _settle(self, net, i, l):
        """Determine cycle-i segment l from the cycle-i reports; None on failure."""
        own = self.known.get(i, {}).get(l)
        if own is not None:
            return own
        t = self.p.t if self.p.mode == TWO_CYCLE else self.p.t_at(i)
        pool = [(snd, s) for snd, (ll, s) in self.got.get(i, {}).items() if ll == l]
        # Cell values are checked only for strings that survive the threshold.
        fs = {x for x in (frequent_strings(pool, t) if pool else ()) if self._cells_ok(x)}
        tree = build_tree(fs)      # EmptyFrequentSet propagates
        start, _ = segment_bounds(self.p, i, l)
        spent = 0

        def ask(idx):
            nonlocal spent
            spent += 1
            return net.query(idx)

        out = determine(tree, start, ask)
        self.det_queries[self.cycle] = self.det_queries.get(self.cycle, 0) + spent
        return out

    def _heard(self, i) -> int:
        return len(self.got.get(i, ()))

    # -- protocol ----------------------------------------------------------------
    def start(self, net):
        p = self.p
        net.begin_cycle(0)
        if p.query_all:
            vals = tuple(net.query_many(range(1, p.n + 1)))
            self.done = True
            net.terminate(vals)
            return
        l = net.rng.randint(1, p.K_at(0))
        self.picks[0] = l
        a, b = segment_bounds(p, 0, l)
        s = bytes(net.query_many(range(a, b + 1)))
        self.known[0] = {l: s}
        self._broadcast(net, 0, l, s)
        self._advance(net)

    def _broadcast(self, net, i, l, s):
        self.got.setdefault(i, {})[net.pid] = (l, s)
        net.broadcast(("seg", i, l, s), self._seg_bits(len(s)))

    def receive(self, net, src, msg):
        if self.done or not isinstance(msg, tuple) or len(msg) != 4 or msg[0] != "seg":
            return
        _, i, l, s = msg
        if not self._valid(i, l, s):
            return
        box = self.got.setdefault(i, {})
        if src in box:
            return                 # one string per sender per cycle
        box[src] = (l, s)
        self._advance(net)

    def _advance(self, net):
        try:
            if self.p.mode == TWO_CYCLE:
                self._advance_two(net)
            else:
                self._advance_multi(net)
        except EmptyFrequentSet:
            self._fail(net, "empty frequent set")

    def _fail(self, net, why):
        self.done = True
        net.fail(why)

    def _record_heard(self, net, i):
        if net.checking:
            picks = {}
            for snd, (l, _) in self.got.get(i, {}).items():
                picks.setdefault(l, []).append(snd)
            net.snapshot("heard", {"cycle": i, "picks": picks})

    def _advance_two(self, net):
        if self.done or self._heard(0) < self.need:
            return
        self._record_heard(net, 0)
        net.begin_cycle(1)
        self.cycle = 1
        out = []
        for l in range(1, self.p.K + 1):
            s = self._settle(net, 0, l)
            if s is None:
                self._fail(net, f"segment {l}: source disagrees with every frequent string")
                return
            out.extend(s)
        self.done = True
        net.terminate(tuple(out))

    def _advance_multi(self, net):
        p = self.p
        last = self.last
        while not self.done and self.cycle < last and self._heard(self.cycle) >= self.need:
            prev = self.cycle
            self._record_heard(net, prev)
            i = prev + 1
            net.begin_cycle(i)
            self.cycle = i
            l = net.rng.randint(1, p.K_at(i))
            self.picks[i] = l
            parts = []
            for u in (2 * l - 1, 2 * l):
                if u > p.K_at(prev):
                    continue
                s = self._settle(net, prev, u)
                if s is None:
                    self._fail(net, f"cycle {i} segment {u}: source disagrees with every frequent string")
                    return
                parts.extend(s)
            s = bytes(parts)
            self.known[i] = {l: s}
            if i == last:
                self.done = True
                net.terminate(tuple(s))
                return
            self._broadcast(net, i, l, s)
        if not self.done and last == 0:
            # a single segment: the cycle-0 read already covers the input
            self.done = True
            net.terminate(tuple(self.known[0][self.picks[0]]))


# --- Byzantine behaviour for this family --------------------------------------

def flip_segment(msg):
    """Complement every cell of a segment report (width 1)."""
    tag, i, l, s = msg
    return (tag, i, l, bytes(1 - v for v in s))


class FloodHandler(Handler):
    """Byzantine peer that reports one shared fake string per cycle.

    All flooders built with the same ``plan_seed`` pick the same segment and
    the same fake string, so the fake reaches the frequency threshold as soon
    as enough of them are heard. The fake differs from the truth in
    ``flips`` random positions, which forces decision trees to query.
    """

    def __init__(self, params: RandParams, truth: tuple, plan_seed: int, flips: int = 3) -> None:
        self.p = params
        self.enc = Encoding(params.n, params.k)
        rng = random.Random(plan_seed)
        self.plan = []
        rounds = [0] if params.mode == TWO_CYCLE else range(params.cycles - 1)
        for i in rounds:
            l = rng.randint(1, params.K_at(i))
            a, b = segment_bounds(params, i, l)
            s = list(truth[a - 1:b])
            for pos in rng.sample(range(len(s)), min(flips, len(s))):
                s[pos] = 1 - s[pos]
            self.plan.append((i, l, bytes(s)))

    def start(self, net):
        net.begin_cycle(0)
        for i, l, s in self.plan:
            net.broadcast(("seg", i, l, s), 8 + 16 + self.enc.idx + len(s))
