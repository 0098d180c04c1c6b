"""Download tolerating up to f < k crashes, phase by phase.

Every phase a peer queries the unknown cells it is responsible for, asks
each other peer for the cells assigned to that peer, waits until it has
heard from k - f peers, asks around about the rest, and hands the cells of
peers nobody heard from to all k peers for the next phase. The unknown
part shrinks by a factor f/k per phase; after enough phases the remainder
is queried directly and the full array is broadcast.
"""
from __future__ import annotations

from .core_model import Encoding, ExecutionAbort
from .crash_single import payload_bits
from .engine import Handler

PLAIN, TIME_OPTIMIZED = "plain", "time_optimized"


def initial_assignment_2(n: int, k: int) -> list:
    """Owner of each cell (index 0 unused): 1 + (i-1) // ceil(n/k)."""
    block = -(-n // k)
    return [0] + [1 + (i - 1) // block for i in range(1, n + 1)]


def literal_initial_owner(i: int, n: int, k: int) -> float:
    """The literal initial formula 1 + ceil(i / (n/k)); can leave [1, k]."""
    q = i * k / n
    return 1 + (int(q) if q == int(q) else int(q) + 1)


def reassign_unknown(indices: list, k: int) -> dict:
    """Index -> new owner: 1 + l // ceil(n'/k) over the sorted indices."""
    if not indices:
        return {}
    block = -(-len(indices) // k)
    return {i: 1 + l // block for l, i in enumerate(sorted(indices))}


def reassign_balanced(indices: list, k: int, favored=()) -> dict:
    """Index -> new owner, splitting the sorted indices as evenly as possible.

    Shares differ by at most one cell; the larger shares go to the peers in
    ``favored`` first. Owners are laid out in ascending id order, so every
    peer's share is a contiguous run of the sorted list.
    """
    if not indices:
        return {}
    q, r = divmod(len(indices), k)
    order = [p for p in favored] + [p for p in range(1, k + 1) if p not in set(favored)]
    size = {p: q for p in range(1, k + 1)}
    for p in order[:r]:
        size[p] += 1
    out, pos = {}, 0
    idx = sorted(indices)
    for p in range(1, k + 1):
        for i in idx[pos:pos + size[p]]:
            out[i] = p
        pos += size[p]
    return out


def phase_limit(n: int, k: int, f: int) -> int:
    """ceil(log_{k/f}(n/k)), computed exactly; at least one phase."""
    if f == 0:
        return 1
    p = 0
    # smallest p with (k/f)^p >= n/k, i.e. k^(p+1) >= n * f^p
    while k ** (p + 1) < n * f ** p:
        p += 1
    return max(1, p)


def query_bound_multi(n: int, k: int, f: int) -> int:
    """1 + sum_{p=0}^{P} ceil((n/k)(f/k)^p) with exact rational ceilings."""
    P = phase_limit(n, k, f)
    total = 1
    for p in range(P + 1):
        num, den = n * f ** p, k ** (p + 1)
        total += -(-num // den)
    return total


def unknown_bound(n: int, k: int, f: int, p: int) -> float:
    return n * (f / k) ** p


class MultiCrashHandler(Handler):
    """One peer; ``variant`` is PLAIN or TIME_OPTIMIZED.

    Stage-1 requests are always answered in full: a requested cell the
    responder does not know yet is queried on the spot and counted in
    ``extra_queries``. That only happens when two peers' assignments have
    drifted apart, and it rules out waiting forever on a partial answer.
    """

    def __init__(self, n: int, k: int, f: int, variant: str = TIME_OPTIMIZED, check: str = "bounds") -> None:
        if not 0 <= f < k:
            raise ValueError("need 0 <= f < k")
        self.n, self.k, self.f = n, k, f
        self.variant = variant
        self.check = check
        self.enc = Encoding(n, k)
        self.P = phase_limit(n, k, f)
        self.sigma = initial_assignment_2(n, k)
        self.res: list = [None] * (n + 1)
        self.unknown = n
        self.phase = -1
        self.stage = 0
        self.lists: dict = {}        # phase -> {owner: unknown indices at phase start}
        self.unk_cnt: list = [0] * (k + 1)
        self.heard = 0               # |H_p|
        self.F: list = []
        self.responders: set = set()
        self.pend1: list = []
        self.pend2: list = []
        self.extra_queries = 0
        self.todo = range(1, n + 1)  # superset of the unknown cells, ascending
        self.blocks: dict = {}       # (phase, owner) -> complete answer pairs
        self.phases_run = 0
        self.done = False

    # -- bookkeeping -------------------------------------------------------------
    def _absorb(self, pairs):
        res, sigma, cnt = self.res, self.sigma, self.unk_cnt
        for i, v in pairs:
            cur = res[i]
            if cur is None:
                res[i] = v
                self.unknown -= 1
                o = sigma[i]
                cnt[o] -= 1
                if cnt[o] == 0:
                    self.heard += 1
            elif cur != v:
                raise ExecutionAbort(f"conflicting values for cell {i}")

    def _in_H(self, j) -> bool:
        return self.unk_cnt[j] == 0

    # -- phases ------------------------------------------------------------------
    def start(self, net):
        self._begin_phase(net, 0)

    def _begin_phase(self, net, p):
        self.phase = p
        self.stage = 1
        k, n = self.k, self.n
        if p >= self.P or self.unknown == 0:
            self._finish(net)
            return
        self.phases_run = p + 1
        net.mark(f"p{p}s1")
        sigma, res = self.sigma, self.res
        lists = {j: [] for j in range(1, k + 1)}
        self.todo = [i for i in self.todo if res[i] is None]
        for i in self.todo:
            lists[sigma[i]].append(i)
        self.lists[p] = lists
        self.unk_cnt = [0] + [len(lists[j]) for j in range(1, k + 1)]
        self.heard = sum(1 for j in range(1, k + 1) if not lists[j])
        if net.checking:
            snap = {"phase": p, "unknown": self.unknown}
            if self.check == "full":
                snap["sigma"] = {i: sigma[i] for i in self.todo}
            net.snapshot("phase", snap)
        me = net.pid
        todo = lists[me]
        self._absorb(zip(todo, net.query_many(todo)))
        for j in range(1, k + 1):
            if j != me and lists[j]:
                net.send(j, ("s1q", p, tuple(lists[j])), self.enc.indices(len(lists[j])))
        self.stage = 2
        net.mark(f"p{p}s2")
        self._serve(net)
        self._progress(net)

    def _progress(self, net):
        if self.done:
            return
        if self.unknown == 0:
            self._finish(net)
            return
        p = self.phase
        if self.stage == 2:
            if self.heard < self.k - self.f:
                return
            self.F = [j for j in range(1, self.k + 1) if not self._in_H(j)]
            self.responders = {net.pid}
            self.stage = 3
            net.mark(f"p{p}s3")
            net.broadcast(("s2q", p, tuple(self.F)), self.enc.peers(len(self.F)))
            self._serve(net)
        if self.stage == 3 and not self.done:
            enough = len(self.responders) >= self.k - self.f
            if not enough and self.variant == TIME_OPTIMIZED:
                enough = all(self._in_H(j) for j in self.F)
            if not enough:
                return
            res = self.res
            left = [i for j in self.F for i in self.lists[p][j] if res[i] is None]
            heard = [j for j in range(1, self.k + 1) if j not in set(self.F)]
            for i, o in reassign_balanced(left, self.k, heard).items():
                self.sigma[i] = o
            self._begin_phase(net, p + 1)

    def _finish(self, net):
        if self.done:
            return
        todo = [i for i in self.todo if self.res[i] is None]
        if todo:
            self._absorb(zip(todo, net.query_many(todo)))
        self.done = True
        self.stage = 4
        if net.checking:
            net.snapshot("final", {"phase": self.phase, "queried_at_end": len(todo),
                                   "extra_queries": self.extra_queries})
        full = tuple(self.res[1:])
        net.broadcast(("fin", full), self.enc.run(self.n))
        net.terminate(full)

    # -- requests ----------------------------------------------------------------
    def _ready(self, q, stage) -> bool:
        return self.phase > q or (self.phase == q and self.stage >= stage)

    def _serve(self, net):
        if self.pend1:
            keep = []
            for q, who, want in self.pend1:
                if self._ready(q, 2):
                    self._answer1(net, q, who, want)
                else:
                    keep.append((q, who, want))
            self.pend1 = keep
        if self.pend2:
            keep = []
            for q, who, F in self.pend2:
                if self._ready(q, 3):
                    self._answer2(net, q, who, F)
                else:
                    keep.append((q, who, F))
            self.pend2 = keep

    def _answer1(self, net, q, who, want):
        res = self.res
        miss = [i for i in want if res[i] is None]
        if miss:
            self.extra_queries += len(miss)
            self._absorb(zip(miss, net.query_many(miss)))
        net.send(who, ("s1r", q, tuple(zip(want, [res[i] for i in want]))), payload_bits(self.enc, list(want)))

    def _answer2(self, net, q, who, F):
        res = self.res
        out = []
        size = self.enc.control()
        lists = self.lists.get(q, {})
        for j in F:
            pairs = self.blocks.get((q, j))
            if pairs is None:
                block = lists.get(j, [])
                vals = [res[i] for i in block]
                if None not in vals:
                    pairs = self.blocks[(q, j)] = (tuple(zip(block, vals)), payload_bits(self.enc, block))
            if pairs is not None:
                out.append((j, pairs[0]))
                size += self.enc.pid + pairs[1]
            else:
                out.append((j, None))
                size += self.enc.pid + 1
        net.send(who, ("s2r", q, tuple(out)), size)

    def receive(self, net, src, msg):
        if self.done:
            return
        kind = msg[0]
        if kind == "s1q":
            _, q, want = msg
            if self._ready(q, 2):
                self._answer1(net, q, src, want)
            else:
                self.pend1.append((q, src, want))
            return
        if kind == "s2q":
            _, q, F = msg
            if self._ready(q, 3):
                self._answer2(net, q, src, F)
            else:
                self.pend2.append((q, src, F))
            return
        if kind == "s1r":
            self._absorb(msg[2])
        elif kind == "s2r":
            _, q, answers = msg
            for j, pairs in answers:
                if pairs is not None:
                    self._absorb(pairs)
            if q == self.phase and self.stage == 3:
                self.responders.add(src)
        elif kind == "fin":
            self._absorb(enumerate(msg[1], start=1))
        self._progress(net)
