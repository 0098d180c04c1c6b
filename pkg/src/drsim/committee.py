"""Deterministic Byzantine download with per-cell committees of size 2f+1.

Every cell has a committee of 2f+1 consecutive peers (wrapping around).
Members query their cells and broadcast (index, value) reports; everyone
accepts a value once f+1 distinct members reported it.
"""
from __future__ import annotations

from .core_model import Encoding, ExecutionAbort
from .engine import ConfigError, Handler


def committee(i: int, k: int, f: int, layout_k: int | None = None) -> frozenset:
    """Members of cell i's committee (1-based peer ids)."""
    m = layout_k or k
    if 2 * f + 1 > m:
        raise ConfigError(f"committee needs 2f+1 <= k, got f={f}, k={m}")
    size = 2 * f + 1
    return frozenset(((i - 1) * size + j) % m + 1 for j in range(size))


def memberships(pid: int, n: int, k: int, f: int, layout_k: int | None = None) -> list:
    """Cells whose committee contains ``pid``, in index order."""
    m = layout_k or k
    size = 2 * f + 1
    if 2 * f + 1 > m:
        raise ConfigError(f"committee needs 2f+1 <= k, got f={f}, k={m}")
    if pid > m:
        return []
    out = []
    for i in range(1, n + 1):
        start = ((i - 1) * size) % m
        if (pid - 1 - start) % m < size:
            out.append(i)
    return out


def query_cap(n: int, k: int, f: int) -> int:
    return -(-(2 * f + 1) * n // k)


def flip_report(width: int = 1):
    top = (1 << width) - 1

    def corrupt(msg):
        tag, pairs = msg
        return (tag, tuple((i, top - v) for i, v in pairs))

    return corrupt


class CommitteeHandler(Handler):
    """One peer of the committee protocol.

    ``layout_k`` restricts committees to peers 1..layout_k (used to build an
    under-querying variant). ``fallback`` lets a peer settle a cell once no
    value can still reach f+1 reports; with an honest source that never
    triggers, with an equivocating source it guarantees termination.
    """

    def __init__(self, n: int, k: int, f: int, phi: int, width: int = 1,
                 layout_k: int | None = None, fallback: bool = False) -> None:
        self.n, self.k, self.f = n, k, f
        self.m = layout_k or k
        if 2 * f + 1 > self.m:
            raise ConfigError(f"committee needs 2f+1 <= k, got f={f}, k={self.m}")
        self.size = 2 * f + 1
        self.start_of = [0] + [((i - 1) * self.size) % self.m for i in range(1, n + 1)]
        self.enc = Encoding(n, k, width)
        self.phi = phi
        self.fallback = fallback
        self.res: list = [None] * (n + 1)
        self.unknown = n
        self.heard = [0] * (n + 1)       # bitmask of reporters per cell
        self.nheard = [0] * (n + 1)
        self.tally: list = [None] * (n + 1)
        self.ignored = 0
        self.conflict = False
        self.done = False

    def start(self, net):
        mine = memberships(net.pid, self.n, self.k, self.f, self.m)
        vals = net.query_many(mine)
        pairs = tuple(zip(mine, vals))
        self._record_many(net.pid, pairs, own=True)
        per = max(1, (self.phi - 8) // (self.enc.idx + self.enc.width))
        for s in range(0, len(pairs), per):
            chunk = pairs[s:s + per]
            net.broadcast(("rep", chunk), self.enc.pairs(len(chunk)))
        self._check_done(net)

    def receive(self, net, src, msg):
        tag, pairs = msg
        if tag != "rep":
            return
        self._record_many(src, pairs, check=True)
        self._check_done(net)

    def _record_many(self, src, pairs, own=False, check=False):
        """Tally reports; with ``check``, drop pairs from non-members of the cell's committee."""
        bit = 1 << src
        heard, nheard, tally, res = self.heard, self.nheard, self.tally, self.res
        need = self.f + 1
        n, m, size, start_of = self.n, self.m, self.size, self.start_of
        s0 = src - 1
        for i, v in pairs:
            if check and (type(i) is not int or not 1 <= i <= n or (s0 - start_of[i]) % m >= size):
                self.ignored += 1
                continue
            cur = res[i]
            if cur is not None and cur == v and not own:
                continue           # agreeing with a settled value cannot create a conflict
            hm = heard[i]
            if hm & bit:
                continue
            heard[i] = hm | bit
            nheard[i] += 1
            t = tally[i]
            if t is None:
                t = tally[i] = {v: 1}
                c = 1
            else:
                c = t.get(v, 0) + 1
                t[v] = c
            if cur is None:
                if own or c >= need:
                    res[i] = v
                    self.unknown -= 1
                elif self.fallback and size - nheard[i] < need and max(t.values()) + size - nheard[i] < need:
                    res[i] = min(t)
                    self.unknown -= 1
            elif cur != v and c >= need:
                self.conflict = True
                if not self.fallback:
                    raise ExecutionAbort(f"cell {i}: two values reached {need} reports")

    def _check_done(self, net):
        if not self.done and self.unknown == 0:
            self.done = True
            net.snapshot("committee", {"ignored": self.ignored})
            net.terminate(tuple(self.res[1:]))
