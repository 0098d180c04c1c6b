"""Two-phase download tolerating a single crash.

Each phase has three stages: broadcast your assigned cells, wait until you
have heard from all but one peer and ask the others about the missing one,
then either hand the missing peer's cells to the remaining k-1 peers or,
if somebody already had them, switch to completion mode (broadcast
everything next phase and stop waiting).
"""
from __future__ import annotations

from .core_model import Encoding, ExecutionAbort
from .engine import Handler

ACTIVE, COMPLETION = "active", "completion"


def initial_assignment_1(n: int, k: int) -> dict:
    """Peer -> its contiguous block; bit i goes to peer 1 + (i-1) // ceil(n/k)."""
    block = -(-n // k)
    out = {p: [] for p in range(1, k + 1)}
    for i in range(1, n + 1):
        out[1 + (i - 1) // block].append(i)
    return out


def reassign_single(indices: list, missing: int, k: int) -> dict:
    """Spread ``indices`` in order over the k-1 peers other than ``missing``."""
    others = [p for p in range(1, k + 1) if p != missing]
    out = {p: [] for p in range(1, k + 1)}
    if not indices:
        return out
    block = -(-len(indices) // len(others))
    for l, i in enumerate(indices):
        out[others[l // block]].append(i)
    return out


def query_bound_single(n: int, k: int) -> int:
    return -(-n // k) + -(-n // (k * (k - 1)))


def payload_bits(enc: Encoding, idxs) -> int:
    """Contiguous runs cost a start index plus the values; otherwise (index, value) pairs."""
    if not idxs:
        return enc.control()
    if idxs[-1] - idxs[0] + 1 == len(idxs):
        return enc.run(len(idxs))
    return enc.pairs(len(idxs))


class SingleCrashHandler(Handler):
    # Late stage-2 requests are still answered after output, so a slow peer
    # can always collect its k-1 responses.
    serves_after_termination = True

    def __init__(self, n: int, k: int) -> None:
        self.n, self.k = n, k
        self.enc = Encoding(n, k)
        self.mode = ACTIVE
        self.phase = 0
        self.stage = 0
        self.res: list = [None] * (n + 1)
        self.unknown = n
        self.assigned = {1: initial_assignment_1(n, k)}
        self.H: dict = {1: set(), 2: set()}
        self.jf: dict = {}
        self.responses: dict = {1: set(), 2: set()}
        self.got_bits: dict = {1: False, 2: False}
        self.pending: list = []          # deferred stage-2 requests (phase, requester, j)
        self.finished = False

    # -- helpers ---------------------------------------------------------------
    def _absorb(self, pairs):
        res = self.res
        for i, v in pairs:
            if res[i] is None:
                res[i] = v
                self.unknown -= 1
            elif res[i] != v:
                raise ExecutionAbort(f"conflicting values for cell {i}")

    def _known_block(self, t, j):
        idxs = self.assigned[t][j] if t in self.assigned else []
        res = self.res
        if all(res[i] is not None for i in idxs):
            return tuple((i, res[i]) for i in idxs)
        return None

    # -- stages ----------------------------------------------------------------
    def start(self, net):
        self._begin_phase(net, 1)

    def _begin_phase(self, net, t):
        self.phase = t
        self.stage = 1
        net.mark(f"p{t}s1")
        if self.mode == COMPLETION:
            pairs = tuple((i, self.res[i]) for i in range(1, self.n + 1))
            net.broadcast(("s1", t, pairs), self.enc.run(self.n))
        else:
            mine = self.assigned[t][net.pid]
            todo = [i for i in mine if self.res[i] is None]
            self._absorb(zip(todo, net.query_many(todo)))
            pairs = tuple((i, self.res[i]) for i in mine)
            net.broadcast(("s1", t, pairs), payload_bits(self.enc, mine))
        self.H[t].add(net.pid)
        self.stage = 2
        net.mark(f"p{t}s2")
        self._progress(net)

    def _progress(self, net):
        """Advance through every stage whose wait condition now holds."""
        while not self.finished:
            t = self.phase
            if self.unknown == 0 and self.mode == ACTIVE:
                self.mode = COMPLETION
            if self.stage == 2:
                if self.mode == COMPLETION:
                    self._serve(net)
                    self._end_phase(net)
                    continue
                if len(self.H[t]) < self.k - 1:
                    return
                missing = [j for j in range(1, self.k + 1) if j not in self.H[t]]
                self.jf[t] = missing[0] if missing else None
                net.snapshot("stage2", {"phase": t, "H": sorted(self.H[t]), "jf": self.jf[t]})
                self.stage = 3
                net.mark(f"p{t}s3")
                j = self.jf[t]
                net.broadcast(("s2q", t, j), self.enc.peers(1))
                self.responses[t].add(net.pid)       # our own answer is "me neither"
                self._serve(net)
                continue
            if self.stage == 3:
                if self.mode == COMPLETION:
                    self._end_phase(net)
                    continue
                if len(self.responses[t]) < self.k - 1:
                    return
                net.snapshot("stage3", {"phase": t, "jf": self.jf[t], "evidence": sorted(self.responses[t]),
                                        "lacking": self.unknown > 0})
                if self.got_bits[t]:
                    self.mode = COMPLETION
                elif t == 1:
                    j = self.jf[t]
                    block = [i for i in self.assigned[1][j]]
                    self.assigned[2] = reassign_single(block, j, self.k)
                self._end_phase(net)
                continue
            return

    def _end_phase(self, net):
        t = self.phase
        if t == 1:
            if 2 not in self.assigned:
                self.assigned[2] = {p: [] for p in range(1, self.k + 1)}
            self._begin_phase(net, 2)
            return
        self.finished = True
        self.stage = 4
        out = tuple(self.res[1:]) if self.unknown == 0 else None
        net.terminate(out)

    def _serve(self, net):
        keep = []
        for t, who, j in self.pending:
            if not self._answer(net, t, who, j):
                keep.append((t, who, j))
        self.pending = keep

    def _answer(self, net, t, who, j) -> bool:
        ready = self.mode == COMPLETION or self.phase > t or (self.phase == t and self.stage >= 3) or self.finished
        if not ready:
            return False
        block = self._known_block(t, j) if j is not None else ()
        if block is None:
            net.send(who, ("s2r", t, j, None), self.enc.peers(1))
        else:
            net.send(who, ("s2r", t, j, block), payload_bits(self.enc, [i for i, _ in block]) + self.enc.pid)
        return True

    # -- messages --------------------------------------------------------------
    def receive(self, net, src, msg):
        kind = msg[0]
        if self.finished:
            if kind == "s2q":
                self._answer(net, msg[1], src, msg[2])
            return
        if kind == "s1":
            _, t, pairs = msg
            self._absorb(pairs)
            self.H[t].add(src)
            if t < self.phase and self.unknown == 0:
                self.mode = COMPLETION
        elif kind == "s2q":
            _, t, j = msg
            if not self._answer(net, t, src, j):
                self.pending.append((t, src, j))
        elif kind == "s2r":
            _, t, j, block = msg
            if block is not None:
                self._absorb(block)
                self.got_bits[t] = True
            self.responses[t].add(src)
        self._progress(net)
