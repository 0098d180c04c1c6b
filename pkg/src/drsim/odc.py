"""Oracle data collection: download several possibly lying sources and take medians.

Each of m sources holds n word-valued cells. Up to a fraction beta_d of the
sources are Byzantine. The peers download the lowest 2*ceil(m*beta_d)+1
sources and every peer outputs, per cell, the median of what it learned.
With at most ceil(m*beta_d) lying sources among those, the median lies in
the honest range of the cell.

Two ways to learn a source: every peer reads it in full (naive), or the
peers run the committee download on it with word-valued cells.
"""
from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field

from .adversary import Adversary, ByzantineHandler, RandomLatency, byzantine_set
from .committee import CommitteeHandler, flip_report
from .engine import ConfigError, simulate, stream_rng
from .naive import NaiveHandler

NAIVE, DOWNLOAD = "naive", "download"
SOURCE_MODES = ("inflate", "deflate", "equivocate")


@dataclass(frozen=True)
class DataSource:
    """An honest source: answers every peer with its stored values."""

    values: tuple
    width: int = 32

    @property
    def n(self) -> int:
        return len(self.values)

    def query(self, i: int, peer: int = 0) -> int:
        if not 1 <= i <= len(self.values):
            raise ConfigError(f"cell {i} out of range")
        return self.values[i - 1]

    def query_many(self, idxs, peer: int = 0) -> list:
        vals = self.values
        return [vals[i - 1] for i in idxs]


@dataclass(frozen=True)
class ByzantineSource(DataSource):
    """Reports the largest word (inflate), zero (deflate), or either by peer parity."""

    mode: str = "inflate"

    def __post_init__(self) -> None:
        if self.mode not in SOURCE_MODES:
            raise ConfigError(f"unknown source behaviour {self.mode!r}")

    def _lie(self, peer: int) -> int:
        top = (1 << self.width) - 1
        if self.mode == "inflate":
            return top
        if self.mode == "deflate":
            return 0
        return top if peer % 2 == 0 else 0

    def query(self, i: int, peer: int = 0) -> int:
        super().query(i, peer)
        return self._lie(peer)

    def query_many(self, idxs, peer: int = 0) -> list:
        v = self._lie(peer)
        return [v for _ in idxs]


@dataclass
class DataSourceSet:
    sources: list           # index 0 is source 1
    width: int = 32
    byzantine: frozenset = field(default_factory=frozenset)

    @property
    def m(self) -> int:
        return len(self.sources)

    @property
    def n(self) -> int:
        return self.sources[0].n

    def honest_range(self, i: int) -> tuple:
        vals = [self.sources[j - 1].values[i - 1] for j in range(1, self.m + 1) if j not in self.byzantine]
        return min(vals), max(vals)


def ads_size(m: int, beta_d: float) -> int:
    if not 0 <= beta_d <= 0.5:
        raise ConfigError(f"need beta_d <= 1/2, got {beta_d}")
    size = 2 * math.ceil(m * beta_d - 1e-9) + 1
    if size > m:
        raise ConfigError(f"2*ceil(m*beta_d)+1 = {size} exceeds m = {m}")
    return size


def select_ads(m: int, beta_d: float) -> list:
    """The lowest 2*ceil(m*beta_d)+1 source ids."""
    return list(range(1, ads_size(m, beta_d) + 1))


def make_sources(m: int, n: int, beta_d: float, seed: int, width: int = 32,
                 modes=SOURCE_MODES, spread: int = 50) -> DataSourceSet:
    """Honest sources scatter around a common base; floor(m*beta_d) sources lie.

    ``modes`` is one behaviour name or a sequence assigned round-robin to the
    lying sources.
    """
    if isinstance(modes, str):
        modes = (modes,)
    ads_size(m, beta_d)
    rng = random.Random(seed)
    base = [rng.randrange(1000, 1 << 16) for _ in range(n)]
    bad = sorted(rng.sample(range(1, m + 1), int(m * beta_d + 1e-9)))
    out = []
    for j in range(1, m + 1):
        vals = tuple(max(0, b + rng.randint(-spread, spread)) for b in base)
        if j in bad:
            out.append(ByzantineSource(vals, width, modes[bad.index(j) % len(modes)]))
        else:
            out.append(DataSource(vals, width))
    return DataSourceSet(out, width, frozenset(bad))


def median(values: list) -> int:
    s = sorted(values)
    return s[len(s) // 2]


@dataclass
class OdcResult:
    res: dict               # nonfaulty peer -> tuple of medians
    total_queries: int
    traces: list
    in_range: bool


def run_odc(data: DataSourceSet, k: int, beta_d: float, mode: str = DOWNLOAD, seed: int = 0,
            f_peers: int = 0, peer_mode: str = "flip", phi: int | None = None,
            record_events: bool = False) -> OdcResult:
    """Download every selected source, then take per-cell medians at every peer."""
    if mode not in (NAIVE, DOWNLOAD):
        raise ConfigError(f"unknown ODC mode {mode!r}")
    if mode == DOWNLOAD and not 3 * f_peers < k:
        raise ConfigError(f"the download mode needs fewer than k/3 faulty peers, got f={f_peers}, k={k}")
    n, w = data.n, data.width
    phi = phi or (1 << 20)
    bad_peers = set(byzantine_set(k, f_peers, seed)) if f_peers else set()
    learned = {p: [] for p in range(1, k + 1) if p not in bad_peers}
    traces, total = [], 0
    for j in select_ads(data.m, beta_d):
        src = data.sources[j - 1]
        hs = {}
        for p in range(1, k + 1):
            if mode == NAIVE:
                h = NaiveHandler(n)
            else:
                h = CommitteeHandler(n, k, f_peers, phi, width=w, fallback=True)
            if p in bad_peers:
                h = ByzantineHandler(h, peer_mode, flip_report(w))
            hs[p] = h
        honest = j not in data.byzantine
        expect = (lambda out: out is not None and tuple(out) == src.values) if honest else (lambda out: out is not None)
        tr = simulate(k, src, hs, Adversary(RandomLatency(stream_rng(seed, 0, j))), phi=phi, seed=seed,
                      byzantine=bad_peers, expected=expect, record_events=record_events,
                      scenario={"protocol": f"odc_{mode}", "source": j, "seed": seed})
        traces.append(tr)
        total += sum(len(p.queries) for p in tr.peers)
        for p in learned:
            learned[p].append(tr.peers[p - 1].output)
    res = {}
    ok = all(tr.verdict == "Correct" for tr in traces)
    for p, outs in learned.items():
        if any(o is None for o in outs):
            ok = False
            continue
        res[p] = tuple(median([o[i] for o in outs]) for i in range(n))
    ranges = [data.honest_range(i) for i in range(1, n + 1)]
    for r in res.values():
        if any(not lo <= v <= hi for v, (lo, hi) in zip(r, ranges)):
            ok = False
    return OdcResult(res, total, traces, ok)


def load_sources_csv(path, width: int = 32, byzantine=()) -> DataSourceSet:
    """Rows (source, index, value), 1-based; every source must cover 1..n."""
    cells: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            cells.setdefault(int(row["source"]), {})[int(row["index"])] = int(row["value"])
    m = max(cells)
    if sorted(cells) != list(range(1, m + 1)):
        raise ConfigError("source ids must be 1..m")
    n = max(cells[1])
    out = []
    for j in range(1, m + 1):
        if sorted(cells[j]) != list(range(1, n + 1)):
            raise ConfigError(f"source {j} must define cells 1..{n}")
        out.append(DataSource(tuple(cells[j][i] for i in range(1, n + 1)), width))
    return DataSourceSet(out, width, frozenset(byzantine))


def save_sources_csv(data: DataSourceSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "index", "value"])
        for j, s in enumerate(data.sources, start=1):
            for i, v in enumerate(s.values, start=1):
                w.writerow([j, i, v])


def export_res_csv(res: tuple, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(res, start=1):
            w.writerow([i, v])
