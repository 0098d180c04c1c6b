"""Domain types shared by the simulator and every protocol.

Bit indices are 1-based everywhere a global position is meant. Positions
inside a segment string are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class ExecutionAbort(RuntimeError):
    """A protocol bug or harness misuse. Never raised by adversary actions."""


@dataclass(frozen=True)
class InputArray:
    """The source's array. Cells are bits unless ``width`` > 1."""

    values: tuple[int, ...]
    width: int = 1

    def __post_init__(self) -> None:
        if len(self.values) < 1:
            raise ValueError("input array must have n >= 1 cells")
        top = (1 << self.width) - 1
        for v in self.values:
            if not (0 <= v <= top):
                raise ValueError(f"cell value {v} does not fit in {self.width} bit(s)")

    @classmethod
    def from_bits(cls, bits: Sequence[int] | str) -> "InputArray":
        if isinstance(bits, str):
            return cls(tuple(int(c) for c in bits))
        return cls(tuple(int(b) for b in bits))

    @classmethod
    def zeros(cls, n: int, width: int = 1) -> "InputArray":
        return cls((0,) * n, width)

    @classmethod
    def random(cls, n: int, rng, width: int = 1) -> "InputArray":
        top = 1 << width
        return cls(tuple(rng.randrange(top) for _ in range(n)), width)

    @property
    def n(self) -> int:
        return len(self.values)

    def query(self, i: int, peer: int = 0) -> int:
        # ``peer`` is ignored for an honest source; equivocating sources use it.
        return source_query(self, i)

    def query_many(self, idxs, peer: int = 0) -> list:
        vals = self.values
        return [vals[i - 1] for i in idxs]

    def __str__(self) -> str:
        if self.width == 1:
            return "".join(map(str, self.values))
        return ",".join(map(str, self.values))


def source_query(x: InputArray, i: int) -> int:
    """Read cell ``i`` (1-based). Out-of-range reads abort the execution."""
    if not (1 <= i <= len(x.values)):
        raise ExecutionAbort(f"query index {i} out of range 1..{len(x.values)}")
    return x.values[i - 1]


@dataclass(frozen=True)
class Segment:
    index: int
    length: int
    offset: int

    @property
    def last(self) -> int:
        return self.offset + self.length - 1

    def indices(self) -> range:
        return range(self.offset, self.offset + self.length)


@dataclass(frozen=True)
class SegmentString:
    segment: Segment
    value: tuple

    def __post_init__(self) -> None:
        if len(self.value) != self.segment.length:
            raise ValueError("segment string length does not match its segment")


def partition_segments(n: int, seg_len: int) -> list[Segment]:
    """Split [1, n] into ceil(n/seg_len) consecutive segments; the last may be short."""
    if n < 1 or seg_len < 1:
        raise ValueError("need n >= 1 and seg_len >= 1")
    out = []
    for ell, start in enumerate(range(1, n + 1, seg_len), start=1):
        out.append(Segment(ell, min(seg_len, n - start + 1), start))
    return out


# --- encoding cost model -------------------------------------------------

TAG_BITS = 8


def index_bits(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def peer_bits(k: int) -> int:
    return max(1, math.ceil(math.log2(k))) if k > 1 else 1


@dataclass(frozen=True)
class Encoding:
    """Deterministic bit-size model for message payloads."""

    n: int
    k: int
    width: int = 1

    @property
    def idx(self) -> int:
        return index_bits(self.n)

    @property
    def pid(self) -> int:
        return peer_bits(self.k)

    def pairs(self, count: int) -> int:
        """A tagged list of (index, value) pairs."""
        return TAG_BITS + count * (self.idx + self.width)

    def indices(self, count: int) -> int:
        return TAG_BITS + count * self.idx

    def peers(self, count: int) -> int:
        return TAG_BITS + count * self.pid

    def run(self, count: int) -> int:
        """A contiguous run of values with a start index."""
        return TAG_BITS + self.idx + count * self.width

    def control(self) -> int:
        return TAG_BITS
