"""Frequent-string extraction and decision trees over conflicting segment values.

Strings are any equal-length sequences of hashable symbols: ``str`` for
bit strings ("0101"), tuples of ints for word-valued segments.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

from .core_model import ExecutionAbort


class EmptyFrequentSet(ValueError):
    """No string reached the threshold, so there is nothing to build a tree from."""


@dataclass(frozen=True)
class Leaf:
    value: Sequence


@dataclass(frozen=True)
class Inner:
    """Split on 0-based position ``index``; one branch per symbol seen there."""

    index: int
    branches: tuple  # ((symbol, subtree), ...) sorted by symbol

    @property
    def left(self):
        return dict(self.branches)[_zero(self.branches)]

    @property
    def right(self):
        return dict(self.branches)[_one(self.branches)]


def _zero(branches):
    return branches[0][0]


def _one(branches):
    return branches[-1][0]


Tree = Union[Leaf, Inner]


def frequent_strings(ms: Iterable[tuple], t: float) -> set:
    """Strings reported by at least ``t`` distinct senders.

    ``ms`` holds (sender, string) pairs. A sender repeating the same string
    counts once.
    """
    if t <= 0:
        raise ValueError("threshold must be positive")
    senders: dict = defaultdict(set)
    length = None
    for sender, s in ms:
        if length is None:
            length = len(s)
        elif len(s) != length:
            raise ExecutionAbort("frequent_strings called with mixed string lengths")
        senders[s].add(sender)
    return {s for s, who in senders.items() if len(who) >= t}


def build_tree(strings: Iterable[Sequence]) -> Tree:
    """Split recursively at the smallest position where two strings differ."""
    S = sorted(set(strings))
    if not S:
        raise EmptyFrequentSet("cannot build a decision tree from an empty set")
    length = len(S[0])
    if any(len(s) != length for s in S):
        raise ExecutionAbort("build_tree called with mixed string lengths")
    return _build(S, 0)


def _build(S: list, start: int) -> Tree:
    if len(S) == 1:
        return Leaf(S[0])
    # In a sorted set the first and last strings share the shortest prefix.
    j = _common_prefix(S[0], S[-1], start)
    groups: dict = defaultdict(list)
    for s in S:
        groups[s[j]].append(s)
    # Every earlier position agrees across S, so children can resume at j+1.
    return Inner(j, tuple((sym, _build(groups[sym], j + 1)) for sym in sorted(groups)))


def _common_prefix(a, b, start: int) -> int:
    """Smallest j >= start with a[j] != b[j] (a != b, equal up to start)."""
    lo, hi = start, len(a)
    while lo < hi:
        mid = (lo + hi) // 2
        if a[lo:mid + 1] == b[lo:mid + 1]:
            lo = mid + 1
        else:
            hi = mid
    return lo


def inner_indices(tree: Tree) -> list:
    out = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Inner):
            out.append(node.index)
            stack.extend(sub for _, sub in node.branches)
    return sorted(set(out))


def count_nodes(tree: Tree) -> tuple:
    """(leaves, inner nodes)."""
    if isinstance(tree, Leaf):
        return 1, 0
    leaves, inner = 0, 1
    for _, sub in tree.branches:
        a, b = count_nodes(sub)
        leaves += a
        inner += b
    return leaves, inner


def leaves(tree: Tree) -> list:
    if isinstance(tree, Leaf):
        return [tree.value]
    out = []
    for _, sub in tree.branches:
        out.extend(leaves(sub))
    return out


def determine(tree: Tree, offset: int, query: Callable[[int], object], symbol: Callable = None):
    """Query every inner position (global index = offset + position), then walk.

    ``symbol`` converts a queried cell into the string alphabet; for ``str``
    bit strings it defaults to ``str``. Returns the leaf reached. If the
    queried value matches no branch, the true string is not in the tree and
    None is returned.
    """
    positions = _inner_positions(tree)
    if symbol is None:
        symbol = str if isinstance(_any_leaf(tree), str) else (lambda v: v)
    seen = {p: symbol(query(offset + p)) for p in positions}
    node = tree
    while isinstance(node, Inner):
        nxt = None
        v = seen[node.index]
        for sym, sub in node.branches:
            if sym == v:
                nxt = sub
                break
        if nxt is None:
            return None
        node = nxt
    return node.value


def _inner_positions(tree: Tree) -> list:
    # One query per inner node, even if two nodes share a position.
    out = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Inner):
            out.append(node.index)
            stack.extend(sub for _, sub in node.branches)
    return out


def _any_leaf(tree: Tree):
    while isinstance(tree, Inner):
        tree = tree.branches[0][1]
    return tree.value
