import random

import pytest
from hypothesis import given, settings, strategies as st

from drsim.adversary import CrashPlan, RandomLatency, UniformLatency
from drsim.core_model import InputArray
from drsim.crash_single import (
    initial_assignment_1, query_bound_single, reassign_single, SingleCrashHandler,
)
from drsim.engine import simulate, stream_rng
from drsim.runner import _check_single
from drsim.scenario import Scenario


def test_initial_assignment_example():
    # frozen from an independent oracle
    assert initial_assignment_1(5, 4) == {1: [1, 2], 2: [3, 4], 3: [5], 4: []}
    assert initial_assignment_1(12, 4) == {1: [1, 2, 3], 2: [4, 5, 6], 3: [7, 8, 9], 4: [10, 11, 12]}


@pytest.mark.parametrize("n,k,bound", [(12, 4, 4), (120, 4, 40), (1000, 10, 112)])
def test_query_bound_values(n, k, bound):
    assert query_bound_single(n, k) == bound


@given(st.integers(1, 300), st.integers(2, 12))
def test_assignment_partitions_cells(n, k):
    a = initial_assignment_1(n, k)
    assert sorted(i for v in a.values() for i in v) == list(range(1, n + 1))
    assert max(len(v) for v in a.values()) == -(-n // k)


@given(st.lists(st.integers(1, 1000), unique=True, max_size=60).map(sorted), st.integers(3, 10), st.data())
def test_reassign_skips_missing_peer(idx, k, data):
    missing = data.draw(st.integers(1, k))
    out = reassign_single(idx, missing, k)
    assert out[missing] == []
    assert sorted(i for v in out.values() for i in v) == idx
    assert max(len(v) for v in out.values()) <= -(-len(idx) // (k - 1)) if idx else True


def _run(n, k, adv, seed=0):
    x = InputArray.random(n, random.Random(seed))
    tr = simulate(k, x, {p: SingleCrashHandler(n, k) for p in range(1, k + 1)}, adv,
                  seed=seed, collect_snapshots=True)
    return tr


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.floats(0, 6))
def test_single_crash_correct_and_bounded(seed, victim, when):
    n, k = 120, 4
    tr = _run(n, k, CrashPlan(RandomLatency(stream_rng(seed, 0)), at_time={victim: when}), seed)
    assert tr.verdict == "Correct"
    assert max(len(p.queries) for p in tr.nonfaulty()) <= query_bound_single(n, k)
    sc = Scenario("t", "crash1", n, k, f=1)
    assert _check_single(sc, tr, full=True) == []


def test_crash_at_stage_mark_is_tolerated():
    tr = _run(12, 4, CrashPlan(UniformLatency(1.0), at_mark={2: "p1s2"}))
    assert tr.verdict == "Correct"
    assert tr.peers[1].crashed
