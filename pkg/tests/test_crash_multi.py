import random

import pytest
from hypothesis import given, settings, strategies as st

from drsim import crash_multi as cm
from drsim.adversary import random_crash
from drsim.core_model import InputArray
from drsim.engine import simulate


def test_literal_owner_formula_can_leave_range():
    # frozen: the literal formula sends the last cell to peer k+1
    assert cm.literal_initial_owner(12, 12, 4) == 5
    assert cm.initial_assignment_2(12, 4)[12] == 4


def test_reassign_unknown_example():
    out = cm.reassign_unknown([7, 3, 9], 4)
    assert [out[i] for i in (3, 7, 9)] == [1, 2, 3]


@pytest.mark.parametrize("n,k,f,P,bound", [
    (1024, 4, 2, 8, 512), (1024, 8, 6, 17, 518), (4096, 16, 12, 20, 1031), (4096, 16, 1, 2, 274),
])
def test_phase_limit_and_bound(n, k, f, P, bound):
    assert cm.phase_limit(n, k, f) == P
    assert cm.query_bound_multi(n, k, f) == bound


@given(st.integers(2, 5000), st.integers(2, 32), st.data())
def test_phase_limit_is_smallest_power(n, k, data):
    f = data.draw(st.integers(1, k - 1))
    P = cm.phase_limit(n, k, f)
    assert k ** (P + 1) >= n * f ** P
    if P > 1:
        assert k ** P < n * f ** (P - 1)


@given(st.lists(st.integers(1, 10**4), unique=True, max_size=200), st.integers(1, 20), st.data())
def test_reassign_balanced_is_even_and_contiguous(idx, k, data):
    favored = data.draw(st.lists(st.integers(1, k), unique=True, max_size=k))
    out = cm.reassign_balanced(idx, k, favored)
    assert sorted(out) == sorted(idx)
    sizes = [sum(1 for v in out.values() if v == p) for p in range(1, k + 1)]
    assert max(sizes, default=0) - min(sizes, default=0) <= 1
    owners = [out[i] for i in sorted(idx)]
    assert owners == sorted(owners)
    big = {p for p in range(1, k + 1) if idx and sizes[p - 1] > len(idx) // k}
    assert big == set(([*favored] + [p for p in range(1, k + 1) if p not in favored])[: len(idx) % k])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([(256, 4, 2), (256, 8, 6), (300, 5, 1)]),
       st.sampled_from([cm.PLAIN, cm.TIME_OPTIMIZED]))
def test_multi_crash_correct_with_shrinking_unknowns(seed, nkf, variant):
    n, k, f = nkf
    x = InputArray.random(n, random.Random(seed))
    hs = {p: cm.MultiCrashHandler(n, k, f, variant) for p in range(1, k + 1)}
    tr = simulate(k, x, hs, random_crash(k, f, seed, horizon=4.0), seed=seed, collect_snapshots=True)
    assert tr.verdict == "Correct"
    for pid, kind, d in tr.snapshots:
        if kind == "phase" and tr.peers[pid - 1].nonfaulty:
            assert d["unknown"] * k ** d["phase"] <= n * f ** d["phase"]
    live = [p.pid for p in tr.nonfaulty()]
    assert max(hs[p].phases_run for p in live) <= cm.phase_limit(n, k, f)


def test_no_crash_is_cheap():
    n, k = 1024, 8
    x = InputArray.random(n, random.Random(0))
    from drsim.adversary import Adversary, UniformLatency
    hs = {p: cm.MultiCrashHandler(n, k, 3) for p in range(1, k + 1)}
    tr = simulate(k, x, hs, Adversary(UniformLatency(1.0)))
    assert tr.verdict == "Correct"
    assert max(len(p.queries) for p in tr.peers) == n // k
