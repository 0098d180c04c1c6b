import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from drsim import byz_rand as br
from drsim.adversary import Adversary, ByzantineHandler, RandomLatency, byzantine_set
from drsim.core_model import InputArray
from drsim.engine import ConfigError, simulate, stream_rng


def test_two_cycle_parameters_example():
    p = br.two_cycle_params(10**6, 10**5, 0.6, 0.4, 1)
    assert p.case == 1
    assert p.phi_seg == 143109
    assert p.K == 7
    assert p.t == pytest.approx(1428.5714, abs=1e-3)


def test_small_k_means_query_everything():
    p = br.two_cycle_params(1024, 16, 0.75, 0.25)
    assert p.case == 3 and p.query_all and p.K == 1


@pytest.mark.parametrize("K,cycles", [(1, 1), (2, 2), (4, 3), (16, 5), (5, 4)])
def test_multi_cycle_count(K, cycles):
    n = 1024
    p = br.multi_cycle_params(n, 512, 0.75, 0.25, phi_seg=-(-n // K))
    assert p.K == K and p.cycles == cycles


def test_multi_cycle_thresholds():
    p = br.multi_cycle_params(2**14, 256, 0.75, 0.25, phi_seg=4096)
    assert [p.t_at(i) for i in range(3)] == [16.0, 32.0, 64.0]
    assert p.premise_margin() == pytest.approx(0.0687, abs=1e-4)
    lit = br.multi_cycle_params(2**14, 256, 0.75, 0.25, phi_seg=4096, threshold=br.LITERAL)
    assert lit.t_at(0) == 24.0


def test_bad_beta_rejected():
    with pytest.raises(ConfigError):
        br.two_cycle_params(100, 10, 0.5, 0.5)


@given(st.integers(2, 5000), st.integers(1, 64), st.data())
def test_segments_partition_input(n, seg, data):
    seg = min(seg, n)
    p = br.with_segment(br.two_cycle_params(n, 4096, 0.75, 0.25), seg)
    i = data.draw(st.integers(0, 3))
    cells = []
    for l in range(1, p.K_at(i) + 1):
        a, b = br.segment_bounds(p, i, l)
        cells += range(a, b + 1)
    assert cells == list(range(1, n + 1))


def test_lg_ceil():
    assert [br.lg_ceil(x) for x in (1, 2, 3, 4, 5, 16, 17)] == [0, 1, 2, 2, 3, 4, 5]


def _run(p, seed, flood=True, k=None):
    k = k or p.k
    x = InputArray.random(p.n, random.Random(seed))
    byz = set(byzantine_set(k, int(p.beta * k), seed))
    hs = {q: (br.FloodHandler(p, x.values, seed) if flood else ByzantineHandler(br.RandHandler(p), "flip", br.flip_segment))
          if q in byz else br.RandHandler(p) for q in range(1, k + 1)}
    tr = simulate(k, x, hs, Adversary(RandomLatency(stream_rng(seed, 0))), randomized=True, seed=seed,
                  byzantine=byz, phi=10**6)
    return tr, hs


def test_single_segment_is_query_everything():
    p = br.with_segment(br.two_cycle_params(64, 16, 0.75, 0.25), 64)
    tr, _ = _run(p, 3, flood=False)
    assert tr.verdict == "Correct"
    assert all(len(q.queries) == 64 for q in tr.nonfaulty())


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_two_cycle_with_flooders(seed):
    p = br.with_segment(br.two_cycle_params(256, 128, 0.75, 0.25), 128)
    tr, _ = _run(p, seed)
    assert tr.audits["cycle_contract"] and tr.audits["crash_legality"]
    assert tr.verdict in ("Correct", "ProtocolFailure")
    if tr.verdict == "Correct":
        assert max(len(q.queries) for q in tr.nonfaulty()) <= p.phi_seg + math.ceil(p.k / p.t)


def test_multi_cycle_runs_every_cycle():
    p = br.multi_cycle_params(1024, 128, 0.75, 0.25, phi_seg=256)
    tr, hs = _run(p, 1)
    assert tr.verdict == "Correct"
    assert tr.audits["cycles"] == list(range(p.cycles))


def test_flip_segment():
    assert br.flip_segment(("seg", 0, 1, bytes([0, 1, 1]))) == ("seg", 0, 1, bytes([1, 0, 0]))
