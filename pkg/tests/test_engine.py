import random

import pytest
from hypothesis import given, settings, strategies as st

from drsim.adversary import Adversary, CrashPlan, RandomLatency, SlowestPeer, UniformLatency
from drsim.core_model import InputArray
from drsim.crash_single import SingleCrashHandler
from drsim.engine import TICKS, Handler, simulate, stream_rng, to_ticks


class Echo(Handler):
    """Peer 1 sends one message to everyone; others terminate on receipt."""

    def __init__(self, bits=10):
        self.bits = bits

    def start(self, net):
        if net.pid == 1:
            net.broadcast(("hi",), self.bits)
            net.terminate("sent")

    def receive(self, net, src, msg):
        net.terminate(msg)


class Waiter(Handler):
    def start(self, net):
        pass


def test_failure_free_single_crash_protocol_splits_evenly():
    x = InputArray.random(12, random.Random(7))
    tr = simulate(4, x, {p: SingleCrashHandler(12, 4) for p in range(1, 5)}, Adversary(UniformLatency(1.0)), seed=7)
    assert tr.verdict == "Correct"
    assert [len(p.queries) for p in tr.peers] == [3, 3, 3, 3]


def test_identical_runs_give_identical_traces():
    def run():
        x = InputArray.random(120, random.Random(3))
        hs = {p: SingleCrashHandler(120, 4) for p in range(1, 5)}
        adv = CrashPlan(RandomLatency(stream_rng(3, 0)), at_time={2: 0.4})
        return simulate(4, x, hs, adv, seed=3, record_events=True).to_json()
    assert run() == run()


def test_latency_is_clamped_into_unit_interval():
    assert to_ticks(0.0) == 1
    assert to_ticks(5.0) == TICKS
    assert to_ticks(0.5) == TICKS // 2


def test_packets_serialize_on_a_link():
    x = InputArray.zeros(4)
    tr = simulate(2, x, {1: Echo(bits=100), 2: Echo()}, Adversary(UniformLatency(0.5)), phi=10)
    # 10 packets of latency 0.5 each on the 1->2 link
    assert tr.peers[1].term_time == 5 * TICKS
    assert tr.peers[0].msgs_sent == 10


def test_deadlock_is_a_verdict():
    tr = simulate(2, InputArray.zeros(2), {1: Waiter(), 2: Waiter()}, Adversary())
    assert tr.verdict == "Deadlock"


def test_quiescence_forces_a_release():
    x = InputArray.zeros(4)
    adv = SlowestPeer({1}, until=None)
    tr = simulate(2, x, {1: Echo(), 2: Echo()}, adv, expected=lambda out: True)
    assert tr.verdict == "Correct"
    assert tr.peers[1].output == ("hi",)


class Cycler(Handler):
    """Two cycles: broadcast, wait for everyone, broadcast again, stop."""

    def __init__(self, k):
        self.k = k
        self.got = {0: set(), 1: set()}
        self.cycle = 0

    def start(self, net):
        net.begin_cycle(0)
        net.broadcast((0,), 8, include_self=True)

    def receive(self, net, src, msg):
        self.got[msg[0]].add(src)
        if self.cycle == 0 and len(self.got[0]) == self.k:
            self.cycle = 1
            net.begin_cycle(1)
            net.broadcast((1,), 8, include_self=True)
        elif self.cycle == 1 and len(self.got[1]) >= self.k - 1:
            net.terminate(0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 3.0))
def test_randomized_mode_audits_hold(seed, when):
    k = 5
    adv = CrashPlan(RandomLatency(stream_rng(seed, 0)), at_time={3: when})
    tr = simulate(k, InputArray.zeros(1), {p: Cycler(k) for p in range(1, k + 1)}, adv,
                  randomized=True, seed=seed, expected=lambda out: True)
    assert tr.audits["cycle_contract"]
    assert tr.audits["crash_legality"]
    assert all(c["boundary"] for c in tr.audits["crashes"])
    assert tr.peers[2].term_time is None or not tr.peers[2].crashed


def test_crashed_peer_has_no_events_after_crash():
    x = InputArray.random(120, random.Random(1))
    adv = CrashPlan(UniformLatency(1.0), at_time={2: 0.5})
    tr = simulate(4, x, {p: SingleCrashHandler(120, 4) for p in range(1, 5)}, adv, record_events=True)
    p2 = tr.peers[1]
    assert p2.crashed and p2.term_time is None
    assert not any(e[1] == "deliver" and e[2] == 2 and e[0] > p2.crash_time for e in tr.event_log)


def test_livelock_guard():
    class Chatter(Handler):
        def start(self, net):
            net.send(3 - net.pid, "x", 1)

        def receive(self, net, src, msg):
            net.send(src, "x", 1)

    tr = simulate(2, InputArray.zeros(1), {1: Chatter(), 2: Chatter()}, Adversary(), max_events=500)
    assert tr.verdict == "Livelock"


def test_stream_rng_is_split_by_stream_and_peer():
    a = stream_rng(5, 0, 1).random()
    assert a == stream_rng(5, 0, 1).random()
    assert a != stream_rng(5, 1, 1).random()
    assert a != stream_rng(5, 0, 2).random()
