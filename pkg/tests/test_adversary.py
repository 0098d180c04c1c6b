import pytest
from hypothesis import given, strategies as st

from drsim.adversary import (
    BYZ_MODES, ByzantineHandler, CrashPlan, DelayedSetAttack, RandomLatency, UniformLatency,
    builtin_strategies, byzantine_set, indistinguishability_attack, make_adversary, make_latency, random_crash,
)
from drsim.core_model import InputArray
from drsim.engine import ConfigError, stream_rng


@given(st.integers(0, 10**6), st.integers(1, 20), st.data())
def test_byzantine_set_is_seeded_and_sized(seed, k, data):
    c = data.draw(st.integers(0, k))
    s = byzantine_set(k, c, seed)
    assert s == byzantine_set(k, c, seed)
    assert len(s) == c and set(s) <= set(range(1, k + 1))


def test_explicit_byzantine_peers_respect_budget():
    assert byzantine_set(5, 2, 0, {"peers": [4, 2]}) == [2, 4]
    with pytest.raises(ConfigError):
        byzantine_set(5, 1, 0, {"peers": [1, 2]})


@given(st.integers(0, 10**6), st.integers(2, 16), st.data())
def test_random_crash_stays_in_budget(seed, k, data):
    f = data.draw(st.integers(0, k - 1))
    assert len(random_crash(k, f, seed).crash_budget()) <= f


def test_make_adversary_checks_budget():
    with pytest.raises(ConfigError):
        make_adversary({"name": "crash_at", "peer": 1, "label": "start"}, 4, 0, 0)
    with pytest.raises(ConfigError):
        make_adversary({"name": "nope"}, 4, 1, 0)
    assert set(BYZ_MODES) <= set(builtin_strategies())


def test_latency_models():
    assert isinstance(make_latency("uniform", 0), UniformLatency)
    assert isinstance(make_latency(None, 0), RandomLatency)
    with pytest.raises(ConfigError):
        make_latency("bogus", 0)


def test_attack_validation():
    x = InputArray.from_bits("0100")
    with pytest.raises(ConfigError):
        indistinguishability_attack(1, {3, 4, 2}, set(), x, {}, 2)
    with pytest.raises(ConfigError):
        indistinguishability_attack(1, {4}, set(), InputArray.from_bits("0110"), {}, 2)
    with pytest.raises(ConfigError):
        indistinguishability_attack(1, {4}, {2}, x, {}, 2)
    with pytest.raises(ConfigError):
        DelayedSetAttack(1, {1}, set())
    adv, replay = indistinguishability_attack(1, set(), set(), x, None, 2)
    assert replay == {} and isinstance(adv, DelayedSetAttack)


def test_crash_plan_budget_lists_all_victims():
    plan = CrashPlan(UniformLatency(1.0), at_time={1: 0.5}, at_mark={2: "start"}, midsend={3: ("start", 1)})
    assert plan.crash_budget() == {1, 2, 3}
