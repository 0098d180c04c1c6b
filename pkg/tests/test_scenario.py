import json

import pytest
from hypothesis import given, strategies as st

from drsim.scenario import SCHEMA, ScenarioError, parse_scenario, parse_seeds, scenario_from_dict


def _doc(**kw):
    d = {"schema": SCHEMA, "id": "x", "protocol": "crashF", "n": 64, "k": 4, "f": 1}
    d.update(kw)
    return d


def test_seed_forms():
    assert parse_seeds(3) == (3,)
    assert parse_seeds("1..4") == (1, 2, 3, 4)
    assert parse_seeds({"from": 2, "to": 3}) == (2, 3)
    assert parse_seeds([5, 1]) == (5, 1)
    for bad in ("4..1", "x", True, [], [1.5]):
        with pytest.raises(ValueError):
            parse_seeds(bad)


@given(st.integers(-100, 100), st.integers(0, 100))
def test_seed_range_length(a, span):
    assert len(parse_seeds(f"{a}..{a + span}")) == span + 1


@pytest.mark.parametrize("override,message", [
    ({"protocol": "byz_committee", "f": 2}, "2f+1 <= k required"),
    ({"protocol": "byz_2cycle", "beta": 0.5}, "0 <= beta < 1/2 required"),
    ({"f": 4}, "0 <= f < k required"),
    ({"protocol": "crash1", "f": 2}, "f <= 1 required (single-crash protocol)"),
    ({"protocol": "odc_download", "f_peers": 2, "k": 6}, "3*f_peers < k required"),
    ({"bogus": 1}, "unknown fields: bogus"),
    ({"schema": "other"}, "schema must be 'drsim/1'"),
    ({"adversary": {"name": "nope"}}, "adversary name must be one of"),
])
def test_violations_are_named(override, message):
    with pytest.raises(ScenarioError) as e:
        scenario_from_dict(_doc(**override))
    assert any(p.startswith(message) for p in e.value.problems), e.value.problems


def test_defaults_and_suite():
    sc = scenario_from_dict(_doc())
    assert sc.check == "bounds" and sc.phi == 512 and sc.seeds == (0,)
    text = json.dumps({"schema": SCHEMA, "scenarios": [_doc(id="a"), _doc(id="b", seeds="1..2")]})
    out = parse_scenario(text)
    assert [s.id for s in out] == ["a", "b"] and out[1].seeds == (1, 2)
    with pytest.raises(ScenarioError):
        parse_scenario("{not json")
