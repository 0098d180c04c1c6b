from drsim.attack import AttackSetup, attack_grid, record_reference, run_attack
from drsim.committee import CommitteeHandler
from drsim.naive import NaiveHandler


def test_default_setup():
    s = AttackSetup.default(8, 4, 2)
    assert s.target == 1 and s.delayed == {3, 4} and s.corrupted == {2}


def test_naive_protocol_is_never_fooled():
    s = AttackSetup.default(8, 4, 2)
    assert not any(r.fooled for r in attack_grid(lambda p: NaiveHandler(8), s))


def test_under_querying_committee_is_fooled():
    s = AttackSetup.default(8, 4, 2)
    res = attack_grid(lambda p: CommitteeHandler(8, 4, 0, 512, layout_k=2), s)
    assert [r.cell for r in res if r.fooled] == [2, 4, 6, 8]


def test_reference_holds_corrupted_logs():
    s = AttackSetup.default(8, 4, 2)
    ref = record_reference(lambda p: CommitteeHandler(8, 4, 0, 512, layout_k=2), s)
    assert set(ref) == {2} and ref[2]
    r = run_attack(lambda p: NaiveHandler(8), s, 5)
    assert r.target_output == (0, 0, 0, 0, 1, 0, 0, 0)
