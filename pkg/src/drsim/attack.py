"""Runs the delayed-set / replay attack against a protocol.

A protocol is given as ``factory(pid) -> Handler``. The attack first
records a reference execution on the all-zeros input in which the delayed
peers crash at the start, then runs the real input (all zeros except one
cell) with the corrupted peers replaying their reference messages and the
delayed peers' traffic held until the target has produced its output.
"""
from __future__ import annotations

from dataclasses import dataclass

from .adversary import CrashPlan, RecordingHandler, UniformLatency, indistinguishability_attack
from .core_model import InputArray
from .engine import ExecutionTrace, simulate


@dataclass(frozen=True)
class AttackSetup:
    n: int
    k: int
    f: int
    target: int
    delayed: frozenset
    corrupted: frozenset

    @classmethod
    def default(cls, n: int, k: int, f: int) -> "AttackSetup":
        """Target peer 1, delay the last f peers, corrupt the peers in between."""
        delayed = frozenset(range(k - f + 1, k + 1))
        corrupted = frozenset(range(2, k - f + 1))
        return cls(n, k, f, 1, delayed, corrupted)


@dataclass
class AttackResult:
    cell: int
    target_output: tuple | None
    fooled: bool
    trace: ExecutionTrace


def record_reference(factory, setup: AttackSetup) -> dict:
    """Logs of the corrupted peers in the all-zeros run with the delayed set silent."""
    hs = {}
    for p in range(1, setup.k + 1):
        h = factory(p)
        hs[p] = RecordingHandler(h) if p in setup.corrupted else h
    adv = CrashPlan(UniformLatency(1.0), at_mark={p: "start" for p in setup.delayed})
    simulate(setup.k, InputArray.zeros(setup.n), hs, adv)
    return {p: hs[p].log for p in setup.corrupted}


def run_attack(factory, setup: AttackSetup, cell: int, reference: dict | None = None) -> AttackResult:
    """Attack the input with a single 1 at ``cell``; fooled means the target got it wrong."""
    if reference is None:
        reference = record_reference(factory, setup)
    vals = [0] * setup.n
    vals[cell - 1] = 1
    x = InputArray(tuple(vals))
    adv, replay = indistinguishability_attack(setup.target, setup.delayed, setup.corrupted, x, reference, setup.f)
    hs = {p: replay.get(p) or factory(p) for p in range(1, setup.k + 1)}
    trace = simulate(setup.k, x, hs, adv, byzantine=setup.corrupted,
                     scenario={"attack": "delayed_set", "cell": cell})
    out = trace.peers[setup.target - 1].output
    fooled = out is None or tuple(out) != x.values
    return AttackResult(cell, out, fooled, trace)


def attack_grid(factory, setup: AttackSetup) -> list:
    """One attacked execution per cell, sharing a single reference run."""
    ref = record_reference(factory, setup)
    return [run_attack(factory, setup, i, ref) for i in range(1, setup.n + 1)]
