"""Experiment descriptions: a versioned JSON schema, defaults and validation."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .adversary import builtin_strategies

SCHEMA = "drsim/1"
PROTOCOLS = ("crash1", "crashF", "crashF_opt", "byz_committee", "byz_2cycle", "byz_multicycle",
             "naive", "odc_naive", "odc_download")
CHECK_LEVELS = ("off", "bounds", "full")
BYZ_RAND = ("byz_2cycle", "byz_multicycle")
ODC = ("odc_naive", "odc_download")


class ScenarioError(ValueError):
    """Every problem found in a config, one message per violated constraint."""

    def __init__(self, problems: list) -> None:
        super().__init__("; ".join(problems))
        self.problems = list(problems)


@dataclass(frozen=True)
class Scenario:
    id: str
    protocol: str
    n: int
    k: int
    f: int = 0
    beta: float = 0.0
    phi: int = 512
    c: float = 1.0
    adversary: dict = field(default_factory=lambda: {"name": "seeded_random"})
    seeds: tuple = (0,)
    check: str = "bounds"
    phi_seg: int | None = None
    threshold: str = "gamma_minus_beta"
    m: int = 5
    beta_d: float = 0.4
    w: int = 32
    f_peers: int = 0
    source_modes: tuple = ("inflate", "deflate", "equivocate")

    @property
    def byz_count(self) -> int:
        if self.protocol == "byz_committee":
            return self.f
        if self.protocol in BYZ_RAND:
            return int(self.beta * self.k + 1e-9)
        return 0

    def echo(self, seed: int) -> dict:
        d = {"id": self.id, "seed": seed, "protocol": self.protocol, "n": self.n, "k": self.k,
             "adversary": self.adversary.get("name", "")}
        if self.protocol in BYZ_RAND:
            d["beta"] = self.beta
        elif self.protocol in ODC:
            d["beta"] = self.beta_d
        else:
            d["f"] = self.f
        return d


def parse_seeds(spec) -> tuple:
    """An int, a list of ints, "a..b" (inclusive) or {"from": a, "to": b}."""
    if isinstance(spec, bool):
        raise ValueError("seeds must be integers")
    if isinstance(spec, int):
        return (spec,)
    if isinstance(spec, str):
        m = re.fullmatch(r"\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*", spec)
        if not m:
            raise ValueError(f"seed range {spec!r} is not of the form a..b")
        a, b = int(m.group(1)), int(m.group(2))
        if b < a:
            raise ValueError(f"seed range {spec!r} is empty")
        return tuple(range(a, b + 1))
    if isinstance(spec, dict):
        return parse_seeds(f"{spec['from']}..{spec['to']}")
    if isinstance(spec, list) and spec and all(isinstance(s, int) and not isinstance(s, bool) for s in spec):
        return tuple(spec)
    raise ValueError(f"cannot read seeds from {spec!r}")


_FIELDS = {"schema", "id", "protocol", "n", "k", "f", "beta", "phi", "c", "adversary", "seeds", "check",
           "phi_seg", "threshold", "m", "beta_d", "w", "f_peers", "source_modes"}


def _int(doc, key, problems, lo=None):
    v = doc.get(key)
    if v is None:
        return None
    if not isinstance(v, int) or isinstance(v, bool):
        problems.append(f"{key} must be an integer")
        return None
    if lo is not None and v < lo:
        problems.append(f"{key} >= {lo} required, got {v}")
    return v


def scenario_from_dict(doc: dict, index: int = 0) -> Scenario:
    problems = []
    if doc.get("schema") != SCHEMA:
        problems.append(f"schema must be {SCHEMA!r}")
    extra = sorted(set(doc) - _FIELDS)
    if extra:
        problems.append(f"unknown fields: {', '.join(extra)}")
    proto = doc.get("protocol")
    if proto not in PROTOCOLS:
        problems.append(f"protocol must be one of {', '.join(PROTOCOLS)}")
    n = _int(doc, "n", problems, 1)
    k = _int(doc, "k", problems, 1)
    if n is None and "n" not in doc:
        problems.append("n is required")
    if k is None and "k" not in doc:
        problems.append("k is required")
    f = _int(doc, "f", problems, 0) or 0
    phi = _int(doc, "phi", problems, 1)
    beta = doc.get("beta", 0.0)
    c = doc.get("c", 1.0)
    check = doc.get("check", "bounds")
    if check not in CHECK_LEVELS:
        problems.append(f"check must be one of {', '.join(CHECK_LEVELS)}")
    adv = doc.get("adversary", {"name": "seeded_random"})
    if isinstance(adv, str):
        adv = {"name": adv}
    if not isinstance(adv, dict) or adv.get("name") not in builtin_strategies():
        problems.append(f"adversary name must be one of {', '.join(sorted(builtin_strategies()))}")
    try:
        seeds = parse_seeds(doc.get("seeds", 0))
    except (ValueError, KeyError, TypeError) as e:
        problems.append(str(e))
        seeds = (0,)
    if not isinstance(c, (int, float)) or c < 1:
        problems.append("c >= 1 required")
    if k is not None and n is not None and proto in PROTOCOLS:
        if proto == "crash1":
            if k < 2:
                problems.append("k >= 2 required")
            if f > 1:
                problems.append("f <= 1 required (single-crash protocol)")
        if proto in ("crashF", "crashF_opt") and not f < k:
            problems.append("0 <= f < k required")
        if proto == "byz_committee" and 2 * f + 1 > k:
            problems.append("2f+1 <= k required")
        if proto in BYZ_RAND:
            if not isinstance(beta, (int, float)) or not 0 <= beta < 0.5:
                problems.append("0 <= beta < 1/2 required")
            if n < 2:
                problems.append("n >= 2 required")
        if proto in ODC:
            m = _int(doc, "m", problems, 1) or 5
            bd = doc.get("beta_d", 0.4)
            if not isinstance(bd, (int, float)) or not 0 <= bd <= 0.5:
                problems.append("beta_d <= 1/2 required")
            elif 2 * math.ceil(m * bd - 1e-9) + 1 > m:
                problems.append("2*ceil(m*beta_d)+1 <= m required")
            fp = _int(doc, "f_peers", problems, 0) or 0
            if proto == "odc_download" and not 3 * fp < k:
                problems.append("3*f_peers < k required")
            w = _int(doc, "w", problems, 1) or 32
            if w > 62:
                problems.append("w <= 62 required")
        if adv.get("name") == "random_crash" or adv.get("name", "").startswith("crash"):
            if proto not in ("crash1", "crashF", "crashF_opt"):
                problems.append("crash adversaries apply to crash1/crashF/crashF_opt only")
    phi_seg = _int(doc, "phi_seg", problems, 1)
    if phi_seg is not None and n is not None and phi_seg > n:
        problems.append("phi_seg <= n required")
    if doc.get("threshold", "gamma_minus_beta") not in ("gamma_minus_beta", "literal"):
        problems.append("threshold must be gamma_minus_beta or literal")
    if problems:
        raise ScenarioError(problems)
    modes = doc.get("source_modes", ["inflate", "deflate", "equivocate"])
    return Scenario(
        id=str(doc.get("id", f"s{index}")), protocol=proto, n=n, k=k, f=f, beta=float(beta),
        phi=phi or 512, c=float(c), adversary=dict(adv), seeds=seeds, check=check,
        phi_seg=phi_seg, threshold=doc.get("threshold", "gamma_minus_beta"),
        m=doc.get("m", 5), beta_d=float(doc.get("beta_d", 0.4)), w=doc.get("w", 32),
        f_peers=doc.get("f_peers", 0), source_modes=tuple([modes] if isinstance(modes, str) else modes),
    )


def parse_scenario(text: str) -> list:
    """A JSON document holding one scenario or {"schema", "scenarios": [...]}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError([f"not valid JSON: {e}"]) from None
    if not isinstance(doc, dict):
        raise ScenarioError(["top level must be a JSON object"])
    if "scenarios" in doc:
        if doc.get("schema") != SCHEMA:
            raise ScenarioError([f"schema must be {SCHEMA!r}"])
        out, problems = [], []
        for idx, item in enumerate(doc["scenarios"]):
            try:
                out.append(scenario_from_dict({"schema": SCHEMA, **item}, idx))
            except ScenarioError as e:
                problems.extend(f"scenario {idx}: {p}" for p in e.problems)
        if problems:
            raise ScenarioError(problems)
        return out
    return [scenario_from_dict(doc)]
