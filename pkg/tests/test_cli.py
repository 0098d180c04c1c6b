import json
from pathlib import Path

import pytest

from drsim import cli, crash_multi
from drsim.scenario import SCHEMA

SMOKE = Path(__file__).resolve().parents[1] / "configs" / "crashF_smoke.json"


def _write(tmp_path, scenarios):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"schema": SCHEMA, "scenarios": scenarios}))
    return p


SMALL = [
    {"id": "c1", "protocol": "crash1", "n": 24, "k": 4, "f": 1, "adversary": "random_crash", "seeds": "0..3"},
    {"id": "cf", "protocol": "crashF", "n": 128, "k": 4, "f": 2, "adversary": {"name": "random_crash"},
     "seeds": "0..3", "check": "full"},
    {"id": "nv", "protocol": "naive", "n": 16, "k": 3, "adversary": "uniform", "seeds": 1},
]


def test_run_writes_outputs_and_passes(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o"), "--no-timestamp", "--trace"]) == 0
    out = tmp_path / "o"
    rows = (out / "results.csv").read_text().splitlines()
    assert len(rows) == 1 + 4 + 4 + 1
    assert "TOTAL runs=9 violating=0 -> PASS" in (out / "summary.txt").read_text()
    trace = json.loads((out / "trace-cf-2.json").read_text())
    assert trace["verdict"] == "Correct"


def test_no_timestamp_output_is_reproducible(tmp_path):
    cfg = _write(tmp_path, SMALL)
    cli.main(["run", str(cfg), "--out", str(tmp_path / "a"), "--no-timestamp"])
    cli.main(["run", str(cfg), "--out", str(tmp_path / "b"), "--no-timestamp", "--parallel", "2"])
    for name in ("results.csv", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_timestamp_column(tmp_path):
    cfg = _write(tmp_path, SMALL[2:])
    cli.main(["run", str(cfg), "--out", str(tmp_path)])
    assert (tmp_path / "results.csv").read_text().splitlines()[0].endswith(",timestamp")


def test_seed_override(tmp_path):
    cfg = _write(tmp_path, SMALL[2:])
    cli.main(["run", str(cfg), "--out", str(tmp_path), "--seeds", "5..7", "--no-timestamp"])
    assert [r.split(",")[1] for r in (tmp_path / "results.csv").read_text().splitlines()[1:]] == ["5", "6", "7"]


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, [{"id": "b", "protocol": "byz_committee", "n": 10, "k": 4, "f": 2}])
    assert cli.main(["run", str(cfg), "--out", str(tmp_path)]) == 2
    assert "2f+1 <= k required" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2


def test_broken_reassignment_is_caught(tmp_path, monkeypatch):
    # everything handed to peer 1: the per-phase unknown bound breaks
    monkeypatch.setattr(crash_multi, "reassign_balanced", lambda idx, k, favored=(): {i: 1 for i in idx})
    cfg = _write(tmp_path, [{"id": "m", "protocol": "crashF", "n": 1024, "k": 8, "f": 6,
                             "adversary": {"name": "random_crash", "horizon": 4.0}, "seeds": "0..4"}])
    assert cli.main(["run", str(cfg), "--out", str(tmp_path), "--no-timestamp"]) == 1
    assert "unknown cells" in (tmp_path / "summary.txt").read_text()


@pytest.mark.slow
def test_smoke_config_passes(tmp_path):
    assert cli.main(["run", str(SMOKE), "--out", str(tmp_path), "--no-timestamp", "--parallel", "4"]) == 0
