"""Q_max against the multi-crash bound over many seeds, per (n, k, f).

    python3 scripts/sweep_multi_crash.py [seeds]
"""
import sys
import time

from drsim.crash_multi import phase_limit, query_bound_multi
from drsim.runner import run_one
from drsim.scenario import Scenario

CONFIGS = [(1024, 4, 2), (1024, 8, 6), (4096, 16, 12), (4096, 16, 1)]


def main(seeds: int = 200) -> None:
    print(f"{'n':>5} {'k':>3} {'f':>3} {'P':>3} {'bound':>6} {'Q_max':>6} {'over':>5} {'extra':>6} {'wrong':>6} {'sec':>5}")
    for n, k, f in CONFIGS:
        t0 = time.time()
        sc = Scenario("sweep", "crashF", n, k, f=f, adversary={"name": "random_crash", "horizon": 4.0})
        q = over = extra = wrong = 0
        for s in range(seeds):
            r = run_one(sc, s)
            q = max(q, r.report.Q_max)
            over += any(v.startswith("query bound") for v in r.violations)
            extra = max(extra, r.diagnostics.get("extra_queries", 0))
            wrong += r.report.verdict != "Correct"
        print(f"{n:>5} {k:>3} {f:>3} {phase_limit(n, k, f):>3} {query_bound_multi(n, k, f):>6} {q:>6} "
              f"{over:>5} {extra:>6} {wrong:>6} {time.time() - t0:>5.0f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 200)
