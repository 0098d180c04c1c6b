"""Run the delayed-set attack against the naive protocol and an under-querying committee.

    python3 scripts/attack_demo.py [n k f]
"""
import sys

from drsim.attack import AttackSetup, attack_grid
from drsim.committee import CommitteeHandler
from drsim.naive import NaiveHandler


def main(n: int = 8, k: int = 4, f: int = 2) -> None:
    setup = AttackSetup.default(n, k, f)
    print(f"target {setup.target}, delayed {sorted(setup.delayed)}, corrupted {sorted(setup.corrupted)}")
    for name, factory in [
        ("naive", lambda p: NaiveHandler(n)),
        ("committee on k-f peers, no redundancy", lambda p: CommitteeHandler(n, k, 0, 512, layout_k=k - f)),
    ]:
        fooled = [r.cell for r in attack_grid(factory, setup) if r.fooled]
        print(f"{name}: fooled on cells {fooled or 'none'}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:4]))
