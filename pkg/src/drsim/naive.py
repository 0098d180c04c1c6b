"""The baseline protocol: every peer queries every cell and sends nothing."""
from __future__ import annotations

from .engine import Handler


class NaiveHandler(Handler):
    """Queries the whole input; immune to any message-level attack."""

    def __init__(self, n: int) -> None:
        self.n = n

    def start(self, net):
        net.terminate(tuple(net.query_many(range(1, self.n + 1))))
