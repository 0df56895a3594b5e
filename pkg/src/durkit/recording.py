"""Per-actor run logs, merged into a History after a run quiesces.

Each actor owns exactly one ActorLog and is its only writer, so no locking
is needed in either runtime; the driver merges the logs afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import Key, TxnId, Value


@dataclass(frozen=True, slots=True)
class ClientTxnRecord:
    """What the client knows about one terminated transaction."""

    tid: TxnId
    st: tuple[Optional[int], ...]
    rs: tuple[Key, ...]
    ws: tuple[tuple[Key, Value], ...]
    verdict: str
    partitions: tuple[int, ...]
    read_only: bool
    latency: float
    reads: tuple[tuple[Key, int, int], ...]  # (key, partition, version read)


@dataclass(slots=True)
class ActorLog:
    """Single-writer event buffer for one actor."""

    txns: list[ClientTxnRecord] = field(default_factory=list)
    # (server, partition, txn) -> (local verdict, outcome, version or None)
    local: dict[tuple[int, int, TxnId], tuple[str, str, Optional[int]]] = field(
        default_factory=dict
    )
    costs: dict[tuple[int, int], float] = field(default_factory=dict)
    deliveries: list[TxnId] = field(default_factory=list)  # in received order
    votes_sent: int = 0
    forwards: int = 0

    def note_txn(self, record: ClientTxnRecord) -> None:
        self.txns.append(record)

    def note_local(
        self,
        server: int,
        partition: int,
        tid: TxnId,
        local_verdict: str,
        outcome: str,
        version: Optional[int],
    ) -> None:
        key = (server, partition, tid)
        if key in self.local:
            raise AssertionError(f"duplicate termination of {tid} at s{server}.p{partition}")
        self.local[key] = (local_verdict, outcome, version)

    def charge(self, executor: tuple[int, int], cost: float) -> None:
        self.costs[executor] = self.costs.get(executor, 0.0) + cost
