"""Ordered group delivery without consensus machinery.

The delivery contract is: (a) a submitted payload reaches every subscriber
of every destination instance, (b) subscribers of one instance see identical
delivery sequences, and (c) in true-multicast mode, instances also agree on
the relative order of payloads they share. A logical sequencer per scope
provides the contract; the consensus protocol that would provide it over an
unreliable network is out of scope.

Two modes:

* true-multicast: one global sequencer actor orders every submission, so
  overlapping destination sets are ordered consistently everywhere.
* per-partition-broadcast: one independent sequencer actor per instance; a
  submission to several instances is a separate submission to each, so two
  instances may deliver a pair of shared payloads in opposite orders. This
  mode deliberately breaks cross-instance order (the stronger certification
  test exists to survive it).
"""

from __future__ import annotations

import random
import threading
import time
from collections import deque
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

from .core import PartitionId, Transaction, TxnId
from .messages import Deliver, Submit
from .runtime import Runtime

TRUE_MULTICAST = "true-multicast"
PER_PARTITION = "per-partition"

# A delivery event is the Deliver message itself: (instance, dense per-instance
# seq, payload = (client, txn)).
DeliveryEvent = Deliver


@dataclass(frozen=True, slots=True)
class Group:
    """Static membership of one partition instance: one process per server."""

    instance: PartitionId
    members: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("groups must be non-empty")


class _InstanceState:
    __slots__ = ("members", "seq", "transcript")

    def __init__(self, members: tuple[str, ...]) -> None:
        self.members = members
        self.seq = 0
        self.transcript: list[TxnId] = []


class _SequencerActor:
    """Orders submissions for one or more instances and pushes deliveries."""

    def __init__(self, name: str, layer: "OrderingLayer", instances: Sequence[PartitionId]):
        self.name = name
        self.layer = layer
        self.instances = tuple(instances)

    def on_message(self, msg: Any, rt: Runtime) -> None:
        if not isinstance(msg, Submit):
            raise TypeError(f"sequencer got {type(msg).__name__}")
        for instance in msg.instances:
            if instance not in self.instances:
                raise ValueError(f"{self.name} does not order instance {instance}")
            self.layer._deliver(instance, msg.client, msg.txn, rt, self.name)


class OrderingLayer:
    """Wires sequencer actors for a run and records their transcripts."""

    def __init__(self, mode: str, groups: Iterable[Group]):
        if mode not in (TRUE_MULTICAST, PER_PARTITION):
            raise ValueError(f"unknown ordering mode {mode!r}")
        self.mode = mode
        self.state: dict[PartitionId, _InstanceState] = {}
        self._subscriptions: dict[str, list[PartitionId]] = {}
        for g in sorted(groups, key=lambda g: g.instance):
            if g.instance in self.state:
                raise ValueError(f"duplicate instance {g.instance}")
            self.state[g.instance] = _InstanceState(g.members)
            for m in g.members:
                self._subscriptions.setdefault(m, []).append(g.instance)
        self._feeds: dict[str, deque[DeliveryEvent]] = {m: deque() for m in self._subscriptions}
        self._feed_lock = threading.Lock()
        self.deliveries_sent = 0
        if mode == TRUE_MULTICAST:
            self.actors: list[_SequencerActor] = [
                _SequencerActor("ord", self, sorted(self.state))
            ]
        else:
            self.actors = [
                _SequencerActor(f"ord{q}", self, (q,)) for q in sorted(self.state)
            ]

    # -- submission side ---------------------------------------------------

    def submissions(
        self, client: str, txn: Transaction, instances: Sequence[PartitionId]
    ) -> list[tuple[str, Submit]]:
        """(destination, Submit) pairs a client must send to order `txn`."""
        parts = tuple(sorted(instances))
        if not parts:
            raise ValueError("destination set must be non-empty")
        if self.mode == TRUE_MULTICAST:
            return [("ord", Submit(client, txn, parts))]
        return [(f"ord{q}", Submit(client, txn, (q,))) for q in parts]

    def amcast(
        self,
        rt: Runtime,
        src: str,
        txn: Transaction,
        instances: Sequence[PartitionId],
    ) -> None:
        for dst, msg in self.submissions(src, txn, instances):
            rt.send(src, dst, msg)

    # -- delivery side -----------------------------------------------------

    def _deliver(
        self,
        instance: PartitionId,
        client: str,
        txn: Transaction,
        rt: Runtime,
        src: str,
    ) -> None:
        st = self.state[instance]
        st.seq += 1
        st.transcript.append(txn.id)
        event = Deliver(instance, st.seq, client, txn)
        for member in st.members:
            rt.send(src, member, event)
            self.deliveries_sent += 1
        with self._feed_lock:
            for member in st.members:
                self._feeds[member].append(event)

    def next_delivery(
        self, process: str, block: bool = False, timeout: Optional[float] = None
    ) -> Optional[DeliveryEvent]:
        """Pull the next delivery for `process` in per-instance order.

        Returns None as the end-of-run sentinel when nothing is pending (or,
        with block=True, when `timeout` elapses first).
        """
        if process not in self._feeds:
            raise KeyError(f"{process} subscribes to no instance")
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            with self._feed_lock:
                feed = self._feeds[process]
                if feed:
                    return feed.popleft()
            if not block or (deadline is not None and time.monotonic() >= deadline):
                return None
            time.sleep(0.0005)

    # -- observability -----------------------------------------------------

    def transcript(self, instance: PartitionId) -> list[TxnId]:
        return list(self.state[instance].transcript)

    def transcripts(self) -> dict[PartitionId, list[TxnId]]:
        return {q: list(st.transcript) for q, st in self.state.items()}

    def transcript_dump(self) -> str:
        """One line per delivery: instance<TAB>seq<TAB>txn-id."""
        lines = []
        for q in sorted(self.state):
            for i, tid in enumerate(self.state[q].transcript, start=1):
                lines.append(f"{q}\t{i}\t{tid}")
        return "\n".join(lines) + ("\n" if lines else "")


def interleave(
    seed: int,
    submissions: Sequence[tuple[str, TxnId, tuple[PartitionId, ...]]],
    mode: str = TRUE_MULTICAST,
) -> dict[PartitionId, list[TxnId]]:
    """Deterministic simulation-mode schedule for a batch of submissions.

    `submissions` lists (client, txn id, destination instances) in per-client
    submission order; the result maps each instance to its delivery
    transcript. Per-client FIFO order is preserved; everything else is decided
    by the seed. Replaying one seed reproduces the schedule exactly.
    """
    if mode not in (TRUE_MULTICAST, PER_PARTITION):
        raise ValueError(f"unknown ordering mode {mode!r}")
    rng = random.Random(seed)
    instances = sorted({q for _, _, parts in submissions for q in parts})
    transcripts: dict[PartitionId, list[TxnId]] = {q: [] for q in instances}

    def merge(rng: random.Random, entries: Sequence[tuple[str, TxnId]]) -> list[TxnId]:
        pending: dict[str, deque[TxnId]] = {}
        for client, tid in entries:
            pending.setdefault(client, deque()).append(tid)
        order: list[TxnId] = []
        while pending:
            client = rng.choice(sorted(pending))
            q = pending[client]
            order.append(q.popleft())
            if not q:
                del pending[client]
        return order

    if mode == TRUE_MULTICAST:
        global_order = merge(rng, [(c, tid) for c, tid, _ in submissions])
        dests = {tid: parts for _, tid, parts in submissions}
        for tid in global_order:
            for q in dests[tid]:
                transcripts[q].append(tid)
    else:
        for q in instances:
            entries = [(c, tid) for c, tid, parts in submissions if q in parts]
            transcripts[q] = merge(random.Random(f"{seed}:{q}"), entries)
    return transcripts
