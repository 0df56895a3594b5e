"""Classical deferred update replication: one store per replica, one group.

Clients execute optimistically against a single pinned replica, buffering
writes; update transactions are multicast to the whole replica group, and
every replica certifies them in delivery order. A replica's state is a pure
function of the delivery transcript.
"""

from __future__ import annotations

from typing import Any, Optional

from .core import ABORT, COMMIT, Key, PartitionMap, TxnId, Value, make_transaction, partitions_of
from .messages import Call, Deliver, OutcomeMsg, ReadReply, ReadReq
from .mvstore import Store
from .ordering import OrderingLayer
from .recording import ActorLog
from .runtime import Runtime


class DurTxn:
    """Execution-phase state of one transaction (client side).

    The snapshot is a scalar, fixed by the first read that reaches the
    replica; buffered writes satisfy later reads of the same key without
    server contact.
    """

    def __init__(self, tid: TxnId, server: int, pmap: PartitionMap, ordering: OrderingLayer):
        self.id = tid
        self.client = f"c{tid.client}"
        self.exec_server = server
        self.replica = f"s{server}.p0"
        self.pmap = pmap
        self.ordering = ordering
        self.st: Optional[int] = None
        self.rs: set[Key] = set()
        self.ws: dict[Key, Value] = {}
        self.reads: list[tuple[Key, int, int]] = []  # (key, partition, version read)
        self.txn = None
        self.verdict: Optional[str] = None

    def read(self, key: Key):
        self.rs.add(key)
        if key in self.ws:
            return self.ws[key]
        reply = yield Call(
            ((self.replica, ReadReq(self.client, self.id.seq, key, self.st)),),
            "read",
        )
        if self.st is None:
            self.st = reply.snap
        self.reads.append((key, 0, reply.version))
        return reply.value

    def write(self, key: Key, value: Value) -> None:
        self.ws[key] = value

    def commit(self):
        self.txn = make_transaction(self.id, (self.st,), self.rs, self.ws)
        if self.txn.read_only:
            self.verdict = COMMIT
            return COMMIT
        sends = tuple(self.ordering.submissions(self.client, self.txn, (0,)))
        reply = yield Call(sends, "outcome")
        self.verdict = reply.verdict
        return self.verdict

    @property
    def partitions(self) -> tuple[int, ...]:
        return partitions_of(self.txn, self.pmap)


class DurReplica:
    """Server side: snapshot reads plus delivery-order certification."""

    def __init__(
        self,
        server: int,
        store: Store,
        log: ActorLog,
        gamma_t: float = 1.0,
        cert_enabled: bool = True,
    ):
        self.name = f"s{server}.p0"
        self.server = server
        self.store = store
        self.log = log
        self.gamma_t = gamma_t
        self.cert_enabled = cert_enabled
        self.delivered = 0

    def on_message(self, msg: Any, rt: Runtime) -> None:
        if isinstance(msg, ReadReq):
            self._read(msg, rt)
        elif isinstance(msg, Deliver):
            if msg.seq != self.delivered + 1:
                raise AssertionError(f"{self.name}: delivery gap at seq {msg.seq}")
            self.delivered += 1
            self.log.deliveries.append(msg.txn.id)
            self.on_deliver(msg, rt)
        else:
            raise TypeError(f"{self.name} got {type(msg).__name__}")

    def _read(self, msg: ReadReq, rt: Runtime) -> None:
        snap = msg.st if msg.st is not None else self.store.sc
        value, version = self.store.retrieve(msg.key, snap)
        rt.send(self.name, msg.client, ReadReply(msg.txn_seq, msg.key, value, version, snap, 0))

    def certify(self, txn) -> str:
        """Abort iff some key read has a committed version newer than the snapshot."""
        if self.cert_enabled:
            st = txn.st[0] if txn.st[0] is not None else 0
            for key in txn.rs:
                if self.store.latest_version(key) > st:
                    return ABORT
        self.store.bump()
        return COMMIT

    def on_deliver(self, d: Deliver, rt: Runtime) -> None:
        verdict = self.certify(d.txn)
        version = self.store.sc if verdict == COMMIT else None
        if verdict == COMMIT:
            self.store.apply(d.txn.ws, version)
        self.log.charge((self.server, 0), self.gamma_t)
        self.log.note_local(self.server, 0, d.txn.id, verdict, verdict, version)
        rt.send(self.name, d.client, OutcomeMsg(d.txn.id.seq, str(d.txn.id), verdict))
