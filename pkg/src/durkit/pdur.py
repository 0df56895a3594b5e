"""Partitioned deferred update replication.

Each server runs one sequential process per logical partition; clients keep
one snapshot slot per partition and route reads by key ownership (directly,
or through their home process which forwards and relays transparently).
Cross-partition transactions terminate by exchanging votes between the
co-located processes of the involved partitions; unanimity commits.

Two termination pipelines, selected by the ordering mode:

* true-multicast: certify at the head of the resolution queue against the
  applied store, then block that queue (never the actor) on vote collection.
  Safe because common partitions deliver common transactions in the same
  relative order.
* per-partition broadcast: certify and send votes immediately at delivery,
  as a pure function of the instance's transcript prefix, and resolve
  outcomes strictly in delivery order afterwards. Blocking certification
  would deadlock here, since instances may deliver two cross-partition
  transactions in opposite orders. The certification state tracks locally
  committed transactions, a superset of globally committed ones, so the test
  stays conservative (never admits what applied-state certification would
  reject).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any, Optional

from .core import (
    ABORT,
    COMMIT,
    Key,
    PartitionMap,
    TxnId,
    Value,
    make_transaction,
    partitions_of,
)
from .messages import Call, Deliver, FwdReply, FwdReq, OutcomeMsg, ReadReply, ReadReq, VoteMsg
from .mvstore import Store
from .ordering import PER_PARTITION, OrderingLayer
from .recording import ActorLog
from .runtime import Runtime

ORDERED = "ordered"
BIDIRECTIONAL = "bidirectional"


def proc_name(server: int, partition: int) -> str:
    return f"s{server}.p{partition}"


class PdurTxn:
    """Client-side transaction state with a per-partition snapshot vector."""

    def __init__(
        self,
        tid: TxnId,
        home_server: int,
        home_partition: int,
        pmap: PartitionMap,
        ordering: OrderingLayer,
        direct_reads: bool = False,
    ):
        self.id = tid
        self.client = f"c{tid.client}"
        self.exec_server = home_server
        self.home = proc_name(home_server, home_partition)
        self.pmap = pmap
        self.ordering = ordering
        self.direct_reads = direct_reads
        self.st: list[Optional[int]] = [None] * pmap.p
        self.rs: set[Key] = set()
        self.ws: dict[Key, Value] = {}
        self.reads: list[tuple[Key, int, int]] = []
        self.txn = None
        self.verdict: Optional[str] = None

    def read(self, key: Key):
        self.rs.add(key)
        if key in self.ws:
            return self.ws[key]
        q = self.pmap.partition_of(key)
        dst = proc_name(self.exec_server, q) if self.direct_reads else self.home
        reply = yield Call(
            ((dst, ReadReq(self.client, self.id.seq, key, self.st[q])),),
            "read",
        )
        if reply.partition != q:
            raise AssertionError("read answered by the wrong partition")
        if self.st[q] is None:
            self.st[q] = reply.snap
        self.reads.append((key, q, reply.version))
        return reply.value

    def write(self, key: Key, value: Value) -> None:
        self.ws[key] = value

    def commit(self):
        self.txn = make_transaction(self.id, self.st, self.rs, self.ws)
        if self.txn.read_only:
            # Consistent snapshot reads terminate locally, no ordering traffic.
            self.verdict = COMMIT
            return COMMIT
        parts = partitions_of(self.txn, self.pmap)
        sends = tuple(self.ordering.submissions(self.client, self.txn, parts))
        reply = yield Call(sends, "outcome")
        self.verdict = reply.verdict
        return self.verdict

    @property
    def partitions(self) -> tuple[int, ...]:
        return partitions_of(self.txn, self.pmap)


@dataclass(slots=True)
class _Pending:
    """One delivered transaction queued for in-order outcome resolution."""

    deliver: Deliver
    parts: tuple[int, ...]
    local_verdict: Optional[str] = None
    version: Optional[int] = None
    sc_after: Optional[int] = None


class PartitionProcess:
    """Sequential executor owning one partition's store at one server.

    All processes of a server are assumed to fail together (they would share
    one OS process); crash simulation is out of scope, so nothing here
    exercises that assumption.
    """

    def __init__(
        self,
        server: int,
        partition: int,
        store: Store,
        pmap: PartitionMap,
        log: ActorLog,
        ordering_mode: str,
        cert_mode: str = ORDERED,
        gamma_t: float = 1.0,
        cert_enabled: bool = True,
    ):
        self.name = proc_name(server, partition)
        self.server = server
        self.pid = partition
        self.store = store
        self.pmap = pmap
        self.log = log
        self.eager = ordering_mode == PER_PARTITION
        self.cert_mode = cert_mode
        self.gamma_t = gamma_t
        self.cert_enabled = cert_enabled
        self.resolved_sc = store.sc
        self.delivered = 0
        self.queue: deque[_Pending] = deque()
        self.votes: dict[str, dict[int, str]] = {}
        # Certification indexes (versions on the same scale as store versions).
        # latest_write tracks locally committed writers; only the eager
        # pipeline consults it, the blocking one certifies against the store.
        self.latest_write: dict[Key, int] = {}
        self.latest_read: dict[Key, int] = {}

    # -- message handling ----------------------------------------------------

    def on_message(self, msg: Any, rt: Runtime) -> None:
        if isinstance(msg, ReadReq):
            self._client_read(msg, rt)
        elif isinstance(msg, FwdReq):
            value, version, snap = self._serve(msg.key, msg.st)
            rt.send(
                self.name,
                msg.home,
                FwdReply(msg.client, msg.txn_seq, msg.key, value, version, snap, self.pid),
            )
        elif isinstance(msg, FwdReply):
            rt.send(
                self.name,
                msg.client,
                ReadReply(msg.txn_seq, msg.key, msg.value, msg.version, msg.snap, msg.partition),
            )
        elif isinstance(msg, Deliver):
            if msg.seq != self.delivered + 1:
                raise AssertionError(f"{self.name}: delivery gap at seq {msg.seq}")
            self.delivered += 1
            self.log.deliveries.append(msg.txn.id)
            entry = _Pending(msg, partitions_of(msg.txn, self.pmap))
            if self.eager:
                self._certify_and_vote(entry, rt)
            self.queue.append(entry)
            self._pump(rt)
        elif isinstance(msg, VoteMsg):
            box = self.votes.setdefault(msg.txn_id_text, {})
            if msg.partition in box and box[msg.partition] != msg.verdict:
                raise AssertionError(f"conflicting votes for {msg.txn_id_text}")
            box[msg.partition] = msg.verdict
            self._pump(rt)
        else:
            raise TypeError(f"{self.name} got {type(msg).__name__}")

    def _client_read(self, msg: ReadReq, rt: Runtime) -> None:
        q = self.pmap.partition_of(msg.key)
        if q == self.pid:
            value, version, snap = self._serve(msg.key, msg.st)
            rt.send(
                self.name,
                msg.client,
                ReadReply(msg.txn_seq, msg.key, value, version, snap, self.pid),
            )
        else:
            # Transparent partitioning: fetch from the co-located owner.
            self.log.forwards += 1
            rt.send(
                self.name,
                proc_name(self.server, q),
                FwdReq(msg.client, msg.txn_seq, msg.key, msg.st, self.name),
            )

    def _serve(self, key: Key, st: Optional[int]) -> tuple[Value, int, int]:
        snap = st if st is not None else self.resolved_sc
        value, version = self.store.retrieve(key, snap)
        return value, version, snap

    # -- certification and termination ----------------------------------------

    def _owned_rs(self, txn) -> list[Key]:
        return [k for k in txn.rs if self.pmap.partition_of(k) == self.pid]

    def _owned_ws(self, txn) -> list[tuple[Key, Value]]:
        return [(k, v) for k, v in txn.ws if self.pmap.partition_of(k) == self.pid]

    def local_certify(self, txn) -> str:
        """This partition's verdict; bumps SC and the indexes on local commit.

        Unset snapshot slots count as version 0, the maximal conservative
        window: the client never read through this partition, so any
        committed activity on the touched keys forces an abort.
        """
        if self.cert_enabled:
            stq = txn.st[self.pid] if txn.st[self.pid] is not None else 0
            for key in self._owned_rs(txn):
                latest = (
                    self.latest_write.get(key, 0)
                    if self.eager
                    else self.store.latest_version(key)
                )
                if latest > stq:
                    return ABORT
            if self.cert_mode == BIDIRECTIONAL:
                for key, _ in self._owned_ws(txn):
                    if self.latest_read.get(key, 0) > stq:
                        return ABORT
        version = self.store.bump()
        if self.eager:
            for key, _ in self._owned_ws(txn):
                self.latest_write[key] = version
            if self.cert_mode == BIDIRECTIONAL:
                for key in self._owned_rs(txn):
                    self.latest_read[key] = version
        return COMMIT

    def _certify_and_vote(self, entry: _Pending, rt: Runtime) -> None:
        txn = entry.deliver.txn
        verdict = self.local_certify(txn)
        entry.local_verdict = verdict
        entry.sc_after = self.store.sc
        entry.version = self.store.sc if verdict == COMMIT else None
        self.log.charge((self.server, self.pid), self.gamma_t)
        if len(entry.parts) > 1:
            tid_text = str(txn.id)
            self.votes.setdefault(tid_text, {})[self.pid] = verdict
            for r in entry.parts:
                if r != self.pid:
                    rt.send(self.name, proc_name(self.server, r), VoteMsg(tid_text, self.pid, verdict))
                    self.log.votes_sent += 1

    def _pump(self, rt: Runtime) -> None:
        """Resolve queued deliveries in order; stop at the first vote wait."""
        while self.queue:
            entry = self.queue[0]
            if entry.local_verdict is None:
                self._certify_and_vote(entry, rt)
            if len(entry.parts) > 1:
                box = self.votes.get(str(entry.deliver.txn.id), {})
                if not set(entry.parts) <= set(box):
                    return  # vote collection blocks this queue, nothing else
                outcome = COMMIT if all(box[r] == COMMIT for r in entry.parts) else ABORT
            else:
                outcome = entry.local_verdict
            self._resolve(entry, outcome, rt)
            self.queue.popleft()

    def _resolve(self, entry: _Pending, outcome: str, rt: Runtime) -> None:
        txn = entry.deliver.txn
        if outcome == COMMIT:
            self.store.apply(self._owned_ws(txn), entry.version)
            if not self.eager and self.cert_mode == BIDIRECTIONAL:
                for key in self._owned_rs(txn):
                    self.latest_read[key] = entry.version
        self.resolved_sc = entry.sc_after
        self.votes.pop(str(txn.id), None)
        self.log.note_local(
            self.server,
            self.pid,
            txn.id,
            entry.local_verdict,
            outcome,
            entry.version if outcome == COMMIT else None,
        )
        rt.send(self.name, entry.deliver.client, OutcomeMsg(txn.id.seq, str(txn.id), outcome))


@dataclass(frozen=True, slots=True)
class ComparisonReport:
    """Outcome of running the same workload through both engines at P=1."""

    txns: int
    verdicts_equal: bool
    dumps_equal: bool
    mismatches: tuple[str, ...] = ()

    @property
    def equal(self) -> bool:
        return self.verdicts_equal and self.dumps_equal


def p1_equivalence_harness(
    spec, seed: int, txns: int = 100, clients: int = 2, n: int = 1
) -> ComparisonReport:
    """Run the partitioned engine at P=1 against the classical engine.

    Same workload, same ordering seed; the two runs must agree on every
    verdict and converge to byte-identical store dumps.
    """
    from .driver import RunConfig, run  # local import: driver wires both engines

    reports = []
    for engine in ("dur", "pdur"):
        cfg = RunConfig(
            engine=engine,
            mode="sim",
            n=n,
            partitions=1,
            clients=clients,
            workload=spec,
            seed=seed,
            txns=txns,
        )
        reports.append(run(cfg))
    a, b = reports
    va = [(str(t.tid), t.verdict) for t in a.history.txns]
    vb = [(str(t.tid), t.verdict) for t in b.history.txns]
    mismatches = tuple(
        f"{ta[0]}: dur={ta[1]} pdur={tb[1]}" for ta, tb in zip(va, vb) if ta != tb
    )
    return ComparisonReport(
        txns=len(va),
        verdicts_equal=va == vb,
        dumps_equal=a.dumps == b.dumps,
        mismatches=mismatches,
    )


