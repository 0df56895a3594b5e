"""Offline serializability validation of recorded histories.

Two independent routes are implemented on purpose:

* build_appendix_order / verify_serial realize the constructive argument:
  order committed update transactions by delivery where they share a
  partition (descending id breaks remaining ties) and replay every
  reads-from fact against that serial order.
* conflict_graph_check is the textbook serialization-graph test (wr, ww, rw
  edges, pass iff acyclic), usable even when per-partition broadcast makes
  cross-instance delivery order ill-defined.

replay_verdicts is a third, batch re-derivation of every certification
verdict straight from the transcripts; it is the oracle engine runs are
compared against.
"""

from __future__ import annotations

import graphlib
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .core import ABORT, COMMIT, Key, PartitionMap, TxnId, Value

T0 = TxnId(-1, 0)  # virtual transaction that populated the database at version 0


class OrderingInconsistency(AssertionError):
    """Common partitions delivered two transactions in contradictory orders."""


@dataclass(frozen=True, slots=True)
class HTxn:
    """One terminated transaction as recorded in a history."""

    tid: TxnId
    st: tuple[Optional[int], ...]
    rs: tuple[Key, ...]
    ws: tuple[tuple[Key, Value], ...]
    verdict: str
    commit_versions: tuple[tuple[int, int], ...]  # (partition, version), committed only
    partitions: tuple[int, ...]
    seqs: tuple[tuple[int, int], ...]  # (instance, delivery seq), updates only

    @property
    def read_only(self) -> bool:
        return not self.ws

    def version_at(self, partition: int) -> Optional[int]:
        return dict(self.commit_versions).get(partition)

    def seq_at(self, partition: int) -> Optional[int]:
        return dict(self.seqs).get(partition)


@dataclass(frozen=True, slots=True)
class ReadsFrom:
    reader: TxnId
    key: Key
    writer: Optional[TxnId]  # None means the initial population


@dataclass(slots=True)
class History:
    """A recorded execution: terminated transactions plus reads-from facts."""

    txns: list[HTxn] = field(default_factory=list)
    reads_from: list[ReadsFrom] = field(default_factory=list)
    meta: dict[str, str] = field(default_factory=dict)

    def committed(self) -> list[HTxn]:
        return [t for t in self.txns if t.verdict == COMMIT]

    def committed_updates(self) -> list[HTxn]:
        return [t for t in self.txns if t.verdict == COMMIT and not t.read_only]

    def pmap(self) -> PartitionMap:
        p = int(self.meta.get("P", "1"))
        prefix = self.meta.get("key_prefix", "-")
        return PartitionMap(p, None if prefix == "-" else int(prefix))

    # -- file grammar --------------------------------------------------------
    # Header lines are `# key=value`. Then one record per line:
    #   TXN <id> <st-vector> <rs> <ws> <verdict> <commit-versions> <partitions> <seqs>
    #   READSFROM <reader> <key-hex> <writer|T0>
    # Vectors/sets are comma-joined, `-` when empty; st slots use `-` for unset;
    # ws entries are keyhex:valuehex; versions and seqs are partition:number.

    def to_text(self) -> str:
        lines = [f"# {k}={self.meta[k]}" for k in sorted(self.meta)]
        for t in self.txns:
            st = ",".join("-" if s is None else str(s) for s in t.st)
            rs = ",".join(k.hex() for k in t.rs) or "-"
            ws = ",".join(f"{k.hex()}:{v.hex()}" for k, v in t.ws) or "-"
            cv = ",".join(f"{q}:{v}" for q, v in t.commit_versions) or "-"
            parts = ",".join(str(q) for q in t.partitions) or "-"
            seqs = ",".join(f"{q}:{s}" for q, s in t.seqs) or "-"
            lines.append(f"TXN {t.tid} {st} {rs} {ws} {t.verdict} {cv} {parts} {seqs}")
        for f in self.reads_from:
            writer = "T0" if f.writer is None else str(f.writer)
            lines.append(f"READSFROM {f.reader} {f.key.hex()} {writer}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "History":
        h = cls()
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, eq, value = line[1:].strip().partition("=")
                if eq:
                    h.meta[key] = value
                continue
            kind, *fields = line.split(" ")
            if kind == "TXN":
                tid, st, rs, ws, verdict, cv, parts, seqs = fields
                h.txns.append(
                    HTxn(
                        tid=TxnId.parse(tid),
                        st=tuple(None if s == "-" else int(s) for s in st.split(",")),
                        rs=tuple(bytes.fromhex(k) for k in rs.split(",")) if rs != "-" else (),
                        ws=tuple(
                            (bytes.fromhex(kv.split(":")[0]), bytes.fromhex(kv.split(":")[1]))
                            for kv in ws.split(",")
                        )
                        if ws != "-"
                        else (),
                        verdict=verdict,
                        commit_versions=_pairs(cv),
                        partitions=tuple(int(q) for q in parts.split(",")) if parts != "-" else (),
                        seqs=_pairs(seqs),
                    )
                )
            elif kind == "READSFROM":
                reader, key, writer = fields
                h.reads_from.append(
                    ReadsFrom(
                        TxnId.parse(reader),
                        bytes.fromhex(key),
                        None if writer == "T0" else TxnId.parse(writer),
                    )
                )
            else:
                raise ValueError(f"unknown record {kind!r}")
        return h

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path: str) -> "History":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def _pairs(raw: str) -> tuple[tuple[int, int], ...]:
    if raw == "-":
        return ()
    return tuple((int(a), int(b)) for a, b in (tok.split(":") for tok in raw.split(",")))


# ---------------------------------------------------------------------------
# constructive serial order


def check_delivery_consistency(txns: Sequence[HTxn]) -> None:
    """Common partitions must agree on the relative order of shared deliveries."""
    by_instance: dict[int, list[HTxn]] = {}
    for t in txns:
        for q, _ in t.seqs:
            by_instance.setdefault(q, []).append(t)
    instances = sorted(by_instance)
    for i, q in enumerate(instances):
        for r in instances[i + 1 :]:
            shared = [t for t in by_instance[q] if t.seq_at(r) is not None]
            shared.sort(key=lambda t: t.seq_at(q))
            seqs_r = [t.seq_at(r) for t in shared]
            if any(b <= a for a, b in zip(seqs_r, seqs_r[1:])):
                raise OrderingInconsistency(
                    f"instances {q} and {r} disagree on shared delivery order"
                )


def build_appendix_order(h: History) -> tuple[TxnId, ...]:
    """Serial order: delivery order where partitions are shared, bigger id first otherwise.

    Requires a cross-instance-consistent delivery order (true multicast);
    contradictory shared orders raise OrderingInconsistency. Delivery-order
    constraints are hard edges; the descending-id rule for disjoint pairs is
    realized as the topological tie-break.
    """
    txns = h.committed_updates()
    check_delivery_consistency(txns)
    successors: dict[TxnId, set[TxnId]] = {t.tid: set() for t in txns}
    indegree: dict[TxnId, int] = {t.tid: 0 for t in txns}
    by_instance: dict[int, list[HTxn]] = {}
    for t in txns:
        for q, _ in t.seqs:
            by_instance.setdefault(q, []).append(t)
    for q, members in by_instance.items():
        members.sort(key=lambda t: t.seq_at(q))
        for a, b in zip(members, members[1:]):
            if b.tid not in successors[a.tid]:
                successors[a.tid].add(b.tid)
                indegree[b.tid] += 1
    # Kahn's algorithm, always emitting the largest available id first.
    import heapq

    ready = [(-t.client, -t.seq) for t, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order: list[TxnId] = []
    while ready:
        c, s = heapq.heappop(ready)
        tid = TxnId(-c, -s)
        order.append(tid)
        for nxt in successors[tid]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, (-nxt.client, -nxt.seq))
    if len(order) != len(txns):
        raise OrderingInconsistency("delivery constraints contain a cycle")
    return tuple(order)


@dataclass(frozen=True, slots=True)
class SerialVerdict:
    ok: bool
    violation: Optional[tuple[TxnId, Optional[TxnId], TxnId]] = None  # (writer, interposed, reader)
    reason: str = ""


def verify_serial(h: History, order: Sequence[TxnId]) -> SerialVerdict:
    """Replay every reads-from fact against `order`.

    The writer must precede the reader, with no other writer of the same key
    in between; the initial population precedes everything.
    """
    pos = {tid: i for i, tid in enumerate(order)}
    by_tid = {t.tid: t for t in h.txns}
    writers_by_key: dict[Key, list[int]] = {}
    for t in h.committed_updates():
        if t.tid not in pos:
            continue
        for k, _ in t.ws:
            writers_by_key.setdefault(k, []).append(pos[t.tid])
    for positions in writers_by_key.values():
        positions.sort()
    for fact in h.reads_from:
        reader = by_tid.get(fact.reader)
        if reader is None or reader.verdict != COMMIT or fact.reader not in pos:
            continue  # aborted or read-only readers are outside the serial order
        r = pos[fact.reader]
        if fact.writer is None:
            w = -1
        else:
            if fact.writer not in pos:
                return SerialVerdict(
                    False, (fact.writer, None, fact.reader), "reads-from writer not committed"
                )
            w = pos[fact.writer]
            if w >= r:
                return SerialVerdict(
                    False, (fact.writer, None, fact.reader), "writer does not precede reader"
                )
        positions = writers_by_key.get(fact.key, [])
        lo = bisect_right(positions, w)
        hi = bisect_left(positions, r)
        for p in positions[lo:hi]:
            if p != r and p != w:
                return SerialVerdict(
                    False,
                    (fact.writer if fact.writer else T0, order[p], fact.reader),
                    "another writer interposes between writer and reader",
                )
    return SerialVerdict(True)


# ---------------------------------------------------------------------------
# conflict-graph oracle


@dataclass(frozen=True, slots=True)
class GraphVerdict:
    ok: bool
    cycle: tuple[TxnId, ...] = ()


def _graph_edges(
    h: History, nodes: dict[TxnId, HTxn], pmap: PartitionMap
) -> dict[TxnId, set[TxnId]]:
    edges: dict[TxnId, set[TxnId]] = {tid: set() for tid in nodes}
    edges[T0] = set()

    def writer_version(t: HTxn, key: Key) -> int:
        v = t.version_at(pmap.partition_of(key))
        if v is None:
            raise ValueError(f"committed writer {t.tid} lacks a version for {key.hex()}")
        return v

    writers_by_key: dict[Key, list[tuple[int, TxnId]]] = {}
    for t in nodes.values():
        for k, _ in t.ws:
            writers_by_key.setdefault(k, []).append((writer_version(t, k), t.tid))
    for k, entries in writers_by_key.items():
        entries.sort()
        entries.insert(0, (0, T0))
        for (_, a), (_, b) in zip(entries, entries[1:]):
            edges[a].add(b)  # ww in version order

    version_index = {
        k: [v for v, _ in entries] for k, entries in writers_by_key.items()
    }
    for fact in h.reads_from:
        reader = nodes.get(fact.reader)
        if reader is None:
            continue
        writer = fact.writer if fact.writer is not None else T0
        if writer != fact.reader and (writer == T0 or writer in nodes):
            edges[writer].add(fact.reader)  # wr
        entries = writers_by_key.get(fact.key)
        if not entries:
            continue
        if fact.writer is None:
            read_version = 0
        else:
            wt = nodes.get(fact.writer)
            if wt is None:
                continue
            read_version = writer_version(wt, fact.key)
        idx = bisect_right(version_index[fact.key], read_version)
        if idx < len(entries):
            nxt = entries[idx][1]
            if nxt != fact.reader:
                edges[fact.reader].add(nxt)  # rw: reader before the next writer
    return edges


def _find_cycles(edges: dict[TxnId, set[TxnId]]) -> list[tuple[TxnId, ...]]:
    """Strongly connected components of size > 1 (or with a self-loop)."""
    index: dict[TxnId, int] = {}
    low: dict[TxnId, int] = {}
    on_stack: set[TxnId] = set()
    stack: list[TxnId] = []
    counter = [0]
    sccs: list[tuple[TxnId, ...]] = []

    for root in edges:
        if root in index:
            continue
        work = [(root, iter(sorted(edges[root])))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(sorted(edges[nxt]))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == node:
                        break
                if len(comp) > 1 or node in edges[node]:
                    sccs.append(tuple(sorted(comp)))
    return sccs


def conflict_graph_check(h: History, include_readonly: bool = False) -> GraphVerdict:
    """Pass iff the serialization graph over committed transactions is acyclic."""
    nodes = {t.tid: t for t in h.committed_updates()}
    if include_readonly:
        for t in h.committed():
            if t.read_only:
                nodes[t.tid] = t
    edges = _graph_edges(h, nodes, h.pmap())
    try:
        graphlib.TopologicalSorter(edges).prepare()
    except graphlib.CycleError:
        cycles = _find_cycles(edges)
        return GraphVerdict(False, cycles[0] if cycles else ())
    return GraphVerdict(True)


@dataclass(frozen=True, slots=True)
class ScanReport:
    readonly_checked: int
    update_cycles: tuple[tuple[TxnId, ...], ...]
    readonly_cycles: tuple[tuple[TxnId, ...], ...]

    @property
    def clean(self) -> bool:
        return not self.readonly_cycles


def readonly_anomaly_scan(h: History) -> ScanReport:
    """Add committed read-only transactions to the graph and report cycles through them.

    This measures rather than asserts: per-partition snapshot vectors make no
    global-consistency promise for cross-partition read-only transactions.
    """
    nodes = {t.tid: t for t in h.committed()}
    ro = {t.tid for t in h.committed() if t.read_only}
    edges = _graph_edges(h, nodes, h.pmap())
    cycles = _find_cycles(edges)
    with_ro = tuple(c for c in cycles if any(tid in ro for tid in c))
    without = tuple(c for c in cycles if not any(tid in ro for tid in c))
    return ScanReport(len(ro), without, with_ro)


# ---------------------------------------------------------------------------
# reference certifier (batch replay of the transcripts)


def replay_verdicts(h: History) -> dict[TxnId, str]:
    """Recompute every update transaction's verdict from the recorded transcripts.

    Independent of the engines: a pure batch walk over per-instance delivery
    orders. Per-partition-broadcast histories certify each instance's
    transcript prefix in isolation (matching eager voting); true-multicast
    histories replay a consistent global merge and certify against applied
    state. In both cases the global outcome is vote unanimity.
    """
    pmap = h.pmap()
    cert = h.meta.get("cert", "ordered")
    ordering = h.meta.get("ordering", "true-multicast")
    cert_enabled = h.meta.get("cert_enabled", "true") == "true"
    updates = [t for t in h.txns if not t.read_only]
    transcripts: dict[int, list[HTxn]] = {}
    for t in updates:
        for q, _ in t.seqs:
            transcripts.setdefault(q, []).append(t)
    for q in transcripts:
        transcripts[q].sort(key=lambda t: t.seq_at(q))

    def owned(keys: Iterable[Key], q: int) -> list[Key]:
        return [k for k in keys if pmap.partition_of(k) == q]

    def certify(
        t: HTxn, q: int, latest_w: dict[Key, int], latest_r: dict[Key, int]
    ) -> str:
        if not cert_enabled:
            return COMMIT
        stq = t.st[q] if t.st[q] is not None else 0
        for k in owned(t.rs, q):
            if latest_w.get(k, 0) > stq:
                return ABORT
        if cert == "bidirectional":
            for k in owned((k for k, _ in t.ws), q):
                if latest_r.get(k, 0) > stq:
                    return ABORT
        return COMMIT

    votes: dict[TxnId, dict[int, str]] = {t.tid: {} for t in updates}

    if ordering == "per-partition":
        # Local verdicts are pure functions of each instance's transcript prefix.
        for q, txns in transcripts.items():
            latest_w: dict[Key, int] = {}
            latest_r: dict[Key, int] = {}
            sc = 0
            for t in txns:
                v = certify(t, q, latest_w, latest_r)
                votes[t.tid][q] = v
                if v == COMMIT:
                    sc += 1
                    for k in owned((k for k, _ in t.ws), q):
                        latest_w[k] = sc
                    for k in owned(t.rs, q):
                        latest_r[k] = sc
    else:
        # Certify in a consistent global merge against applied state.
        latest_w_q: dict[int, dict[Key, int]] = {q: {} for q in transcripts}
        latest_r_q: dict[int, dict[Key, int]] = {q: {} for q in transcripts}
        sc = {q: 0 for q in transcripts}
        cursors = {q: 0 for q in transcripts}

        def at_every_head(t: HTxn) -> bool:
            for r, _ in t.seqs:
                if cursors[r] >= len(transcripts[r]):
                    return False
                if transcripts[r][cursors[r]].tid != t.tid:
                    return False
            return True

        remaining = len(updates)
        while remaining:
            progressed = False
            for q in sorted(cursors):
                if cursors[q] >= len(transcripts[q]):
                    continue
                t = transcripts[q][cursors[q]]
                if not at_every_head(t):
                    continue
                local: dict[int, tuple[str, int]] = {}
                for r in (r for r, _ in t.seqs):
                    v = certify(t, r, latest_w_q[r], latest_r_q[r])
                    if v == COMMIT:
                        sc[r] += 1
                    local[r] = (v, sc[r])
                    votes[t.tid][r] = v
                outcome = COMMIT if all(v == COMMIT for v, _ in local.values()) else ABORT
                for r, (v, version) in local.items():
                    if outcome == COMMIT:
                        for k in owned((k for k, _ in t.ws), r):
                            latest_w_q[r][k] = version
                        for k in owned(t.rs, r):
                            latest_r_q[r][k] = version
                    cursors[r] += 1
                remaining -= 1
                progressed = True
                break
            if not progressed:
                raise OrderingInconsistency(
                    "transcripts admit no consistent global replay order"
                )

    out: dict[TxnId, str] = {}
    for t in updates:
        vs = votes[t.tid]
        out[t.tid] = COMMIT if vs and all(v == COMMIT for v in vs.values()) else ABORT
    return out
