"""Experiment driver: builds a topology from a RunConfig and runs it to quiescence.

The driver owns the wiring only; protocol behavior lives in the engine
modules. A sim-mode run is a pure function of its config: reruns produce
byte-identical History files, CSV rows, and store dumps.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence, Union

from . import checker as _checker
from .core import COMMIT, TxnId
from .model import scalability_efficiency
from .dur import DurReplica, DurTxn
from .messages import Call, OutcomeMsg, ReadReply, Start
from .mvstore import Store
from .ordering import PER_PARTITION, TRUE_MULTICAST, Group, OrderingLayer
from .pdur import BIDIRECTIONAL, ORDERED, PartitionProcess, PdurTxn, proc_name
from .recording import ActorLog, ClientTxnRecord
from .runtime import BOOT, DeadlockError, RtRuntime, SimRuntime
from .workloads import cross_fraction, execute, scripts_for_client

CSV_COLUMNS = (
    "engine,mode,ordering,cert,n,P,g,clients,seed,committed,aborted,"
    "throughput,lat50,lat90,msgs_delivery,msgs_vote,msgs_forward"
)


class ConfigError(ValueError):
    """A run configuration violates one of its invariants."""


@dataclass(frozen=True)
class RunConfig:
    engine: str = "pdur"          # dur | pdur
    mode: str = "sim"             # sim | rt
    ordering: str = TRUE_MULTICAST
    cert: str = ORDERED
    n: int = 1
    partitions: int = 1
    clients: int = 2
    workload: Any = None          # a MicroSpec or SocialSpec
    seed: int = 0
    txns: int = 100
    duration: Optional[float] = None  # rt mode only, seconds
    outdir: Optional[str] = None
    cert_enabled: bool = True
    direct_reads: bool = False
    gamma_e: float = 1.0
    gamma_t: float = 1.0

    def validate(self) -> None:
        if self.engine not in ("dur", "pdur"):
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.mode not in ("sim", "rt"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.ordering not in (TRUE_MULTICAST, PER_PARTITION):
            raise ConfigError(f"unknown ordering {self.ordering!r}")
        if self.cert not in (ORDERED, BIDIRECTIONAL):
            raise ConfigError(f"unknown cert mode {self.cert!r}")
        if self.ordering == PER_PARTITION and self.cert != BIDIRECTIONAL:
            raise ConfigError("ordering=per-partition requires cert=bidirectional")
        if self.engine == "dur":
            if self.partitions != 1:
                raise ConfigError("engine=dur requires P=1")
            if self.ordering != TRUE_MULTICAST or self.cert != ORDERED:
                raise ConfigError("engine=dur requires ordering=true-multicast and cert=ordered")
        if self.n < 1 or self.partitions < 1 or self.clients < 1:
            raise ConfigError("n, P, and clients must be >= 1")
        if self.txns < 0:
            raise ConfigError("txns must be >= 0")
        if self.duration is not None and self.mode != "rt":
            raise ConfigError("duration is only meaningful in rt mode")
        if self.workload is None:
            raise ConfigError("a workload spec is required")

    def echo(self) -> str:
        return (
            f"engine={self.engine} mode={self.mode} ordering={self.ordering}"
            f" cert={self.cert} n={self.n} P={self.partitions} clients={self.clients}"
            f" seed={self.seed} txns={self.txns}"
            f" cert_enabled={str(self.cert_enabled).lower()}"
            f" direct_reads={str(self.direct_reads).lower()}"
            f" gamma_e={self.gamma_e:g} gamma_t={self.gamma_t:g}"
        )


@dataclass(frozen=True)
class RunResult:
    committed: int            # committed update transactions
    aborted: int              # aborted update transactions
    readonly: int             # committed read-only transactions
    throughput: float
    lat50: float
    lat90: float
    msgs_delivery: int
    msgs_vote: int
    msgs_forward: int
    steps: int                # sim scheduler steps (0 in rt mode)
    wall: float               # rt wall seconds (0 in sim mode)


@dataclass
class RunReport:
    config: RunConfig
    result: RunResult
    history: _checker.History
    dumps: dict[tuple[int, int], str]
    transcripts: dict[int, list[TxnId]]
    ordering_dump: str
    costs: dict[tuple[int, int], float]
    local: dict[tuple[int, int, TxnId], tuple[str, str, Optional[int]]]
    deliveries: dict[str, list[TxnId]]
    links: tuple[tuple[str, str], ...]  # (sender, receiver) pairs used (sim mode)


class ClientActor:
    """Synchronous client driver: one outstanding transaction, one script stream."""

    def __init__(
        self,
        index: int,
        scripts: Sequence,
        spec,
        make_txn,
        log: ActorLog,
        gamma_e: float,
        deadline: Optional[float] = None,
    ):
        self.name = f"c{index}"
        self.index = index
        self.scripts = scripts
        self.spec = spec
        self.make_txn = make_txn
        self.log = log
        self.gamma_e = gamma_e
        self.deadline = deadline
        self.cursor = 0
        self.seq = 0
        self.gen = None
        self.tx = None
        self.waiting: Optional[str] = None
        self.t0 = 0.0
        self.done = False

    def on_message(self, msg: Any, rt) -> None:
        if isinstance(msg, Start):
            self._next(rt)
        elif isinstance(msg, ReadReply):
            if self.waiting == "read" and msg.txn_seq == self.seq:
                self._advance(msg, rt)
        elif isinstance(msg, OutcomeMsg):
            # First outcome wins; duplicates from other replicas are dropped.
            if self.waiting == "outcome" and msg.txn_seq == self.seq:
                self._advance(msg, rt)
        else:
            raise TypeError(f"{self.name} got {type(msg).__name__}")

    def _next(self, rt) -> None:
        if self.cursor >= len(self.scripts) or (
            self.deadline is not None and rt.now() >= self.deadline
        ):
            self.done = True
            return
        script = self.scripts[self.cursor]
        self.cursor += 1
        self.seq += 1
        self.tx = self.make_txn(TxnId(self.index, self.seq))
        self.t0 = rt.now()
        self.gen = execute(script, self.tx, self.spec)
        self._advance(None, rt)

    def _advance(self, value: Any, rt) -> None:
        self.waiting = None
        try:
            call: Call = self.gen.send(value)
        except StopIteration:
            self._record(rt)
            self._next(rt)
            return
        if call.wait not in ("read", "outcome"):
            raise AssertionError(f"{self.name}: protocol yielded a step with no reply")
        self.waiting = call.wait
        for dst, msg in call.sends:
            rt.send(self.name, dst, msg)

    def _record(self, rt) -> None:
        tx = self.tx
        parts = tx.partitions
        for q in parts:
            self.log.charge((tx.exec_server, q), self.gamma_e)
        self.log.note_txn(
            ClientTxnRecord(
                tid=tx.txn.id,
                st=tx.txn.st,
                rs=tuple(sorted(tx.txn.rs)),
                ws=tx.txn.ws,
                verdict=tx.verdict,
                partitions=parts,
                read_only=tx.txn.read_only,
                latency=rt.now() - self.t0,
                reads=tuple(tx.reads),
            )
        )


def _percentile(values: Sequence[float], q: float) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    idx = round(q * (len(ordered) - 1))
    return ordered[idx]


def run(config: RunConfig) -> RunReport:
    config.validate()
    spec = config.workload
    pmap = spec.pmap(config.partitions)
    items = spec.populate_items()
    owned: dict[int, list] = {q: [] for q in range(config.partitions)}
    for key, value in items:
        owned[pmap.partition_of(key)].append((key, value))

    groups = [
        Group(q, tuple(proc_name(s, q) for s in range(config.n)))
        for q in range(config.partitions)
    ]
    ordering = OrderingLayer(config.ordering, groups)

    logs: dict[str, ActorLog] = {}
    processes = []
    for s in range(config.n):
        for q in range(config.partitions):
            store = Store()
            store.populate_items(owned[q])
            log = logs.setdefault(proc_name(s, q), ActorLog())
            if config.engine == "dur":
                proc = DurReplica(s, store, log, config.gamma_t, config.cert_enabled)
            else:
                proc = PartitionProcess(
                    s,
                    q,
                    store,
                    pmap,
                    log,
                    ordering_mode=config.ordering,
                    cert_mode=config.cert,
                    gamma_t=config.gamma_t,
                    cert_enabled=config.cert_enabled,
                )
            processes.append(proc)

    clients = []
    base, extra = divmod(config.txns, config.clients)
    for i in range(config.clients):
        count = base + (1 if i < extra else 0)
        scripts = scripts_for_client(spec, pmap, config.seed, i, count)
        log = logs.setdefault(f"c{i}", ActorLog())
        home_server = i % config.n
        home_partition = i % config.partitions
        if config.engine == "dur":
            def make_txn(tid, _s=home_server):
                return DurTxn(tid, _s, pmap, ordering)
        else:
            def make_txn(tid, _s=home_server, _p=home_partition):
                return PdurTxn(tid, _s, _p, pmap, ordering, config.direct_reads)
        clients.append(
            ClientActor(i, scripts, spec, make_txn, log, config.gamma_e, config.duration)
        )

    rt: Union[SimRuntime, RtRuntime]
    if config.mode == "sim":
        rt = SimRuntime(config.seed)
    else:
        rt = RtRuntime()
    for actor in ordering.actors:
        rt.register(actor)
    for proc in processes:
        rt.register(proc)
    for client in clients:
        rt.register(client)

    if config.mode == "sim":
        for client in clients:
            rt.send(BOOT, client.name, Start())
        rt.run()
    else:
        rt.start()
        for client in clients:
            rt.send(BOOT, client.name, Start())
        rt.run_until(lambda: all(c.done for c in clients))

    stalled = [c.name for c in clients if not c.done]
    if stalled:
        raise DeadlockError(f"clients never finished: {', '.join(stalled)}")
    unresolved = [p.name for p in processes if getattr(p, "queue", None)]
    if unresolved:
        raise DeadlockError(f"unresolved terminations at: {', '.join(unresolved)}")

    return _finalize(config, spec, ordering, logs, processes, rt)


def _finalize(config, spec, ordering, logs, processes, rt) -> RunReport:
    pmap = spec.pmap(config.partitions)
    # Merge single-writer logs.
    records: list[ClientTxnRecord] = []
    local: dict[tuple[int, int, TxnId], tuple[str, str, Optional[int]]] = {}
    costs: dict[tuple[int, int], float] = {}
    votes_sent = forwards = 0
    for log in logs.values():
        records.extend(log.txns)
        local.update(log.local)
        for executor, cost in log.costs.items():
            costs[executor] = costs.get(executor, 0.0) + cost
        votes_sent += log.votes_sent
        forwards += log.forwards
    records.sort(key=lambda r: r.tid)

    # Replica agreement: same local verdict, outcome, and version everywhere.
    by_pq: dict[tuple[int, TxnId], tuple[str, str, Optional[int]]] = {}
    for (server, q, tid), entry in local.items():
        seen = by_pq.setdefault((q, tid), entry)
        if seen != entry:
            raise AssertionError(
                f"replicas disagree on {tid} at partition {q}: {seen} vs {entry}"
            )

    # Client-observed verdicts must match the processes' outcomes.
    for r in records:
        if r.read_only:
            continue
        for q in r.partitions:
            entry = by_pq.get((q, r.tid))
            if entry is None:
                raise AssertionError(f"{r.tid} never terminated at partition {q}")
            if entry[1] != r.verdict:
                raise AssertionError(f"{r.tid}: client saw {r.verdict}, replica decided {entry[1]}")

    transcripts = ordering.transcripts()
    seqs: dict[TxnId, dict[int, int]] = {}
    for q, tids in transcripts.items():
        for i, tid in enumerate(tids, start=1):
            seqs.setdefault(tid, {})[q] = i

    # Writer lookup for reads-from resolution: (partition, version) -> txn.
    writer_at: dict[tuple[int, int], TxnId] = {}
    for (q, tid), (_, outcome, version) in by_pq.items():
        if outcome == COMMIT and version is not None:
            writer_at[(q, version)] = tid

    history = _checker.History()
    history.meta = {
        "engine": config.engine,
        "mode": config.mode,
        "ordering": config.ordering,
        "cert": config.cert,
        "cert_enabled": str(config.cert_enabled).lower(),
        "n": str(config.n),
        "P": str(config.partitions),
        "seed": str(config.seed),
        "key_prefix": "-" if pmap.prefix is None else str(pmap.prefix),
        "workload": spec.echo(),
    }
    lats: list[float] = []
    committed = aborted = readonly = 0
    for r in records:
        lats.append(r.latency)
        if r.read_only:
            readonly += 1
        elif r.verdict == COMMIT:
            committed += 1
        else:
            aborted += 1
        commit_versions = tuple(
            (q, by_pq[(q, r.tid)][2])
            for q in r.partitions
            if r.verdict == COMMIT and not r.read_only and by_pq[(q, r.tid)][2] is not None
        )
        history.txns.append(
            _checker.HTxn(
                tid=r.tid,
                st=r.st,
                rs=r.rs,
                ws=r.ws,
                verdict=r.verdict,
                commit_versions=commit_versions,
                partitions=r.partitions,
                seqs=tuple(sorted(seqs.get(r.tid, {}).items())),
            )
        )
        if r.verdict == COMMIT:
            for key, q, version in r.reads:
                if version == 0:
                    history.reads_from.append(_checker.ReadsFrom(r.tid, key, None))
                else:
                    writer = writer_at.get((q, version))
                    if writer is None:
                        raise AssertionError(
                            f"{r.tid} read unknown version {version} of {key.hex()} in p{q}"
                        )
                    history.reads_from.append(_checker.ReadsFrom(r.tid, key, writer))

    if config.mode == "sim":
        max_cost = max(costs.values(), default=0.0)
        throughput = (committed + readonly) * 1000.0 / max_cost if max_cost else 0.0
        steps, wall = rt.steps, 0.0
    else:
        wall = rt.now()
        throughput = (committed + readonly) / wall if wall else 0.0
        steps = 0

    result = RunResult(
        committed=committed,
        aborted=aborted,
        readonly=readonly,
        throughput=throughput,
        lat50=_percentile(lats, 0.5),
        lat90=_percentile(lats, 0.9),
        msgs_delivery=ordering.deliveries_sent,
        msgs_vote=votes_sent,
        msgs_forward=forwards,
        steps=steps,
        wall=wall,
    )
    dumps = {(p.server, getattr(p, "pid", 0)): p.store.dump() for p in processes}
    report = RunReport(
        config=config,
        result=result,
        history=history,
        dumps=dumps,
        transcripts=transcripts,
        ordering_dump=ordering.transcript_dump(),
        costs=costs,
        local=local,
        deliveries={name: list(log.deliveries) for name, log in logs.items() if log.deliveries},
        links=tuple(sorted(rt.links)) if config.mode == "sim" else (),
    )
    if config.outdir:
        write_report(report, config.outdir)
    return report


def csv_row(config: RunConfig, result: RunResult) -> str:
    g = cross_fraction(config.workload)
    return (
        f"{config.engine},{config.mode},{config.ordering},{config.cert},"
        f"{config.n},{config.partitions},{g:g},{config.clients},{config.seed},"
        f"{result.committed},{result.aborted},{result.throughput:.6g},"
        f"{result.lat50:.6g},{result.lat90:.6g},"
        f"{result.msgs_delivery},{result.msgs_vote},{result.msgs_forward}"
    )


def result_csv(report: RunReport) -> str:
    return (
        f"# config: {report.config.echo()}\n"
        f"# workload: {report.config.workload.echo()}\n"
        f"{CSV_COLUMNS}\n{csv_row(report.config, report.result)}\n"
    )


def write_report(report: RunReport, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    report.history.save(os.path.join(outdir, "history.txt"))
    with open(os.path.join(outdir, "result.csv"), "w", encoding="utf-8") as fh:
        fh.write(result_csv(report))
    with open(os.path.join(outdir, "transcript.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.ordering_dump)
    dump_dir = os.path.join(outdir, "dumps")
    os.makedirs(dump_dir, exist_ok=True)
    for (server, q), text in sorted(report.dumps.items()):
        with open(os.path.join(dump_dir, f"s{server}p{q}.dump"), "w", encoding="utf-8") as fh:
            fh.write(text)


SWEEP_AXES = ("P", "n", "g", "clients")


def sweep(
    config: RunConfig, axis: str, values: Sequence
) -> tuple[list[Optional[RunReport]], str]:
    """One run per axis value; consolidated CSV with a scalability-efficiency column.

    Failures are recorded per row (as comment lines) without aborting the
    remaining runs. The efficiency column is filled for doubling steps along
    the P and n axes.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
    reports: list[Optional[RunReport]] = []
    errors: list[str] = []
    for value in values:
        cfg = _with_axis(config, axis, value)
        try:
            reports.append(run(cfg))
        except Exception as exc:  # propagate per row, keep sweeping
            reports.append(None)
            errors.append(f"# error: {axis}={value}: {exc}")

    eff_by_value: dict[Any, float] = {}
    if axis in ("P", "n"):
        taus = [
            (v, rep.result.throughput)
            for v, rep in zip(values, reports)
            if rep is not None and isinstance(v, int) and v >= 1 and (v & (v - 1)) == 0
        ]
        for eff in scalability_efficiency(taus):
            if eff.value is not None:
                eff_by_value[eff.upper] = eff.value

    lines = [
        f"# config: {config.echo()}",
        f"# workload: {config.workload.echo()}",
        f"# sweep: axis={axis} values={','.join(str(v) for v in values)}",
        *errors,
        CSV_COLUMNS + ",efficiency",
    ]
    for value, rep in zip(values, reports):
        if rep is None:
            continue
        eff = eff_by_value.get(value)
        eff_text = "" if eff is None else f"{eff:.6g}"
        lines.append(f"{csv_row(rep.config, rep.result)},{eff_text}")
    return reports, "\n".join(lines) + "\n"


def _with_axis(config: RunConfig, axis: str, value) -> RunConfig:
    if axis == "P":
        return replace(config, partitions=int(value))
    if axis == "n":
        return replace(config, n=int(value))
    if axis == "clients":
        return replace(config, clients=int(value))
    # g axis rewrites the workload spec.
    return replace(config, workload=dataclasses.replace(config.workload, g=float(value)))
