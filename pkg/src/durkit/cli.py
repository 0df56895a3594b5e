"""Command line driver: run experiments, sweep a parameter, check histories, print model tables."""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from . import checker, model
from .driver import SWEEP_AXES, ConfigError, RunConfig, result_csv, run, sweep
from .ordering import PER_PARTITION, TRUE_MULTICAST
from .pdur import BIDIRECTIONAL, ORDERED
from .workloads import MicroSpec, load_spec


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--engine", choices=["dur", "pdur"], default="pdur")
    p.add_argument("--mode", choices=["sim", "rt"], default="sim")
    p.add_argument(
        "--ordering", choices=[TRUE_MULTICAST, PER_PARTITION], default=TRUE_MULTICAST
    )
    p.add_argument("--cert", choices=[ORDERED, BIDIRECTIONAL], default=ORDERED)
    p.add_argument("-n", "--replicas", type=int, default=1, dest="n")
    p.add_argument("-P", "--partitions", type=int, default=1)
    p.add_argument("--clients", type=int, default=2)
    p.add_argument("--workload", help="path to a key=value workload spec file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--txns", type=int, default=100)
    p.add_argument("--duration", type=float, help="rt mode: stop starting txns after SECONDS")
    p.add_argument(
        "--outdir",
        default="durkit-out",
        help="write history/result/transcript/dumps here (default: durkit-out)",
    )
    p.add_argument("--no-cert", action="store_true", help="disable certification (commit everything)")
    p.add_argument("--direct-reads", action="store_true", help="clients contact key owners directly")
    p.add_argument("--gamma-e", type=float, default=1.0)
    p.add_argument("--gamma-t", type=float, default=1.0)


def _config(args: argparse.Namespace) -> RunConfig:
    spec = load_spec(args.workload) if args.workload else MicroSpec()
    return RunConfig(
        engine=args.engine,
        mode=args.mode,
        ordering=args.ordering,
        cert=args.cert,
        n=args.n,
        partitions=args.partitions,
        clients=args.clients,
        workload=spec,
        seed=args.seed,
        txns=args.txns,
        duration=args.duration,
        outdir=args.outdir,
        cert_enabled=not args.no_cert,
        direct_reads=args.direct_reads,
        gamma_e=args.gamma_e,
        gamma_t=args.gamma_t,
    )


def cmd_run(args: argparse.Namespace) -> int:
    report = run(_config(args))
    sys.stdout.write(result_csv(report))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config(args)
    values = [float(v) if args.axis == "g" else int(v) for v in args.values.split(",")]
    reports, text = sweep(config, args.axis, values)
    sys.stdout.write(text)
    if args.outdir:
        os.makedirs(args.outdir, exist_ok=True)
        with open(os.path.join(args.outdir, "sweep.csv"), "w", encoding="utf-8") as fh:
            fh.write(text)
        for value, rep in zip(values, reports):
            if rep is not None:
                rep.history.save(os.path.join(args.outdir, f"history-{args.axis}{value:g}.txt"))
    return 0 if all(r is not None for r in reports) else 1


def cmd_check(args: argparse.Namespace) -> int:
    """Validate recorded histories; nonzero exit on any failure."""
    failures = 0
    for path in args.histories:
        h = checker.History.load(path)
        parts = []
        ok = True
        graph = checker.conflict_graph_check(h)
        parts.append("graph=pass" if graph.ok else f"graph=FAIL cycle={'>'.join(map(str, graph.cycle))}")
        ok &= graph.ok
        if h.meta.get("ordering", TRUE_MULTICAST) == TRUE_MULTICAST:
            try:
                order = checker.build_appendix_order(h)
                serial = checker.verify_serial(h, order)
                parts.append("serial=pass" if serial.ok else f"serial=FAIL {serial.reason}")
                ok &= serial.ok
            except checker.OrderingInconsistency as exc:
                parts.append(f"serial=FAIL {exc}")
                ok = False
        try:
            replayed = checker.replay_verdicts(h)
            mism = sum(
                1
                for t in h.txns
                if not t.read_only and replayed.get(t.tid) != t.verdict
            )
            parts.append("replay=pass" if mism == 0 else f"replay=FAIL mismatches={mism}")
            ok &= mism == 0
        except checker.OrderingInconsistency as exc:
            parts.append(f"replay=FAIL {exc}")
            ok = False
        scan = checker.readonly_anomaly_scan(h)
        parts.append(f"readonly_cycles={len(scan.readonly_cycles)}")
        print(f"{path}: {'PASS' if ok else 'FAIL'} ({', '.join(parts)})")
        failures += 0 if ok else 1
    return 1 if failures else 0


def cmd_model(args: argparse.Namespace) -> int:
    costs = model.CostProfile(args.gamma_e, args.gamma_t)
    n_values = [int(v) for v in args.n_values.split(",")]
    p_values = [int(v) for v in args.p_values.split(",")]
    g_values = [float(v) for v in args.g_values.split(",")]
    sys.stdout.write(model.model_table(n_values, p_values, g_values, costs))
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="durkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run one experiment per axis value")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p_sweep.add_argument("--values", required=True, help="comma separated axis values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="validate recorded history files")
    p_check.add_argument("histories", nargs="+")
    p_check.set_defaults(func=cmd_check)

    p_model = sub.add_parser("model", help="print scaling-model tables as CSV")
    p_model.add_argument("--n-values", default="1,2,4,8,16")
    p_model.add_argument("--p-values", default="1,2,4,8,16")
    p_model.add_argument("--g-values", default="0,0.05,0.5,1")
    p_model.add_argument("--gamma-e", type=float, default=1.0)
    p_model.add_argument("--gamma-t", type=float, default=1.0)
    p_model.set_defaults(func=cmd_model)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
