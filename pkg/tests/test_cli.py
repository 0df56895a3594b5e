import os

import pytest

from durkit.checker import replay_verdicts
from durkit.cli import main
from durkit.driver import RunConfig, run, sweep
from durkit.workloads import MicroSpec


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_run_writes_all_artifacts(tmp_path, capsys):
    out = tmp_path / "r"
    rc = main(
        [
            "run",
            "--engine", "pdur",
            "-P", "2",
            "--clients", "2",
            "--txns", "30",
            "--seed", "3",
            "--outdir", str(out),
        ]
    )
    assert rc == 0
    assert (out / "history.txt").exists()
    assert (out / "result.csv").exists()
    assert (out / "transcript.txt").exists()
    assert (out / "dumps" / "s0p0.dump").exists()
    csv = read(out / "result.csv").decode()
    assert "# config:" in csv and "# workload:" in csv
    assert csv.splitlines()[2].startswith("engine,")


def test_sim_rerun_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(
            ["run", "-P", "4", "--clients", "3", "--txns", "60", "--seed", "9",
             "--ordering", "per-partition", "--cert", "bidirectional",
             "--outdir", str(out)]
        ) == 0
        outs.append(out)
    a, b = outs
    for rel in ("history.txt", "result.csv", "transcript.txt"):
        assert read(a / rel) == read(b / rel)
    for dump in sorted(os.listdir(a / "dumps")):
        assert read(a / "dumps" / dump) == read(b / "dumps" / dump)


def test_invalid_combinations_rejected(capsys):
    assert main(["run", "--engine", "dur", "-P", "4", "--txns", "1"]) == 2
    assert "engine=dur requires P=1" in capsys.readouterr().err
    assert main(["run", "--ordering", "per-partition", "--txns", "1"]) == 2
    assert "requires cert=bidirectional" in capsys.readouterr().err
    assert main(["run", "--duration", "1.0", "--txns", "1"]) == 2
    assert "rt mode" in capsys.readouterr().err


def test_workload_file_flag(tmp_path, capsys):
    spec = tmp_path / "w.spec"
    spec.write_text("kind=micro type=II g=0.25 db=500 seed=4\n")
    assert main(
        ["run", "--workload", str(spec), "-P", "2", "--txns", "20",
         "--outdir", str(tmp_path / "out")]
    ) == 0
    outp = capsys.readouterr().out
    assert "type=II g=0.25" in outp


def test_sweep_g_axis_four_rows(tmp_path, capsys):
    rc = main(
        ["sweep", "-P", "4", "--clients", "2", "--txns", "40",
         "--axis", "g", "--values", "0.001,0.01,0.1,1.0",
         "--outdir", str(tmp_path / "sw")]
    )
    assert rc == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l and not l.startswith("#")]
    assert lines[0].startswith("engine,") and lines[0].endswith(",efficiency")
    assert len(lines) == 1 + 4
    gs = [row.split(",")[6] for row in lines[1:]]
    assert gs == ["0.001", "0.01", "0.1", "1"]


def test_sweep_single_value(tmp_path, capsys):
    assert main(
        ["sweep", "--txns", "10", "--axis", "n", "--values", "1",
         "--outdir", str(tmp_path / "sw")]
    ) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l and not l.startswith("#")]
    assert len(lines) == 2


def test_sweep_efficiency_column_for_doubling_P():
    cfg = RunConfig(
        workload=MicroSpec(txn_type="I", g=0.0, db_size=2000),
        clients=4,
        txns=400,
        seed=1,
    )
    reports, text = sweep(cfg, "P", [1, 2, 4])
    rows = [l for l in text.splitlines() if l and not l.startswith("#")][1:]
    effs = [row.rsplit(",", 1)[1] for row in rows]
    assert effs[0] == ""  # no doubling into size 1
    assert all(e and 0.8 <= float(e) <= 1.1 for e in effs[1:])


def test_sweep_rows_survive_per_row_errors():
    cfg = RunConfig(workload=MicroSpec(db_size=50), txns=10)
    reports, text = sweep(cfg, "n", [1, 0, 2])  # n=0 is invalid
    assert reports[1] is None and reports[0] and reports[2]
    assert "# error: n=0" in text
    rows = [l for l in text.splitlines() if l and not l.startswith("#")][1:]
    assert len(rows) == 2


def test_sweep_throughput_increases_with_partitions():
    cfg = RunConfig(
        workload=MicroSpec(txn_type="I", g=0.0, db_size=2000),
        clients=4,
        txns=400,
        seed=2,
    )
    reports, _ = sweep(cfg, "P", [1, 2, 4, 8])
    taus = [r.result.throughput for r in reports]
    assert taus == sorted(taus)
    assert taus[-1] > taus[0]


def test_rt_run_agrees_with_replay_oracle(tmp_path):
    cfg = RunConfig(
        engine="pdur",
        mode="rt",
        n=2,
        partitions=2,
        clients=4,
        workload=MicroSpec(txn_type="III", g=0.4, db_size=80),
        txns=80,
        seed=5,
    )
    report = run(cfg)
    replayed = replay_verdicts(report.history)
    for t in report.history.txns:
        if not t.read_only:
            assert replayed[t.tid] == t.verdict
    assert report.result.wall > 0


def test_check_subcommand_pass_and_fail(tmp_path, capsys):
    out = tmp_path / "ok"
    main(["run", "-P", "2", "--txns", "40", "--seed", "8", "--outdir", str(out)])
    capsys.readouterr()
    assert main(["check", str(out / "history.txt")]) == 0
    assert "PASS" in capsys.readouterr().out

    # Certification disabled on a contended workload must fail the checker.
    bad = tmp_path / "bad"
    spec = tmp_path / "w.spec"
    spec.write_text("kind=micro type=III db=30\n")
    for seed in range(40):
        main(
            ["run", "--workload", str(spec), "--clients", "4", "--txns", "60",
             "--seed", str(seed), "--no-cert", "--outdir", str(bad)]
        )
        capsys.readouterr()
        if main(["check", str(bad / "history.txt")]) == 1:
            assert "FAIL" in capsys.readouterr().out
            return
        capsys.readouterr()
    pytest.fail("no violation found with certification disabled")


def test_model_subcommand(capsys):
    assert main(["model", "--n-values", "1,2", "--p-values", "1", "--g-values", "0"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "n,p,g,gamma_e,gamma_t,scaling"
    assert len(out.strip().splitlines()) == 3


def test_duration_mode_rt(tmp_path):
    cfg = RunConfig(
        mode="rt",
        clients=2,
        workload=MicroSpec(db_size=100),
        txns=100_000,  # far more than fits in the duration
        duration=0.2,
        seed=0,
    )
    report = run(cfg)
    done = report.result.committed + report.result.aborted + report.result.readonly
    assert 0 < done < 100_000
