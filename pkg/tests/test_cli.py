import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from prnk.cli import BenchSpec, UsageError, dumps, main, top_ranks


@pytest.fixture
def files(tmp_path):
    c3 = tmp_path / "c3.txt"
    c3.write_text("0\t1\n1\t2\n2\t0\n")
    d2 = tmp_path / "d2.txt"
    d2.write_text("# node 20 dangles\n10\t20\n")
    return tmp_path, c3, d2


def test_convert(files, capsys):
    tmp, c3, _ = files
    out = tmp / "c3.prnk"
    assert main(["convert", str(c3), "-o", str(out)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert {k: stats[k] for k in ("n", "nnz", "zcol")} == {"n": 3, "nnz": 3, "zcol": 0}
    assert out.read_bytes().startswith(b"PRNK1")
    # the cache is accepted as solver input
    assert main(["solve", "--input", str(out), "--method", "power"]) == 0


def test_convert_errors(files):
    tmp, _, _ = files
    assert main(["convert", str(tmp / "missing.txt"), "-o", str(tmp / "x.prnk")]) == 2
    bad = tmp / "bad.txt"
    bad.write_text("1 2\n3\n")
    assert main(["convert", str(bad), "-o", str(tmp / "x.prnk")]) == 65


@pytest.mark.parametrize("method", ["power", "power-tan", "qe-power", "arnoldi", "hessenberg"])
def test_solve_three_cycle(files, method):
    tmp, c3, _ = files
    ranks, report = tmp / "r.tsv", tmp / "r.json"
    rc = main(["solve", "--input", str(c3), "--method", method, "--m", "3",
               "--ranks", str(ranks), "--report", str(report)])
    assert rc == 0
    rows = [line.split("\t") for line in ranks.read_text().splitlines()]
    assert [int(r[0]) for r in rows] == [0, 1, 2]
    assert np.allclose([float(r[1]) for r in rows], 1 / 3)
    rep = json.loads(report.read_text())
    assert rep["schema"] == "prnk-report/1"
    assert rep["converged"] is True


def test_solve_dangling_top_rank(files):
    tmp, _, d2 = files
    ranks, report = tmp / "r.tsv", tmp / "r.json"
    rc = main(["solve", "--input", str(d2), "--method", "hessenberg", "--m", "2",
               "--ranks", str(ranks), "--report", str(report), "--top-k", "0"])
    assert rc == 0
    rows = [line.split("\t") for line in ranks.read_text().splitlines()]
    assert rows[0][0] == "20"
    assert float(rows[0][1]) == pytest.approx(0.6491228070175439, abs=1e-9)
    assert sum(float(r[1]) for r in rows) == pytest.approx(1.0, abs=1e-12)
    text = report.read_text()
    assert '"alpha":0.84999999999999998' in text


def test_solve_not_converged_still_writes_report(files):
    tmp, _, d2 = files
    report = tmp / "r.json"
    rc = main(["solve", "--input", str(d2), "--method", "power", "--max-mvp", "3",
               "--tol", "1e-12", "--report", str(report)])
    assert rc == 1
    assert json.loads(report.read_text())["converged"] is False


@pytest.mark.parametrize(
    "extra",
    [["--alpha", "1.0"], ["--method", "arnoldi", "--m", "1"], ["--tol", "-1"],
     ["--method", "qe-power", "--period", "2"], ["--top-k", "-1"], ["--method", "bogus"]],
)
def test_solve_usage_errors(files, extra):
    _, c3, _ = files
    with pytest.raises(SystemExit) as exc:
        rc = main(["solve", "--input", str(c3)] + extra)
        raise SystemExit(rc)
    assert exc.value.code == 64


def test_teleport_file(files):
    tmp, c3, _ = files
    v = tmp / "v.txt"
    v.write_text("0.5\n0.25\n0.25\n")
    ranks = tmp / "r.tsv"
    assert main(["solve", "--input", str(c3), "--teleport-file", str(v), "--ranks", str(ranks)]) == 0
    assert ranks.read_text().splitlines()[0].startswith("0\t")
    v.write_text("0.5\n0.5\n")
    assert main(["solve", "--input", str(c3), "--teleport-file", str(v)]) == 65


def test_top_ranks_ties():
    x = np.array([0.25, 0.5, 0.25])
    ids = np.array([9, 4, 3])
    assert top_ranks(x, ids, 0) == [(4, 0.5), (3, 0.25), (9, 0.25)]
    assert top_ranks(x, ids, 2) == [(4, 0.5), (3, 0.25)]


def test_bench_flags(files):
    tmp, _, d2 = files
    out = tmp / "bench.csv"
    rc = main(["bench", "--input", str(d2), "--methods", "power", "hessenberg",
               "--alpha", "0.85", "0.9", "--m", "4", "--tol", "1e-8", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4
    assert list(rows[0]) == ["dataset", "method", "alpha", "m", "tol", "cycles", "mvp", "wall_time_s", "converged"]
    assert [(r["method"], r["alpha"]) for r in rows] == [
        ("power", "0.85"), ("power", "0.9"), ("hessenberg", "0.85"), ("hessenberg", "0.9")]
    assert all(r["converged"] == "true" for r in rows)
    assert rows[0]["m"] == "-" and rows[0]["cycles"] == "-"


def test_bench_spec_file_defaults(files, monkeypatch):
    tmp, c3, d2 = files
    spec = tmp / "spec.json"
    spec.write_text(json.dumps({"datasets": [str(c3), str(d2)]}))
    monkeypatch.setenv("PRNK_THREADS", "3")
    out = tmp / "bench.csv"
    assert main(["bench", "--spec", str(spec), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    cells = BenchSpec(datasets=(str(c3), str(d2))).cells()
    # 3 power variants x 4 alphas x 2 tols + 2 Krylov x 4 x 5 m x 2 tols, per dataset
    assert len(rows) == len(cells) == 2 * (24 + 80)
    monkeypatch.setenv("PRNK_THREADS", "1")
    out2 = tmp / "bench2.csv"
    main(["bench", "--spec", str(spec), "--out", str(out2)])
    strip = lambda rs: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rs]
    assert strip(rows) == strip(list(csv.DictReader(out2.open())))


def test_bench_power_mvp_grows_with_alpha(tmp_path, rng):
    from conftest import random_graph
    from prnk.graph_io import format_edge_list

    g = tmp_path / "g.txt"
    g.write_text(format_edge_list(random_graph(rng, 150)))
    out = tmp_path / "b.csv"
    main(["bench", "--input", str(g), "--methods", "power", "--tol", "1e-8", "--out", str(out)])
    mvps = [int(r["mvp"]) for r in csv.DictReader(out.open())]
    assert mvps == sorted(mvps) and len(mvps) == 4


def test_bench_failed_cell_recorded(files, monkeypatch):
    import io

    from prnk import cli

    tmp, c3, _ = files
    real = cli.solve

    def flaky(op, cfg):
        if cfg.method == "arnoldi":
            raise RuntimeError("boom")
        return real(op, cfg)

    monkeypatch.setattr(cli, "solve", flaky)
    spec = BenchSpec(datasets=(str(c3),), methods=("arnoldi", "hessenberg"), alphas=(0.85,), ms=(3,), tols=(1e-8,))
    buf = io.StringIO()
    cli.run_bench(spec, buf)
    buf.seek(0)
    rows = list(csv.DictReader(buf))
    assert [(r["method"], r["converged"]) for r in rows] == [("arnoldi", "false"), ("hessenberg", "true")]


def test_bench_spec_validation(files):
    _, c3, _ = files
    with pytest.raises(UsageError):
        BenchSpec(datasets=())
    with pytest.raises(UsageError):
        BenchSpec(datasets=(str(c3),), alphas=(1.2,))
    with pytest.raises(UsageError):
        BenchSpec(datasets=(str(c3),), methods=("gmres",))


def test_spectrum_identity(files):
    tmp, _, _ = files
    g = tmp / "self.txt"
    g.write_text("0\t0\n")
    out, diag = tmp / "s.csv", tmp / "s.json"
    assert main(["spectrum", "--input", str(g), "--operator", "raw", "--m", "1",
                 "--out", str(out), "--diag", str(diag)]) == 0
    rows = list(csv.reader(out.open()))
    assert len(rows) == 2
    assert [float(v) for v in rows[1]] == [1.0, 0.0, 0.0]
    d = json.loads(diag.read_text())
    assert d["basis_condition"] == 1
    assert d["warning"] is None


@pytest.mark.parametrize("process", ["hessenberg", "arnoldi"])
def test_spectrum_permutation(files, process):
    tmp, _, _ = files
    g = tmp / "p2.txt"
    g.write_text("0\t1\n1\t0\n")
    out = tmp / "s.csv"
    assert main(["spectrum", "--input", str(g), "--operator", "raw", "--m", "2", "--q0", "e1",
                 "--process", process, "--out", str(out)]) == 0
    vals = sorted(tuple(float(v) for v in r[:2]) for r in list(csv.reader(out.open()))[1:])
    assert np.allclose(vals, [(-1, 0), (1, 0)])


def test_spectrum_breakdown_warning(files):
    tmp, c3, _ = files
    out, diag = tmp / "s.csv", tmp / "s.json"
    assert main(["spectrum", "--input", str(c3), "--m", "10", "--out", str(out), "--diag", str(diag)]) == 0
    d = json.loads(diag.read_text())
    assert d["breakdown_at"] == 1
    assert "breakdown" in d["warning"] and "exceeds" in d["warning"]
    assert len(list(csv.reader(out.open()))) == 2


def test_spectrum_q0_file(files):
    tmp, c3, _ = files
    q = tmp / "q.txt"
    q.write_text("1\n2\n")
    assert main(["spectrum", "--input", str(c3), "--m", "2", "--q0", str(q), "--out", str(tmp / "s.csv")]) == 64


def test_dumps_precision():
    assert dumps({"a": 0.1, "b": [1, None, True], "c": float("nan")}) == '{"a":0.10000000000000001,"b":[1,null,true],"c":null}'
    assert json.loads(dumps({"x": np.float64(1 / 3)}))["x"] == 1 / 3


def test_module_entry_point(files):
    _, c3, _ = files
    res = subprocess.run([sys.executable, "-m", "prnk", "solve", "--input", str(c3)], capture_output=True, text=True)
    assert res.returncode == 0
    res = subprocess.run([sys.executable, "-m", "prnk", "frobnicate"], capture_output=True, text=True)
    assert res.returncode == 64
