"""Command-line front end.

    prnk convert  INPUT -o OUT.prnk
    prnk solve    --input G --method hessenberg --alpha 0.85 --m 8 --tol 1e-8
    prnk bench    --input G --methods power hessenberg --alpha 0.85 0.99 --out bench.csv
    prnk spectrum --input G --process hessenberg --m 50 --out ritz.csv

Exit codes: 0 success, 1 no convergence, 2 unreadable input,
64 bad usage, 65 malformed input data.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import diagnostics
from .google import GoogleOperator, load_teleport
from .graph_io import GraphParseError, build_transition, graph_stats, load_graph, write_cache
from .krylov import arnoldi_process, hessenberg_process
from .solvers import KRYLOV_METHODS, METHODS, SolveConfig, solve

EX_OK, EX_NOCONV, EX_NOINPUT, EX_USAGE, EX_DATAERR = 0, 1, 2, 64, 65
REPORT_SCHEMA = "prnk-report/1"
BENCH_COLUMNS = ("dataset", "method", "alpha", "m", "tol", "cycles", "mvp", "wall_time_s", "converged")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def dumps(obj) -> str:
    """JSON with floats written to 17 significant digits."""
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _load(path, fmt):
    p = Path(path)
    if not p.is_file() or not os.access(p, os.R_OK):
        raise FileNotFoundError(f"cannot read {path}")
    return load_graph(p, fmt)


def _threads():
    try:
        return max(1, int(os.environ.get("PRNK_THREADS", "1")))
    except ValueError:
        raise UsageError("PRNK_THREADS must be an integer") from None


def report_dict(report, dataset=None, n=None):
    out = {
        "schema": REPORT_SCHEMA,
        "dataset": dataset,
        "n": n,
        "method": report.method,
        "alpha": report.alpha,
        "m": report.m,
        "tol": report.tol,
        "converged": report.converged,
        "cycles": report.cycles,
        "mvp": report.mvp,
        "extra_mvp": report.extra_mvp,
        "final_residual": report.final_residual,
        "residual_history": list(report.residual_history),
        "breakdowns": list(report.breakdowns),
        "min_entry_before_clamp": report.min_entry,
        "wall_time_s": report.wall_time,
    }
    return out


def top_ranks(x, ids, k):
    """``(original_id, score)`` sorted by score descending, ties by ascending id."""
    order = np.lexsort((ids, -x))
    if k:
        order = order[:k]
    return [(int(ids[i]), float(x[i])) for i in order]


def cmd_convert(args):
    graph = _load(args.input, args.format)
    write_cache(graph, args.output)
    print(dumps(graph_stats(graph).as_dict()))
    return EX_OK


def _config(args, method):
    if method in KRYLOV_METHODS and args.m < 2:
        raise UsageError("--m must be at least 2 for Krylov methods")
    try:
        return SolveConfig(
            method=method, m=args.m, tol=args.tol, max_mvp=args.max_mvp,
            period=args.period, raw_restart=args.raw_restart,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise UsageError(f"alpha must lie in (0, 1), got {alpha}")


def cmd_solve(args):
    _check_alpha(args.alpha)
    if args.top_k < 0:
        raise UsageError("--top-k must be nonnegative")
    cfg = _config(args, args.method)
    graph = _load(args.input, args.format)
    P = build_transition(graph)
    v = load_teleport(args.teleport_file, graph.n) if args.teleport_file else None
    op = GoogleOperator(P, args.alpha, v)
    report = solve(op, cfg)
    if args.report:
        Path(args.report).write_text(dumps(report_dict(report, Path(args.input).name, graph.n)) + "\n")
    if args.ranks:
        with open(args.ranks, "w") as f:
            for node, score in top_ranks(report.x, graph.ids, args.top_k):
                f.write(f"{node}\t{score:.17g}\n")
    status = "converged" if report.converged else "NOT converged"
    print(
        f"{report.method}: {status} in {report.cycles} cycles, {report.mvp} mvp, "
        f"residual {report.final_residual:.3e}, {report.wall_time:.3f}s",
        file=sys.stderr,
    )
    return EX_OK if report.converged else EX_NOCONV


@dataclass(frozen=True)
class BenchSpec:
    datasets: tuple
    alphas: tuple = (0.85, 0.90, 0.95, 0.99)
    ms: tuple = (6, 7, 8, 9, 10)
    tols: tuple = (1e-7, 1e-8)
    methods: tuple = METHODS
    max_mvp: int = 100_000
    fmt: str = "auto"

    def __post_init__(self):
        for name in ("datasets", "alphas", "ms", "tols", "methods"):
            if not getattr(self, name):
                raise UsageError(f"bench spec needs a non-empty {name} list")
        for a in self.alphas:
            _check_alpha(a)
        if any(m < 2 for m in self.ms):
            raise UsageError("every m must be at least 2")
        if any(t <= 0 for t in self.tols):
            raise UsageError("every tol must be positive")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise UsageError(f"unknown methods {bad}")

    def cells(self):
        """Sweep cells in output order; power variants ignore ``m`` and get one cell."""
        out = []
        for ds, method, alpha, tol in itertools.product(self.datasets, self.methods, self.alphas, self.tols):
            ms = self.ms if method in KRYLOV_METHODS else (None,)
            for m in ms:
                out.append((ds, method, alpha, m, tol))
        return out


def _bench_cell(graphs, spec, cell):
    ds, method, alpha, m, tol = cell
    P = graphs[ds]
    row = {"dataset": Path(ds).stem, "method": method, "alpha": alpha,
           "m": "-" if m is None else m, "tol": tol}
    try:
        op = GoogleOperator(P, alpha)
        cfg = SolveConfig(method=method, m=m or 2, tol=tol, max_mvp=spec.max_mvp)
        rep = solve(op, cfg)
        row.update(cycles=rep.cycles if m is not None else "-", mvp=rep.mvp,
                   wall_time_s=f"{rep.wall_time:.6f}", converged=str(rep.converged).lower())
    except Exception as exc:  # a failed cell must not stop the sweep
        print(f"bench cell {cell} failed: {exc}", file=sys.stderr)
        row.update(cycles="-", mvp="-", wall_time_s="-", converged="false")
    return row


def run_bench(spec: BenchSpec, out):
    graphs = {ds: build_transition(_load(ds, spec.fmt)) for ds in spec.datasets}
    cells = spec.cells()
    with ThreadPoolExecutor(_threads()) as pool:
        rows = list(pool.map(lambda c: _bench_cell(graphs, spec, c), cells))
    writer = csv.DictWriter(out, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return rows


def _bench_spec(args):
    if args.spec:
        raw = json.loads(Path(args.spec).read_text())
        keys = {"datasets", "alphas", "ms", "tols", "methods", "max_mvp", "format"}
        unknown = set(raw) - keys
        if unknown:
            raise UsageError(f"unknown bench spec keys {sorted(unknown)}")
        kw = {k: tuple(raw[k]) for k in ("datasets", "alphas", "ms", "tols", "methods") if k in raw}
        if "max_mvp" in raw:
            kw["max_mvp"] = int(raw["max_mvp"])
        if "format" in raw:
            kw["fmt"] = raw["format"]
        return BenchSpec(**kw)
    if not args.input:
        raise UsageError("bench needs --spec or at least one --input")
    kw = {"datasets": tuple(args.input), "max_mvp": args.max_mvp, "fmt": args.format}
    for key, val in (("alphas", args.alpha), ("ms", args.m), ("tols", args.tol), ("methods", args.methods)):
        if val:
            kw[key] = tuple(val)
    return BenchSpec(**kw)


def cmd_bench(args):
    spec = _bench_spec(args)
    if args.out and args.out != "-":
        with open(args.out, "w", newline="") as f:
            run_bench(spec, f)
    else:
        run_bench(spec, sys.stdout)
    return EX_OK


def _start_vector(spec, n):
    if spec == "uniform":
        return np.full(n, 1.0 / n)
    if spec == "e1":
        q = np.zeros(n)
        q[0] = 1.0
        return q
    q = np.loadtxt(spec, dtype=float, ndmin=1)
    if q.shape != (n,):
        raise UsageError(f"--q0 file has {q.size} entries, operator has dimension {n}")
    return q


def _raw_operator(path, fmt, graph):
    name = str(path).lower()
    if fmt == "mtx" or (fmt == "auto" and (name.endswith(".mtx") or name.endswith(".mtx.gz"))):
        return sp.csr_matrix(scipy.io.mmread(path))
    return sp.csr_matrix((np.ones(graph.nnz), (graph.dst, graph.src)), shape=(graph.n, graph.n))


def cmd_spectrum(args):
    if args.m < 1:
        raise UsageError("--m must be positive")
    graph = _load(args.input, args.format)
    if args.operator == "google":
        _check_alpha(args.alpha)
        A = GoogleOperator(build_transition(graph), args.alpha)
    else:
        A = _raw_operator(args.input, args.format, graph)
    n = A.shape[0] if sp.issparse(A) else A.n
    warnings_ = []
    m = args.m
    if m > n:
        warnings_.append(f"m={m} exceeds the dimension {n}; using m={n}")
        m = n
    q0 = _start_vector(args.q0, n)
    run = hessenberg_process if args.process == "hessenberg" else arnoldi_process
    decomp = run(A, q0, m)
    if decomp.breakdown_at is not None:
        warnings_.append(f"breakdown at step {decomp.breakdown_at}; dump covers {decomp.steps} Ritz values")
    diagnostics.spectrum_dump(decomp, args.out)
    diag = {
        "process": args.process,
        "operator": args.operator,
        "m": m,
        "steps": decomp.steps,
        "breakdown_at": decomp.breakdown_at,
        "decomposition_residual": diagnostics.decomposition_residual(A, decomp),
        "decomposition_error": diagnostics.decomposition_error(A, decomp),
        "basis_condition": diagnostics.basis_condition(decomp),
        "warning": "; ".join(warnings_) or None,
    }
    if args.diag:
        Path(args.diag).write_text(dumps(diag) + "\n")
    for w in warnings_:
        print(f"warning: {w}", file=sys.stderr)
    return EX_OK


def build_parser():
    parser = _Parser(prog="prnk", description="Hessenberg-type and baseline PageRank solvers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt_kw = dict(choices=("auto", "snap", "mtx", "cache"), default="auto")

    p = sub.add_parser("convert", help="parse a graph and write the binary cache")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--format", **fmt_kw)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("solve", help="compute one PageRank vector")
    p.add_argument("--input", required=True)
    p.add_argument("--format", **fmt_kw)
    p.add_argument("--method", choices=METHODS, default="hessenberg")
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-mvp", type=int, default=100_000)
    p.add_argument("--period", type=int, default=None, help="extrapolation period for power variants")
    p.add_argument("--raw-restart", action="store_true", help="restart without max-entry renormalization")
    p.add_argument("--teleport-file")
    p.add_argument("--top-k", type=int, default=10, help="0 writes every node")
    p.add_argument("--report")
    p.add_argument("--ranks")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="sweep methods x alpha x m x tol into a CSV")
    p.add_argument("--spec", help="JSON file with datasets/alphas/ms/tols/methods lists")
    p.add_argument("--input", action="append")
    p.add_argument("--format", **fmt_kw)
    p.add_argument("--alpha", type=float, nargs="+")
    p.add_argument("--m", type=int, nargs="+")
    p.add_argument("--tol", type=float, nargs="+")
    p.add_argument("--methods", nargs="+", choices=METHODS)
    p.add_argument("--max-mvp", type=int, default=100_000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("spectrum", help="dump Ritz values and decomposition diagnostics")
    p.add_argument("--input", required=True)
    p.add_argument("--format", **fmt_kw)
    p.add_argument("--process", choices=KRYLOV_METHODS, default="hessenberg")
    p.add_argument("--operator", choices=("google", "raw"), default="google")
    p.add_argument("--alpha", type=float, default=0.85)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--q0", default="uniform", help="uniform, e1 or a file with one float per line")
    p.add_argument("--out", required=True)
    p.add_argument("--diag")
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"prnk: {exc}", file=sys.stderr)
        return EX_USAGE
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"prnk: {exc}", file=sys.stderr)
        return EX_NOINPUT
    except (GraphParseError, ValueError) as exc:
        print(f"prnk: {exc}", file=sys.stderr)
        return EX_DATAERR


if __name__ == "__main__":
    sys.exit(main())
