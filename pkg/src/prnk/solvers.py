"""PageRank drivers sharing one configuration and report format.

Methods
-------
power         plain power iteration
power-tan     power iteration with periodic linear extrapolation
qe-power      power iteration with periodic quadratic extrapolation
arnoldi       refined restarted Arnoldi
hessenberg    refined restarted Hessenberg process

The refined Krylov drivers take, each cycle, the right singular vector of
``Hbar_m - [I_m; 0]`` for its smallest singular value. Since
``A Q_m = Q_{m+1} Hbar_m``, the residual of ``q = Q_m v`` is
``sigma * Q_{m+1} u`` and costs no extra operator application.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .dense_small import smallest_singular_triplet
from .google import GoogleOperator, norm1, norm_inf_with_argmax, residual_direct
from .krylov import arnoldi_process, hessenberg_process

__all__ = [
    "METHODS",
    "KRYLOV_METHODS",
    "DegenerateStartError",
    "SolveConfig",
    "CycleRecord",
    "SolveReport",
    "power",
    "power_linear_extrapolation",
    "power_quadratic_extrapolation",
    "refined_krylov_pagerank",
    "verify_report",
    "verify_cycle",
    "solve",
]

METHODS = ("power", "power-tan", "qe-power", "arnoldi", "hessenberg")
KRYLOV_METHODS = ("arnoldi", "hessenberg")
_DEFAULT_PERIOD = {"power-tan": 10, "qe-power": 5}


class DegenerateStartError(RuntimeError):
    """The start vector spans an invariant subspace that is not the PageRank direction."""


@dataclass(frozen=True)
class SolveConfig:
    method: str = "hessenberg"
    m: int = 8
    tol: float = 1e-8
    max_mvp: int = 100_000
    period: Optional[int] = None
    x0: Optional[np.ndarray] = None
    raw_restart: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_mvp < 1:
            raise ValueError("max_mvp must be at least 1")
        if self.method in KRYLOV_METHODS and self.m < 2:
            raise ValueError("Krylov methods need m >= 2")
        if self.method == "qe-power" and self.extrapolation_period < 4:
            raise ValueError("quadratic extrapolation needs a period of at least 4")
        if self.method == "power-tan" and self.extrapolation_period < 2:
            raise ValueError("linear extrapolation needs a period of at least 2")

    @property
    def extrapolation_period(self) -> int:
        if self.period is not None:
            return self.period
        return _DEFAULT_PERIOD.get(self.method, 0)

    def start_vector(self, n):
        if self.x0 is None:
            return np.full(n, 1.0 / n)
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (n,):
            raise ValueError("initial vector has the wrong length")
        return x0


@dataclass(frozen=True)
class CycleRecord:
    """One refined Krylov cycle: ``q = Q_k v`` and ``r = sigma Q_{k+1} u``."""

    cycle: int
    q: np.ndarray
    sigma: float
    u: np.ndarray
    v: np.ndarray
    basis: np.ndarray
    residual: float
    breakdown_at: Optional[int] = None


@dataclass
class SolveReport:
    method: str
    alpha: float
    m: Optional[int]
    tol: float
    x: np.ndarray
    cycles: int
    mvp: int
    extra_mvp: int
    residual_history: List[float]
    final_residual: float
    wall_time: float
    converged: bool
    breakdowns: List[int] = field(default_factory=list)
    min_entry: float = 0.0
    last_cycle: Optional[CycleRecord] = field(default=None, repr=False)


def _finish(x):
    """Sign-fix, clamp and 1-norm normalize a PageRank candidate."""
    if x.sum() < 0:
        x = -x
    x = x / norm1(x)
    min_entry = float(x.min())
    x = np.maximum(x, 0.0)
    return x / x.sum(), min_entry


def _power_driver(op, cfg, method, extrapolate):
    n = op.n
    tol = cfg.tol
    x = cfg.start_vector(n)
    x = x / norm1(x)
    history = []
    window = deque(maxlen=4)
    window.append(x)
    mvp = 0
    converged = False
    t0 = time.perf_counter()
    while mvp < cfg.max_mvp:
        y = op.apply(x)
        mvp += 1
        y /= norm1(y)
        diff = norm1(y - x)
        history.append(diff)
        x_prev, x = x, y
        if diff < tol:
            converged = True
            break
        window.append(x)
        if extrapolate is not None and mvp % cfg.extrapolation_period == 0:
            z = extrapolate(window, x_prev, x, op, cfg)
            if z is not None:
                x = z
                window.clear()
                window.append(x)
    wall = time.perf_counter() - t0
    x, min_entry = _finish(x)
    _, final = residual_direct(op, x)
    return SolveReport(
        method=method, alpha=op.alpha, m=None, tol=tol, x=x, cycles=mvp, mvp=mvp,
        extra_mvp=1, residual_history=history, final_residual=final, wall_time=wall,
        converged=converged and final < tol, min_entry=min_entry,
    )


def power(op: GoogleOperator, cfg: SolveConfig) -> SolveReport:
    """Power iteration stopped on ``||x_k - x_{k-1}||_1 < tol``.

    Each iterate has unit 1-norm, so the stopping quantity is the residual
    of the previous iterate. One extra application verifies the result.
    """
    return _power_driver(op, cfg, "power", None)


def _linear_extrapolation(window, x_prev, x, op, cfg):
    # Removes the error component along an eigenvalue equal to alpha.
    c = op.alpha / (1.0 - op.alpha)
    z = np.maximum(x + c * (x - x_prev), 0.0)
    s = z.sum()
    return z / s if s > 0 else None


def power_linear_extrapolation(op: GoogleOperator, cfg: SolveConfig) -> SolveReport:
    """Power iteration with ``x + alpha/(1-alpha) (x_k - x_{k-1})`` every ``period`` steps."""
    return _power_driver(op, cfg, "power-tan", _linear_extrapolation)


def _quadratic_extrapolation(window, x_prev, x, op, cfg):
    if len(window) < 4:
        return None
    x3, x2, x1, x0 = window[0], window[1], window[2], window[3]
    y1, y2, y3 = x2 - x3, x1 - x3, x0 - x3
    if norm1(y3) < cfg.tol:
        return None
    Y = np.column_stack([y1, y2])
    gamma, *_ = np.linalg.lstsq(Y, -y3, rcond=1e-12)
    g1, g2, g3 = gamma[0], gamma[1], 1.0
    b0, b1, b2 = g1 + g2 + g3, g2 + g3, g3
    z = b0 * x2 + b1 * x1 + b2 * x0
    if z.sum() < 0:
        z = -z
    z = np.maximum(z, 0.0)
    s = z.sum()
    if not np.isfinite(s) or s == 0:
        return None
    return z / s


def power_quadratic_extrapolation(op: GoogleOperator, cfg: SolveConfig) -> SolveReport:
    """Power iteration with quadratic extrapolation every ``period`` steps.

    The last four iterates ``x_{k-3} .. x_k`` give differences
    ``y_j = x_{k-3+j} - x_{k-3}``; the 2-column least-squares problem
    ``[y_1 y_2] g = -y_3`` yields the weights of the combination of
    ``x_{k-2}, x_{k-1}, x_k``. Negative entries are clamped before
    renormalizing. The step is skipped when ``||y_3||_1 < tol``.
    """
    return _power_driver(op, cfg, "qe-power", _quadratic_extrapolation)


def _signed_max_normalize(q):
    _, beta = norm_inf_with_argmax(q)
    return q / beta


def refined_krylov_pagerank(
    op: GoogleOperator,
    cfg: SolveConfig,
    process: str = "hessenberg",
    on_cycle: Optional[Callable[[CycleRecord], None]] = None,
) -> SolveReport:
    """Refined restarted Hessenberg or Arnoldi PageRank.

    Each cycle runs ``m`` process steps from the current vector, takes the
    smallest singular triplet of ``Hbar_m - [I_m; 0]`` and forms
    ``q = Q_m v`` together with its residual ``sigma Q_{m+1} u``. The loop
    stops once ``||r||_1 / ||q||_1 < tol`` or the mvp budget would be
    exceeded by another cycle.

    After a happy breakdown at step ``j`` the start vector is returned if
    its direct residual is below ``tol``; otherwise the cycle continues in
    the ``j``-dimensional invariant subspace. A breakdown at ``j = 1`` with
    a nonzero residual raises :class:`DegenerateStartError`.
    """
    if process not in KRYLOV_METHODS:
        raise ValueError(f"unknown Krylov process {process!r}")
    run = hessenberg_process if process == "hessenberg" else arnoldi_process
    n = op.n
    m = min(cfg.m, n)
    tol = cfg.tol
    q0 = _signed_max_normalize(cfg.start_vector(n))

    history, breakdowns = [], []
    calls = 0

    def counted(x):
        nonlocal calls
        calls += 1
        return op.apply(x)

    mvp = extra = cycles = 0
    converged = False
    record = None
    q = q0
    t0 = time.perf_counter()
    while mvp + m <= cfg.max_mvp:
        if cycles and not cfg.raw_restart:
            q0 = _signed_max_normalize(q0)
        calls = 0
        decomp = run(counted, q0, m)
        mvp += calls
        cycles += 1
        k = decomp.steps
        if decomp.breakdown_at is not None:
            breakdowns.append(decomp.breakdown_at)
            _, res0 = residual_direct(op, q0)
            extra += 1
            if res0 < tol:
                q = q0
                history.append(res0)
                converged = True
                break
            if k == 1:
                raise DegenerateStartError(
                    f"Krylov space of the start vector is invariant at step 1 (residual {res0:.3e})"
                )
        shifted = decomp.hbar.copy()
        shifted[np.arange(k), np.arange(k)] -= 1.0
        trip = smallest_singular_triplet(shifted)
        q = decomp.basis[:, :k] @ trip.v
        r = trip.sigma * (decomp.basis @ trip.u)
        res = norm1(r) / norm1(q)
        history.append(res)
        record = CycleRecord(cycles, q, trip.sigma, trip.u, trip.v, decomp.basis, res, decomp.breakdown_at)
        if on_cycle is not None:
            on_cycle(record)
        if res < tol:
            converged = True
            break
        q0 = q
    wall = time.perf_counter() - t0
    x, min_entry = _finish(q)
    _, final = residual_direct(op, x)
    extra += 1
    return SolveReport(
        method=process, alpha=op.alpha, m=m, tol=tol, x=x, cycles=cycles, mvp=mvp,
        extra_mvp=extra, residual_history=history, final_residual=final, wall_time=wall,
        converged=converged, breakdowns=breakdowns, min_entry=min_entry, last_cycle=record,
    )


def verify_report(op: GoogleOperator, report: SolveReport) -> float:
    """``||(A q - q) - sigma Q_{m+1} u||_1 / ||q||_1`` for the last Krylov cycle."""
    rec = report.last_cycle
    if rec is None:
        raise ValueError("report carries no Krylov cycle")
    return verify_cycle(op, rec)


def verify_cycle(op, rec: CycleRecord) -> float:
    direct = op.apply(rec.q) - rec.q
    cheap = rec.sigma * (rec.basis @ rec.u)
    return norm1(direct - cheap) / norm1(rec.q)


def solve(op: GoogleOperator, cfg: SolveConfig, on_cycle=None) -> SolveReport:
    """Dispatch on ``cfg.method``."""
    if cfg.method == "power":
        return power(op, cfg)
    if cfg.method == "power-tan":
        return power_linear_extrapolation(op, cfg)
    if cfg.method == "qe-power":
        return power_quadratic_extrapolation(op, cfg)
    return refined_krylov_pagerank(op, cfg, cfg.method, on_cycle)
