"""Matrix-free Google matrix and the vector kernels used by the solvers.

The operator is

    A = alpha * (P + v d^T) + (1 - alpha) * v e^T

and is never assembled: one application costs one sparse product with
``P`` plus two reductions and a fused rank-one update.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph_io import TransitionMatrix

__all__ = [
    "WorkCounter",
    "GoogleOperator",
    "apply_google",
    "residual_direct",
    "uniform_teleport",
    "load_teleport",
    "norm1",
    "norm_inf_with_argmax",
    "axpy",
    "scale",
    "vsum",
]


@dataclass
class WorkCounter:
    """Operator applications; ``flops`` follows the ``2 * nnz`` per product model."""

    mvp_count: int = 0
    flops: int = 0

    def add(self, nnz: int, k: int = 1):
        self.mvp_count += k
        self.flops += 2 * nnz * k


def uniform_teleport(n):
    return np.full(n, 1.0 / n)


def load_teleport(path, n):
    """Read a teleport vector (one float per line) and renormalize it exactly."""
    v = np.loadtxt(path, dtype=float, ndmin=1)
    if v.shape != (n,):
        raise ValueError(f"teleport vector has {v.size} entries, graph has {n} nodes")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("teleport vector must be finite and nonnegative")
    if abs(v.sum() - 1.0) > 1e-10:
        raise ValueError(f"teleport vector sums to {v.sum():.17g}, expected 1")
    return v / v.sum()


@dataclass(frozen=True)
class GoogleOperator:
    """Immutable Google matrix; ``counter`` tracks how often it was applied.

    ``partitions > 1`` splits the sparse product into row blocks evaluated on
    a thread pool. Each row is computed independently, so the output does
    not depend on the partition count.
    """

    transition: TransitionMatrix
    alpha: float = 0.85
    v: np.ndarray = None
    partitions: int = 1
    counter: WorkCounter = field(default_factory=WorkCounter, compare=False, repr=False)

    def __post_init__(self):
        n = self.transition.n
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        v = uniform_teleport(n) if self.v is None else np.asarray(self.v, dtype=float)
        if v.shape != (n,):
            raise ValueError("teleport vector length does not match the graph")
        if v.min() < 0 or abs(v.sum() - 1.0) > 1e-14:
            raise ValueError("teleport vector must be a probability vector")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "_dangling_idx", np.flatnonzero(self.transition.dangling))
        bounds = np.linspace(0, n, max(1, self.partitions) + 1).astype(int)
        P = self.transition.P
        blocks = [(a, b, P[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        object.__setattr__(self, "_blocks", blocks)

    @property
    def n(self) -> int:
        return self.transition.n

    @property
    def nnz(self) -> int:
        return self.transition.P.nnz

    def _spmv(self, x):
        if len(self._blocks) <= 1:
            return self.transition.P @ x
        y = np.empty_like(x)

        def run(block):
            a, b, rows = block
            y[a:b] = rows @ x

        with ThreadPoolExecutor(len(self._blocks)) as pool:
            list(pool.map(run, self._blocks))
        return y

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {x.shape}")
        y = self._spmv(x)
        y *= self.alpha
        coef = self.alpha * x[self._dangling_idx].sum() + (1.0 - self.alpha) * x.sum()
        y += coef * self.v
        self.counter.add(self.nnz)
        return y

    __call__ = apply

    def dense(self):
        """Assembled ``n x n`` matrix, for small checks only."""
        P = self.transition.P.toarray()
        d = self.transition.dangling.astype(float)
        return self.alpha * (P + np.outer(self.v, d)) + (1 - self.alpha) * np.outer(self.v, np.ones(self.n))

    def fro_norm(self):
        """Frobenius norm of ``A`` in O(nnz)."""
        P = self.transition.P
        w = self.alpha * self.transition.dangling + (1.0 - self.alpha)
        cross = self.v @ (P @ w)
        sq = self.alpha ** 2 * P.multiply(P).sum() + 2 * self.alpha * cross + (self.v @ self.v) * (w @ w)
        return float(np.sqrt(sq))


def apply_google(op: GoogleOperator, x):
    return op.apply(x)


def residual_direct(op: GoogleOperator, q):
    """``(A q - q, ||A q - q||_1 / ||q||_1)``."""
    q = np.asarray(q, dtype=float)
    nq = norm1(q)
    if nq == 0.0:
        raise ValueError("residual of the zero vector is undefined")
    r = op.apply(q) - q
    return r, norm1(r) / nq


def _nonempty(x):
    x = np.asarray(x)
    if x.size == 0:
        raise ValueError("empty vector")
    return x


def norm1(x):
    return float(np.abs(_nonempty(x)).sum())


def norm_inf_with_argmax(x):
    """Index of the first entry of maximal magnitude and its signed value."""
    x = _nonempty(x)
    i = int(np.argmax(np.abs(x)))
    return i, x[i]


def axpy(a, x, y):
    return a * _nonempty(x) + _nonempty(y)


def scale(a, x):
    return a * _nonempty(x)


def vsum(x):
    return float(_nonempty(x).sum())


def env_partitions(default=1):
    return max(1, int(os.environ.get("PRNK_THREADS", default)))
