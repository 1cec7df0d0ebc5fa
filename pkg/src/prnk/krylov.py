"""Krylov decompositions ``A L_k = L_{k+1} Hbar_k`` and their Ritz pairs.

Two processes build the decomposition from a starting vector:

* the Hessenberg process with row pivoting, whose basis vectors are
  normalized to unit infinity norm and are unit lower trapezoidal once
  their rows are read in pivot order;
* Arnoldi with modified Gram-Schmidt, whose basis is orthonormal.

Both accept any callable ``apply(x) -> A @ x``; dense arrays and scipy
sparse matrices are wrapped automatically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dense_small import hessenberg_eig
from .google import norm_inf_with_argmax

__all__ = [
    "BREAKDOWN_TOL",
    "KrylovDecomposition",
    "RitzPair",
    "as_apply",
    "hessenberg_process",
    "arnoldi_process",
    "ritz_pairs",
]

BREAKDOWN_TOL = 1e-13


def as_apply(A) -> Callable[[np.ndarray], np.ndarray]:
    if callable(A):
        return A
    return lambda x: A @ x


@dataclass(frozen=True)
class KrylovDecomposition:
    """Result of ``k`` steps of a Krylov process.

    ``basis`` has ``k + 1`` columns and ``hbar`` is ``(k+1) x k``. After a
    breakdown the last basis column is zero and ``hbar[k, k-1] == 0``.
    ``pivots`` is the row permutation of the Hessenberg process (``None``
    for Arnoldi).
    """

    basis: np.ndarray
    hbar: np.ndarray
    kind: str
    pivots: Optional[np.ndarray] = None
    breakdown_at: Optional[int] = None

    @property
    def steps(self) -> int:
        return self.hbar.shape[1]

    @property
    def H(self) -> np.ndarray:
        k = self.steps
        return self.hbar[:k, :k]

    @property
    def h_next(self) -> float:
        return float(self.hbar[-1, -1])


@dataclass(frozen=True)
class RitzPair:
    theta: complex
    y: np.ndarray
    x: np.ndarray
    last_component: complex
    bound: float


def _check_start(q0, m):
    q0 = np.array(q0, dtype=float)
    if q0.ndim != 1 or q0.size == 0:
        raise ValueError("starting vector must be a non-empty 1-D array")
    n = q0.size
    if not 1 <= m <= n:
        raise ValueError(f"step budget m={m} outside [1, {n}]")
    if not np.any(q0):
        raise ValueError("starting vector is zero")
    return q0, n


def hessenberg_process(apply, q0, m) -> KrylovDecomposition:
    """Run ``m`` steps of the Hessenberg process with pivoting.

    The pivot ``beta`` keeps its sign, so ``l_1 = q0 / beta`` has a ``+1``
    at its pivot row. A step whose largest remaining entry is at most
    ``BREAKDOWN_TOL * ||A l_j||_inf`` ends the process (happy breakdown).
    """
    apply = as_apply(apply)
    q0, n = _check_start(q0, m)
    L = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    p = np.arange(n)

    i0, beta = norm_inf_with_argmax(q0)
    L[:, 0] = q0 / beta
    p[[0, i0]] = p[[i0, 0]]
    L[p[0], 0] = 1.0

    k, breakdown = m, None
    for j in range(m):
        u = np.array(apply(L[:, j]), dtype=float)
        unorm = np.max(np.abs(u))
        for i in range(j + 1):
            h = u[p[i]]
            H[i, j] = h
            if h != 0.0:
                u -= h * L[:, i]
            u[p[i]] = 0.0
        if j + 1 < n:
            t, piv = norm_inf_with_argmax(u[p[j + 1:]])
            if abs(piv) > BREAKDOWN_TOL * unorm:
                H[j + 1, j] = piv
                col = u / piv
                p[[j + 1, j + 1 + t]] = p[[j + 1 + t, j + 1]]
                col[p[: j + 1]] = 0.0
                col[p[j + 1]] = 1.0
                L[:, j + 1] = col
                continue
            breakdown = j + 1
        k = j + 1
        break
    return KrylovDecomposition(L[:, : k + 1].copy(), H[: k + 1, :k].copy(), "hessenberg", p, breakdown)


def arnoldi_process(apply, q0, m, reorthogonalize=False) -> KrylovDecomposition:
    """Run ``m`` steps of Arnoldi with modified Gram-Schmidt.

    ``reorthogonalize`` adds a second Gram-Schmidt pass (diagnostics only).
    Breakdown is declared when ``||u||_2 <= BREAKDOWN_TOL * ||A v_j||_2``.
    """
    apply = as_apply(apply)
    q0, n = _check_start(q0, m)
    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    V[:, 0] = q0 / np.linalg.norm(q0)

    k, breakdown = m, None
    for j in range(m):
        w = np.array(apply(V[:, j]), dtype=float)
        wnorm = np.linalg.norm(w)
        for i in range(j + 1):
            h = V[:, i] @ w
            H[i, j] = h
            w -= h * V[:, i]
        if reorthogonalize:
            for i in range(j + 1):
                h = V[:, i] @ w
                H[i, j] += h
                w -= h * V[:, i]
        if j + 1 < n:
            hn = np.linalg.norm(w)
            if hn > BREAKDOWN_TOL * wnorm:
                H[j + 1, j] = hn
                V[:, j + 1] = w / hn
                continue
            breakdown = j + 1
        k = j + 1
        break
    return KrylovDecomposition(V[:, : k + 1].copy(), H[: k + 1, :k].copy(), "arnoldi", None, breakdown)


def ritz_pairs(decomp: KrylovDecomposition):
    """Ritz pairs from the square part ``H_k`` of the decomposition.

    Each pair carries ``x = L_k y`` and the residual bound
    ``|h_{k+1,k}| |y_k| ||l_{k+1}||_2``, which equals ``||A x - theta x||_2``
    up to rounding.
    """
    k = decomp.steps
    if k < 1:
        raise ValueError("decomposition has no completed steps")
    theta, Y = hessenberg_eig(decomp.H)
    Lk = decomp.basis[:, :k]
    tail = abs(decomp.h_next) * np.linalg.norm(decomp.basis[:, k])
    pairs = []
    for i in range(k):
        y = Y[:, i]
        pairs.append(RitzPair(complex(theta[i]), y, Lk @ y, complex(y[-1]), float(tail * abs(y[-1]))))
    return pairs
