"""Dense kernels for the small projected matrices of a Krylov cycle.

Everything here works on matrices of at most a few dozen rows: the
``(m+1) x m`` Hessenberg matrix, its square part and the basis ``R``
factor. Robustness matters more than speed, so the SVD is a textbook
Golub-Reinsch implementation and the eigensolver is a Francis
double-shift QR iteration followed by a complex Schur back-substitution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = np.finfo(float).eps

__all__ = [
    "ConvergenceError",
    "SingularTriplet",
    "svd",
    "smallest_singular_triplet",
    "hessenberg_eig",
    "qr_reduced",
]


class ConvergenceError(RuntimeError):
    """Raised when an iterative dense kernel fails to converge."""

    def __init__(self, msg, matrix=None):
        super().__init__(msg)
        self.matrix = matrix


@dataclass(frozen=True)
class SingularTriplet:
    sigma: float
    u: np.ndarray
    v: np.ndarray


def _as_finite(M) -> np.ndarray:
    M = np.array(M, dtype=float, copy=True)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def _householder(x):
    """Return ``(v, beta)`` with ``(I - beta v v^T) x = alpha e_1``."""
    v = np.array(x, dtype=float, copy=True)
    normx = np.linalg.norm(v)
    if normx == 0.0:
        return v, 0.0
    alpha = -normx if v[0] >= 0 else normx
    v[0] -= alpha
    vtv = v @ v
    if vtv == 0.0:
        return v, 0.0
    return v, 2.0 / vtv


def _givens(a, b):
    """Return ``(c, s, r)`` such that ``c*a + s*b = r`` and ``-s*a + c*b = 0``."""
    if b == 0.0:
        return 1.0, 0.0, a
    r = float(np.hypot(a, b))
    return a / r, b / r, r


def _rotate_cols(X, i, k, c, s):
    xi = X[:, i].copy()
    X[:, i] = c * xi + s * X[:, k]
    X[:, k] = -s * xi + c * X[:, k]


def _bidiagonalize(A):
    m, n = A.shape
    A = A.copy()
    left, right = [], []
    for k in range(n):
        v, beta = _householder(A[k:, k])
        if beta:
            A[k:, k:] -= beta * np.outer(v, v @ A[k:, k:])
        left.append((v, beta))
        if k < n - 2:
            v, beta = _householder(A[k, k + 1:])
            if beta:
                A[k:, k + 1:] -= beta * np.outer(A[k:, k + 1:] @ v, v)
            right.append((v, beta))
    d = np.diag(A)[:n].copy()
    e = np.array([A[k, k + 1] for k in range(n - 1)])
    U = np.zeros((m, n))
    U[:n, :n] = np.eye(n)
    for k in reversed(range(n)):
        v, beta = left[k]
        if beta:
            U[k:, :] -= beta * np.outer(v, v @ U[k:, :])
    V = np.eye(n)
    for k in reversed(range(len(right))):
        v, beta = right[k]
        if beta:
            V[k + 1:, :] -= beta * np.outer(v, v @ V[k + 1:, :])
    return U, d, e, V


def _gk_sweep(d, e, lo, hi, U, V):
    # Wilkinson shift from the trailing 2x2 block of B^T B.
    t11 = d[hi - 1] ** 2 + (e[hi - 2] ** 2 if hi - 1 > lo else 0.0)
    t12 = d[hi - 1] * e[hi - 1]
    t22 = d[hi] ** 2 + e[hi - 1] ** 2
    delta = 0.5 * (t11 - t22)
    denom = delta + np.copysign(np.hypot(delta, t12), delta if delta != 0 else 1.0)
    mu = t22 - t12 * t12 / denom if denom != 0.0 else t22
    y = d[lo] ** 2 - mu
    z = d[lo] * e[lo]
    for k in range(lo, hi):
        c, s, r = _givens(y, z)
        if k > lo:
            e[k - 1] = r
        y = c * d[k] + s * e[k]
        e[k] = -s * d[k] + c * e[k]
        z = s * d[k + 1]
        d[k + 1] = c * d[k + 1]
        _rotate_cols(V, k, k + 1, c, s)
        c, s, r = _givens(y, z)
        d[k] = r
        y = c * e[k] + s * d[k + 1]
        d[k + 1] = -s * e[k] + c * d[k + 1]
        if k < hi - 1:
            z = s * e[k + 1]
            e[k + 1] = c * e[k + 1]
        _rotate_cols(U, k, k + 1, c, s)
    e[hi - 1] = y


def _chase_zero_diagonal(d, e, i, hi, U):
    # d[i] == 0: push e[i] off the bottom with left rotations against rows i+1..hi.
    f = e[i]
    e[i] = 0.0
    for k in range(i + 1, hi + 1):
        c, s, r = _givens(d[k], f)
        d[k] = r
        _rotate_cols(U, k, i, c, s)
        if k < hi:
            f = -s * e[k]
            e[k] = c * e[k]


def _chase_zero_last(d, e, lo, hi, V):
    # d[hi] == 0: push e[hi-1] off the top with right rotations against columns hi-1..lo.
    f = e[hi - 1]
    e[hi - 1] = 0.0
    for k in range(hi - 1, lo - 1, -1):
        c, s, r = _givens(d[k], f)
        d[k] = r
        _rotate_cols(V, k, hi, c, s)
        if k > lo:
            f = -s * e[k - 1]
            e[k - 1] = c * e[k - 1]


def svd(M):
    """Thin singular value decomposition of a tall small matrix.

    Parameters
    ----------
    M : array_like, shape (rows, cols) with rows >= cols

    Returns
    -------
    U : ndarray, shape (rows, cols)
    sigma : ndarray, shape (cols,), sorted descending
    V : ndarray, shape (cols, cols)
        ``M = U @ diag(sigma) @ V.T``.
    """
    A = _as_finite(M)
    m, n = A.shape
    if m < n:
        raise ValueError(f"svd expects rows >= cols, got {m}x{n}")
    if n == 0:
        return np.zeros((m, 0)), np.zeros(0), np.zeros((0, 0))
    U, d, e, V = _bidiagonalize(A)
    bnorm = max(np.max(np.abs(d)), np.max(np.abs(e)) if n > 1 else 0.0)
    max_sweeps = 75 * n
    sweeps = 0
    while True:
        for i in range(n - 1):
            if abs(e[i]) <= EPS * (abs(d[i]) + abs(d[i + 1])):
                e[i] = 0.0
        for i in range(n):
            if abs(d[i]) <= EPS * bnorm:
                d[i] = 0.0
        hi = n - 1
        while hi > 0 and e[hi - 1] == 0.0:
            hi -= 1
        if hi == 0:
            break
        lo = hi - 1
        while lo > 0 and e[lo - 1] != 0.0:
            lo -= 1
        sweeps += 1
        if sweeps > max_sweeps:
            raise ConvergenceError("bidiagonal QR did not converge", A)
        zero = [i for i in range(lo, hi) if d[i] == 0.0]
        if zero:
            _chase_zero_diagonal(d, e, zero[0], hi, U)
        elif d[hi] == 0.0:
            _chase_zero_last(d, e, lo, hi, V)
        else:
            _gk_sweep(d, e, lo, hi, U, V)
    neg = d < 0
    d[neg] = -d[neg]
    V[:, neg] = -V[:, neg]
    order = np.argsort(-d, kind="stable")
    return U[:, order], d[order], V[:, order]


def smallest_singular_triplet(M) -> SingularTriplet:
    """Singular triplet of ``M`` for its smallest singular value.

    Among numerically equal minimal singular values the one with the
    largest index is taken, and the pair ``(u, v)`` is sign-flipped so
    that ``sum(v) >= 0``.
    """
    U, sigma, V = svd(M)
    n = sigma.size
    if n == 0:
        raise ValueError("matrix has no columns")
    smin = sigma[-1]
    zero_tol = 1e-14 * sigma[0]
    ties = np.flatnonzero(sigma <= smin + zero_tol)
    k = int(ties[-1])
    u, v = U[:, k].copy(), V[:, k].copy()
    if v.sum() < 0:
        u, v = -u, -v
    return SingularTriplet(float(sigma[k]), u, v)


def _francis_schur(H):
    n = H.shape[0]
    T = H.copy()
    Z = np.eye(n)
    hi = n - 1
    its = 0
    total = 0
    max_total = 100 * max(n, 1)
    while hi >= 1:
        l = hi
        while l > 0:
            s = abs(T[l - 1, l - 1]) + abs(T[l, l])
            if s == 0.0:
                s = np.linalg.norm(T[: hi + 1, : hi + 1], 1)
            if abs(T[l, l - 1]) <= EPS * s:
                T[l, l - 1] = 0.0
                break
            l -= 1
        if l == hi:
            hi -= 1
            its = 0
            continue
        if l == hi - 1:
            hi -= 2
            its = 0
            continue
        its += 1
        total += 1
        if total > max_total:
            raise ConvergenceError("Hessenberg QR did not converge", H)
        if its % 11 == 10:
            # exceptional shift to break cycling
            w = abs(T[hi, hi - 1]) + abs(T[hi - 1, hi - 2])
            s = 2.0 * T[hi, hi] + 1.5 * w
            t = (T[hi, hi] + 0.75 * w) ** 2
        else:
            s = T[hi - 1, hi - 1] + T[hi, hi]
            t = T[hi - 1, hi - 1] * T[hi, hi] - T[hi - 1, hi] * T[hi, hi - 1]
        x = T[l, l] ** 2 + T[l, l + 1] * T[l + 1, l] - s * T[l, l] + t
        y = T[l + 1, l] * (T[l, l] + T[l + 1, l + 1] - s)
        z = T[l + 1, l] * T[l + 2, l + 1]
        for k in range(l, hi - 1):
            v, beta = _householder([x, y, z])
            if beta:
                r = max(l, k - 1)
                T[k:k + 3, r:] -= beta * np.outer(v, v @ T[k:k + 3, r:])
                rr = min(k + 3, hi)
                T[: rr + 1, k:k + 3] -= beta * np.outer(T[: rr + 1, k:k + 3] @ v, v)
                Z[:, k:k + 3] -= beta * np.outer(Z[:, k:k + 3] @ v, v)
            x = T[k + 1, k]
            y = T[k + 2, k]
            if k < hi - 2:
                z = T[k + 3, k]
        v, beta = _householder([x, y])
        if beta:
            T[hi - 1:hi + 1, hi - 2:] -= beta * np.outer(v, v @ T[hi - 1:hi + 1, hi - 2:])
            T[: hi + 1, hi - 1:hi + 1] -= beta * np.outer(T[: hi + 1, hi - 1:hi + 1] @ v, v)
            Z[:, hi - 1:hi + 1] -= beta * np.outer(Z[:, hi - 1:hi + 1] @ v, v)
        for i in range(l + 2, hi + 1):
            T[i, l:i - 1] = 0.0
    return np.triu(T, -1), Z


def _block_eigenvalues(a, b, c, d):
    """Eigenvalues of a 2x2 block plus the shift ``mu = theta_1 - d``.

    For a real pair ``theta_1`` is the eigenvalue nearer ``a``, computed
    without cancellation so that the triangularizing rotation is accurate.
    """
    p = 0.5 * (a - d)
    disc = p * p + b * c
    if disc >= 0:
        z = p + np.copysign(np.sqrt(disc), p if p != 0 else 1.0)
        if z == 0.0:
            return complex(d), complex(d), 0.0
        return complex(d + z), complex(d - b * c / z), z
    root = np.sqrt(-disc)
    mid = 0.5 * (a + d)
    return complex(mid, root), complex(mid, -root), complex(p, root)


def hessenberg_eig(H):
    """Eigenvalues and unit right eigenvectors of a small upper-Hessenberg matrix.

    Returns
    -------
    theta : ndarray of complex, shape (m,)
        Real eigenvalues have zero imaginary part; complex ones come in
        exactly conjugate pairs.
    Y : ndarray of complex, shape (m, m)
        Column ``i`` is the eigenvector for ``theta[i]`` with ``||y||_2 = 1``.
        Eigenvectors of real eigenvalues are real.

    Raises
    ------
    ConvergenceError
        If the QR iteration exceeds ``100 * m`` sweeps.
    """
    H = _as_finite(H)
    n = H.shape[0]
    if H.shape != (n, n):
        raise ValueError("hessenberg_eig expects a square matrix")
    if n and np.any(np.tril(H, -2)):
        raise ValueError("matrix is not upper Hessenberg")
    if n == 0:
        return np.zeros(0, complex), np.zeros((0, 0), complex)
    T, Z = _francis_schur(H)

    # Eigenvalues from the quasi-triangular blocks, then the complex Schur form.
    theta = np.zeros(n, complex)
    shift = {}
    is_real = np.ones(n, bool)
    k = 0
    while k < n:
        if k < n - 1 and T[k + 1, k] != 0.0:
            l1, l2, mu = _block_eigenvalues(T[k, k], T[k, k + 1], T[k + 1, k], T[k + 1, k + 1])
            theta[k], theta[k + 1] = l1, l2
            shift[k + 1] = mu
            is_real[k] = is_real[k + 1] = l1.imag == 0.0
            k += 2
        else:
            theta[k] = T[k, k]
            k += 1
    Tc = T.astype(complex)
    Zc = Z.astype(complex)
    for k in range(n - 1, 0, -1):
        if Tc[k, k - 1] != 0:
            mu = shift[k]
            r = np.hypot(abs(mu), abs(Tc[k, k - 1]))
            c = mu / r
            s = Tc[k, k - 1] / r
            G = np.array([[np.conj(c), s], [-s, c]])
            Tc[k - 1:k + 1, k - 1:] = G @ Tc[k - 1:k + 1, k - 1:]
            Tc[: k + 1, k - 1:k + 1] = Tc[: k + 1, k - 1:k + 1] @ G.conj().T
            Zc[:, k - 1:k + 1] = Zc[:, k - 1:k + 1] @ G.conj().T
            Tc[k, k - 1] = 0.0
    np.fill_diagonal(Tc, theta)

    smin = max(EPS * np.linalg.norm(H, 1), np.finfo(float).tiny)
    Y = np.zeros((n, n), complex)
    for k in range(n):
        if theta[k].imag < 0 and k > 0 and theta[k - 1] == np.conj(theta[k]):
            Y[:, k] = np.conj(Y[:, k - 1])
            continue
        w = np.zeros(n, complex)
        w[k] = 1.0
        for i in range(k - 1, -1, -1):
            den = Tc[i, i] - theta[k]
            if abs(den) < smin:
                den = smin
            w[i] = -(Tc[i, i + 1:k + 1] @ w[i + 1:k + 1]) / den
        y = Zc @ w
        j = int(np.argmax(np.abs(y)))
        y *= np.conj(y[j]) / abs(y[j])
        if is_real[k]:
            y = y.real.astype(complex)
        Y[:, k] = y / np.linalg.norm(y)
    return theta, Y


def qr_reduced(L):
    """Reduced QR factorization with a positive diagonal in ``R``.

    Raises
    ------
    np.linalg.LinAlgError
        If some ``|r_ii|`` falls below ``1e-12 * ||L||_F``.
    """
    L = _as_finite(L)
    Q, R = np.linalg.qr(L, mode="reduced")
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = signs[:, None] * R
    scale = np.linalg.norm(L)
    if R.size and np.min(np.diag(R)) <= 1e-12 * scale:
        raise np.linalg.LinAlgError("matrix is numerically rank deficient")
    return Q, R
