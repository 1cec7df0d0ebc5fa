"""Checks on Krylov decompositions and data for Ritz-value plots."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg
from scipy.optimize import linear_sum_assignment

from .dense_small import hessenberg_eig, qr_reduced, svd
from .krylov import KrylovDecomposition, arnoldi_process, as_apply, hessenberg_process, ritz_pairs

__all__ = [
    "QRRelationReport",
    "ProcessBreakdownError",
    "operator_fro_norm",
    "decomposition_residual",
    "decomposition_error",
    "basis_condition",
    "spectrum_distance",
    "verify_qr_relation",
    "spectrum_rows",
    "spectrum_dump",
]


class ProcessBreakdownError(RuntimeError):
    def __init__(self, kind, step):
        super().__init__(f"{kind} process broke down at step {step}")
        self.kind = kind
        self.step = step


@dataclass(frozen=True)
class QRRelationReport:
    """Arnoldi versus QR-transformed Hessenberg decomposition.

    ``ratio_lhs = h^(h)_{m+1,m} / r_{m,m}`` and
    ``ratio_rhs = h_{m+1,m} / r_{m+1,m+1}`` agree in exact arithmetic, and
    ``identity_residual`` measures
    ``H_m - (R_m H^(h)_m R_m^{-1} + ratio_lhs * rtilde e_m^T)`` in the
    Frobenius norm. ``eig_distance`` compares the spectrum of the Arnoldi
    ``H_m`` with that of the reconstructed matrix.
    """

    m: int
    ratio_lhs: float
    ratio_rhs: float
    identity_residual: float
    h_norm: float
    eig_distance: float
    basis_condition: float


def operator_fro_norm(A) -> float:
    if hasattr(A, "fro_norm"):
        return A.fro_norm()
    if sp.issparse(A):
        return float(sp.linalg.norm(A, "fro"))
    if isinstance(A, np.ndarray):
        return float(np.linalg.norm(A))
    raise TypeError("cannot take the Frobenius norm of a bare callable; pass a_norm")


def decomposition_residual(apply, decomp: KrylovDecomposition) -> float:
    """``||A L_k - L_{k+1} Hbar_k||_F``."""
    apply = as_apply(apply)
    k = decomp.steps
    AL = np.column_stack([apply(decomp.basis[:, j]) for j in range(k)])
    return float(np.linalg.norm(AL - decomp.basis @ decomp.hbar))


def decomposition_error(apply, decomp: KrylovDecomposition, a_norm=None) -> float:
    """Decomposition residual divided by ``||A||_F ||L_k||_F``.

    ``a_norm`` is required when ``apply`` is a plain callable.
    """
    if a_norm is None:
        a_norm = operator_fro_norm(apply)
    k = decomp.steps
    denom = a_norm * np.linalg.norm(decomp.basis[:, :k])
    return decomposition_residual(apply, decomp) / denom


def _live_basis(decomp):
    if decomp.breakdown_at is not None or decomp.steps == decomp.basis.shape[0]:
        return decomp.basis[:, : decomp.steps]
    return decomp.basis


def basis_condition(decomp: KrylovDecomposition) -> float:
    """2-norm condition number of the basis (``inf`` when rank deficient)."""
    L = _live_basis(decomp)
    try:
        _, R = qr_reduced(L)
    except np.linalg.LinAlgError:
        warnings.warn("Krylov basis is numerically rank deficient", RuntimeWarning)
        return float("inf")
    sigma = svd(R)[1]
    if sigma[-1] == 0.0:
        warnings.warn("Krylov basis is numerically rank deficient", RuntimeWarning)
        return float("inf")
    return float(sigma[0] / sigma[-1])


def spectrum_distance(a, b) -> float:
    """Largest gap under the optimal one-to-one matching of two eigenvalue multisets."""
    a = np.asarray(a, complex)
    b = np.asarray(b, complex)
    if a.shape != b.shape:
        raise ValueError("spectra have different sizes")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def verify_qr_relation(apply, q0, m) -> QRRelationReport:
    """Relate ``m`` Arnoldi steps to ``m`` Hessenberg steps from the same start.

    With ``L_{m+1} = Q_{m+1} R_{m+1}`` (positive diagonal), the Arnoldi
    matrix is ``R_{m+1} Hhat^(h)_m R_m^{-1}``; the report holds both scalar
    ratios of its last row and the residual of its top ``m x m`` block.
    The Arnoldi decomposition is first sign-aligned with ``Q_{m+1}``, a
    diagonal +-1 similarity that leaves its spectrum unchanged.
    """
    hess = hessenberg_process(apply, q0, m)
    arn = arnoldi_process(apply, q0, m)
    for d in (hess, arn):
        if d.breakdown_at is not None or d.steps < m:
            raise ProcessBreakdownError(d.kind, d.breakdown_at or d.steps)
    Q, R = qr_reduced(hess.basis)
    # Q and the Arnoldi basis agree up to column signs (pivots may be negative);
    # express the Arnoldi matrix in the basis Q.
    d = np.where(np.einsum("ij,ij->j", Q, arn.basis) < 0, -1.0, 1.0)
    hbar_a = d[:, None] * arn.hbar * d[None, :m]
    Rm = R[:m, :m]
    rtilde = R[:m, m]
    hh = hess.hbar[m, m - 1]
    ratio_lhs = hh / R[m - 1, m - 1]
    ratio_rhs = hbar_a[m, m - 1] / R[m, m]
    # R_m H R_m^{-1} through a triangular solve from the right
    RH = Rm @ hess.H
    similar = np.linalg.solve(Rm.T, RH.T).T
    recon = similar + ratio_lhs * np.outer(rtilde, np.eye(m)[m - 1])
    Ha = hbar_a[:m, :m]
    resid = float(np.linalg.norm(Ha - recon))
    recon_h = np.triu(recon, -1)
    dist = spectrum_distance(hessenberg_eig(Ha)[0], hessenberg_eig(recon_h)[0])
    return QRRelationReport(
        m=m,
        ratio_lhs=float(ratio_lhs),
        ratio_rhs=float(ratio_rhs),
        identity_residual=resid,
        h_norm=float(np.linalg.norm(Ha)),
        eig_distance=dist,
        basis_condition=basis_condition(hess),
    )


def spectrum_rows(decomp: KrylovDecomposition):
    """``(re, im, residual_bound)`` per Ritz pair."""
    return [(p.theta.real, p.theta.imag, p.bound) for p in ritz_pairs(decomp)]


def _fmt(x):
    return f"{x:.16e}"


def spectrum_dump(decomp: KrylovDecomposition, path):
    rows = spectrum_rows(decomp)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["re", "im", "residual_bound"])
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return rows
