import numpy as np
import pytest

from prnk.diagnostics import decomposition_error, spectrum_distance
from prnk.krylov import arnoldi_process, hessenberg_process, ritz_pairs

from conftest import google, random_graph


def test_hessenberg_hand_trace():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    d = hessenberg_process(A, np.array([1.0, 2.0]), 2)
    assert d.pivots.tolist() == [1, 0]
    assert np.allclose(d.basis[:, 0], [0.5, 1.0])
    assert np.allclose(d.H, [[0.5, 1.0], [0.75, -0.5]])
    assert d.h_next == 0.0
    assert d.breakdown_at is None
    assert sorted(p.theta.real for p in ritz_pairs(d)) == pytest.approx([-1.0, 1.0])


def test_hessenberg_identity_breaks_down():
    d = hessenberg_process(np.eye(4), np.array([1.0, 2.0, 3.0, 4.0]), 3)
    assert d.breakdown_at == 1
    assert d.steps == 1
    assert np.allclose(d.hbar, [[1.0], [0.0]])
    assert not np.any(d.basis[:, 1])


def test_arnoldi_permutation():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    d = arnoldi_process(A, np.array([1.0, 0.0]), 2)
    assert np.allclose(np.abs(d.basis[:, :2]), np.eye(2))
    assert not np.any(d.basis[:, 2])
    assert d.breakdown_at is None


def test_bad_start():
    with pytest.raises(ValueError):
        hessenberg_process(np.eye(2), np.zeros(2), 1)
    with pytest.raises(ValueError):
        arnoldi_process(np.eye(2), np.ones(2), 3)


@pytest.mark.parametrize("n,m", [(10, 5), (50, 20), (200, 30), (500, 30)])
def test_decomposition_identity_dense(rng, n, m):
    A = rng.standard_normal((n, n))
    q0 = rng.standard_normal(n)
    for run in (hessenberg_process, arnoldi_process):
        d = run(A, q0, m)
        assert decomposition_error(A, d) <= 1e-12


def test_pivot_structure(rng):
    A = rng.standard_normal((40, 40))
    d = hessenberg_process(A, rng.standard_normal(40), 12)
    Lp = d.basis[d.pivots]
    k = d.basis.shape[1]
    assert np.array_equal(np.triu(Lp[:k], 1), np.zeros((k, k)))
    assert np.array_equal(np.diag(Lp[:k]), np.ones(k))
    assert np.allclose(np.max(np.abs(d.basis), axis=0), 1.0, rtol=0, atol=0)


def test_arnoldi_orthonormal(rng):
    A = rng.standard_normal((60, 60))
    d = arnoldi_process(A, rng.standard_normal(60), 15, reorthogonalize=True)
    assert np.allclose(d.basis.T @ d.basis, np.eye(16), atol=1e-13)


def test_full_run_matches_dense_eigenvalues(rng):
    for n in (4, 12, 25):
        A = rng.standard_normal((n, n))
        q0 = rng.standard_normal(n)
        ref = np.linalg.eigvals(A)
        for run in (hessenberg_process, arnoldi_process):
            d = run(A, q0, n)
            if d.steps < n:
                continue
            theta = [p.theta for p in ritz_pairs(d)]
            assert spectrum_distance(theta, ref) < 1e-8


def test_hessenberg_and_arnoldi_agree_after_breakdown(rng):
    # block diagonal operator with an invariant 3-dimensional subspace
    B = rng.standard_normal((3, 3))
    A = np.zeros((8, 8))
    A[:3, :3] = B
    A[3:, 3:] = rng.standard_normal((5, 5))
    q0 = np.zeros(8)
    q0[:3] = rng.standard_normal(3)
    h = hessenberg_process(A, q0, 6)
    a = arnoldi_process(A, q0, 6)
    assert h.breakdown_at == a.breakdown_at == 3
    th = [p.theta for p in ritz_pairs(h)]
    ta = [p.theta for p in ritz_pairs(a)]
    assert spectrum_distance(th, ta) < 1e-10
    assert spectrum_distance(th, np.linalg.eigvals(B)) < 1e-10


def test_ritz_residual_bound(rng):
    g = random_graph(rng, 80)
    op = google(g)
    for run in (hessenberg_process, arnoldi_process):
        d = run(op, np.full(80, 1 / 80), 8)
        for p in ritz_pairs(d):
            r = op.apply(p.x.real) + 1j * op.apply(p.x.imag) - p.theta * p.x
            tail = d.hbar[-1, -1] * p.last_component * d.basis[:, -1]
            assert np.linalg.norm(r - tail) <= 1e-11 * op.fro_norm()
            assert abs(np.linalg.norm(r) - p.bound) <= 1e-11 * op.fro_norm()


def test_google_dominant_ritz_value(rng):
    g = random_graph(rng, 100)
    d = hessenberg_process(google(g), np.full(100, 0.01), 10)
    top = max(p.theta.real for p in ritz_pairs(d))
    # 10 steps of an oblique projection: close to, not exactly, the eigenvalue 1
    assert top == pytest.approx(1.0, abs=1e-3)
