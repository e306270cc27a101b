"""Sparse generalized eigensolver for the P1 pencil (K, M).

The solver is a shift-and-invert block Lanczos iteration in the M inner
product with full reorthogonalization and a deterministic start block,
so repeated runs agree bit for bit.  A dense route (scipy.linalg.eigh)
exists for small pencils and doubles as an independent oracle in tests;
it is only taken automatically when the pencil is genuinely tiny.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergenceError, SingularMassError

_DENSE_LIMIT = 8  # pencils up to max(2k+2, 8) go straight to eigh


@dataclass(frozen=True)
class EigenResult:
    """Lowest eigenpairs of K v = lambda M v."""

    values: np.ndarray  # (k,) ascending
    vectors: np.ndarray  # (dim, k), M-orthonormal
    residuals: np.ndarray  # (k,) ||K v - lambda M v||_2 / ||v||_M
    iterations: int
    method: str


def _as_csc(A):
    return A.tocsc() if sp.issparse(A) else sp.csc_matrix(A)


def _start_block(dim, width):
    """Deterministic, mildly oscillatory start block."""
    t = np.arange(dim, dtype=float)
    cols = [np.ones(dim)]
    for j in range(1, width):
        cols.append(np.cos((j * np.pi / dim) * (t + 0.5)))
    B = np.stack(cols, axis=1)
    return B


def _m_orth(V, M):
    """M-orthonormalize the columns of V (twice, for stability)."""
    for _ in range(2):
        MV = M @ V
        G = V.T @ MV
        # Cholesky of the Gram matrix; drop directions that collapse
        w, U = np.linalg.eigh(0.5 * (G + G.T))
        keep = w > 1e-28 * max(w.max(), 1e-300)
        if not keep.all():
            V = V @ U[:, keep]
            MV = M @ V
            G = V.T @ MV
        L = np.linalg.cholesky(0.5 * (G + G.T))
        V = sla.solve_triangular(L, V.T, lower=True).T
    return V


def dense_eigenpairs(K, M, k):
    """Dense generalized eigenpairs -- the independent verification route."""
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K, dtype=float)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    try:
        vals, vecs = sla.eigh(Kd, Md)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SingularMassError("mass matrix is not positive definite") from exc
    return vals[:k], vecs[:, :k]


def lowest_eigenpairs(K, M, k, *, tol=1e-10, max_iter=300, block=None, sigma=0.0):
    """Lowest k eigenpairs of the pencil (K, M).

    Uses shift-and-invert block Lanczos in the M inner product.  K must
    be symmetric positive semidefinite and M symmetric positive
    definite; for a singular K (pure Neumann pencils) the shift is
    nudged below zero automatically.
    """
    K = sp.csr_matrix(K) if not sp.issparse(K) else K.tocsr()
    M = sp.csr_matrix(M) if not sp.issparse(M) else M.tocsr()
    dim = K.shape[0]
    if k < 1 or k > dim:
        raise ValueError("need 1 <= k <= dim")
    if dim <= max(2 * k + 2, _DENSE_LIMIT):
        vals, vecs = dense_eigenpairs(K, M, k)
        res = _residuals(K, M, vals, vecs)
        return EigenResult(vals, vecs, res, iterations=0, method="dense")

    width = block if block is not None else min(max(k, 2), dim)
    A = _as_csc(K - sigma * M)
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError:
        # singular at the requested shift: nudge below the spectrum
        scale = abs(K.diagonal()).max() or 1.0
        sigma = sigma - 1e-8 * scale
        lu = spla.splu(_as_csc(K - sigma * M), permc_spec="COLAMD")

    basis = [_m_orth(_start_block(dim, width), M)]
    solved = []  # lu.solve(M @ block), one entry per basis block
    prev = None
    n_iter = 0
    theta = S = Q = None
    for n_iter in range(1, max_iter + 1):
        Q = np.concatenate(basis, axis=1)
        W = lu.solve(M @ basis[-1])
        solved.append(W)
        Y = np.concatenate(solved, axis=1)
        # Rayleigh-Ritz for the inverted operator on span(Q); its largest
        # eigenvalues invert to the smallest of the original pencil
        T = Q.T @ (M @ Y)
        theta, S = np.linalg.eigh(0.5 * (T + T.T))
        order = np.argsort(theta)[::-1][:k]
        theta_k = theta[order]
        if theta_k.min() > 0:
            ritz = sigma + 1.0 / theta_k
            if prev is not None and len(prev) == len(ritz) and np.all(
                np.abs(ritz - prev) <= tol * np.maximum(1.0, np.abs(ritz))
            ):
                vals, vecs = _sorted_pairs(ritz, Q @ S[:, order])
                res = _residuals(K, M, vals, vecs)
                return EigenResult(vals, vecs, res, n_iter, method="lanczos")
            prev = ritz
        if Q.shape[1] + width > dim:
            break
        # extend the space with the newest solve, fully reorthogonalized
        Wo = W - Q @ (Q.T @ (M @ W))
        Wo = Wo - Q @ (Q.T @ (M @ Wo))
        if np.all(np.einsum("ij,ij->j", Wo, M @ Wo) < 1e-280):
            break
        basis.append(_m_orth(Wo, M))
    if theta is None:  # pragma: no cover
        raise NoConvergenceError("no Lanczos iterations were possible")
    order = np.argsort(theta)[::-1][:k]
    theta_k = theta[order]
    if theta_k.min() <= 0:
        raise NoConvergenceError("Lanczos space did not capture the lowest eigenvalues")
    vals, vecs = _sorted_pairs(sigma + 1.0 / theta_k, Q @ S[:, order])
    res = _residuals(K, M, vals, vecs)
    if np.any(res > 1e-6):
        raise NoConvergenceError(
            f"eigen residuals stalled at {res.max():.3e} after {n_iter} iterations"
        )
    return EigenResult(vals, vecs, res, n_iter, method="lanczos")


def _sorted_pairs(vals, vecs):
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _residuals(K, M, vals, vecs):
    R = K @ vecs - M @ vecs * vals[None, :]
    num = np.linalg.norm(R, axis=0)
    den = np.sqrt(np.maximum(np.einsum("ij,ij->j", vecs, M @ vecs), 1e-300))
    return num / den


def lambda1_curve(make_pencil, radii, **kw):
    """lambda_1 over a family of radii; returns (radii, lambda_1 values)."""
    out = []
    for r in radii:
        K, M = make_pencil(r)
        res = lowest_eigenpairs(K, M, 1, **kw)
        out.append(res.values[0])
    return np.asarray(radii, dtype=float), np.asarray(out)
