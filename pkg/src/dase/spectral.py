"""Truncated SVD and symmetric eigensolvers with deterministic signs.

Small problems (``N <= DENSE_CUTOFF``) use LAPACK directly; larger ones go
through ARPACK (implicitly restarted Lanczos) with a seeded start vector.
Inputs may be dense arrays, scipy sparse matrices or
:class:`scipy.sparse.linalg.LinearOperator` instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from dase.rng import SeedLike, make_rng

DENSE_CUTOFF = 256
DEFAULT_TOL = 1e-8
MAX_RESTARTS = 1000


class SpectralConvergenceError(RuntimeError):
    """Raised when an iterative solver misses its residual target."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SingularTriplets:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    residual: float

    @property
    def d(self) -> int:
        return self.sigma.size


def _as_operator(M):
    if isinstance(M, spla.LinearOperator):
        return M
    if sp.issparse(M):
        return sp.csr_matrix(M, dtype=float)
    return np.asarray(M, dtype=float)


def _densify(M) -> np.ndarray:
    if isinstance(M, spla.LinearOperator):
        return M @ np.eye(M.shape[1])
    if sp.issparse(M):
        return M.toarray().astype(float)
    return np.asarray(M, dtype=float)


def _rmatvec(M, x):
    if isinstance(M, spla.LinearOperator):
        return M.rmatmat(x)
    return M.T @ x


def canonical_signs(U: np.ndarray, V: np.ndarray | None = None):
    """Flip column pairs so each column of ``U`` has its largest-magnitude entry positive.

    Ties in magnitude go to the lowest row index.
    """
    U = U.copy()
    V = None if V is None else V.copy()
    for k in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, k])))
        if U[i, k] < 0:
            U[:, k] = -U[:, k]
            if V is not None:
                V[:, k] = -V[:, k]
    return (U, V) if V is not None else U


def svd_residual(M, U, sigma, V) -> float:
    """Largest of ``||M v - s u||`` and ``||M^T u - s v||`` over triplets, relative to ``sigma_1``."""
    if sigma.size == 0:
        return 0.0
    right = np.linalg.norm(M @ V - U * sigma, axis=0)
    left = np.linalg.norm(_rmatvec(M, U) - V * sigma, axis=0)
    scale = sigma[0] if sigma[0] > 0 else 1.0
    return float(max(right.max(), left.max()) / scale)


def truncated_svd(M, d: int, tol: float = DEFAULT_TOL, seed: SeedLike = 0,
                  method: str = "auto", max_restarts: int = MAX_RESTARTS) -> SingularTriplets:
    """Top-``d`` singular triplets of ``M``.

    ``method`` is ``"auto"`` (dense for small inputs, Lanczos otherwise),
    ``"dense"`` or ``"lanczos"``.  Raises :class:`SpectralConvergenceError`
    if the relative residual exceeds ``tol``.
    """
    M = _as_operator(M)
    m, n = M.shape
    if m != n:
        raise ValueError(f"expected a square matrix, got {M.shape}")
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= N, got d={d}, N={n}")
    if method not in ("auto", "dense", "lanczos"):
        raise ValueError(f"unknown method {method!r}")

    if _is_zero(M):
        U = np.eye(n)[:, :d]
        return SingularTriplets(U, np.zeros(d), U.copy(), 0.0)

    use_dense = method == "dense" or (method == "auto" and n <= DENSE_CUTOFF) or d >= n - 1
    if use_dense:
        dense = _densify(M)
        if not np.all(np.isfinite(dense)):
            raise ValueError("matrix has non-finite entries")
        U, s, Vt = np.linalg.svd(dense)
        U, s, V = U[:, :d], s[:d], Vt[:d].T
    else:
        v0 = make_rng(seed).standard_normal(n)
        try:
            U, s, Vt = spla.svds(M, k=d, tol=0, v0=v0, maxiter=max_restarts * n, solver="arpack")
        except spla.ArpackNoConvergence as exc:
            raise SpectralConvergenceError(f"svds did not converge: {exc}") from exc
        order = np.argsort(s)[::-1]
        U, s, V = U[:, order], s[order], Vt[order].T
        if not np.all(np.isfinite(s)):
            raise ValueError("matrix has non-finite entries")

    if s[0] == 0:
        # zero matrix: any orthonormal basis works; pick the canonical one
        U = np.eye(n)[:, :d]
        V = U.copy()
        return SingularTriplets(U, np.zeros(d), V, 0.0)

    U, V = canonical_signs(U, V)
    res = svd_residual(M, U, s, V)
    if res > tol:
        raise SpectralConvergenceError(f"SVD residual {res:.3g} exceeds tol {tol:.3g}", res)
    return SingularTriplets(U, s, V, res)


def symmetric_eigs(M, d: int, which: str = "largest", tol: float = DEFAULT_TOL,
                   seed: SeedLike = 0, method: str = "auto"):
    """``d`` eigenpairs of symmetric ``M`` from the requested end of the spectrum.

    Returns ``(values, vectors)`` with values sorted from the requested end
    inward (descending for ``"largest"``, ascending for ``"smallest"``).
    """
    if which not in ("largest", "smallest"):
        raise ValueError(f"which must be 'largest' or 'smallest', got {which!r}")
    M = _as_operator(M)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {M.shape}")
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= N, got d={d}, N={n}")

    if isinstance(M, spla.LinearOperator):
        asym = 0.0
    elif sp.issparse(M):
        diff = (M - M.T).tocsr()
        asym = np.abs(diff.data).max(initial=0.0)
    else:
        asym = np.abs(M - M.T).max(initial=0.0)
    if asym > 1e-10:
        raise ValueError(f"matrix is not symmetric (max |M - M^T| = {asym:.3g})")

    use_dense = method == "dense" or (method == "auto" and n <= DENSE_CUTOFF) or d >= n - 1
    if use_dense:
        dense = _densify(M)
        dense = (dense + dense.T) / 2
        w, X = np.linalg.eigh(dense)
        if which == "largest":
            w, X = w[::-1][:d], X[:, ::-1][:, :d]
        else:
            w, X = w[:d], X[:, :d]
    else:
        v0 = make_rng(seed).standard_normal(n)
        if which == "largest":
            op = M
            shift = 0.0
        else:
            # smallest of M = largest of (c I - M) with c bounding the spectrum
            shift = _spectral_bound(M)
            Mop = M
            op = spla.LinearOperator((n, n), matvec=lambda x: shift * x - Mop @ x, dtype=float)
        try:
            w, X = spla.eigsh(op, k=d, which="LA", tol=0, v0=v0, maxiter=MAX_RESTARTS * n)
        except spla.ArpackNoConvergence as exc:
            raise SpectralConvergenceError(f"eigsh did not converge: {exc}") from exc
        order = np.argsort(w)[::-1]
        w, X = w[order], X[:, order]
        if which == "smallest":
            w = shift - w

    X = canonical_signs(X)
    resid = np.linalg.norm(M @ X - X * w, axis=0).max() if w.size else 0.0
    scale = max(np.abs(w).max(), 1.0) if w.size else 1.0
    if resid / scale > tol:
        raise SpectralConvergenceError(f"eigen residual {resid / scale:.3g} exceeds tol {tol:.3g}", resid / scale)
    return w, X


def _is_zero(M) -> bool:
    if isinstance(M, spla.LinearOperator):
        return False
    if sp.issparse(M):
        return M.count_nonzero() == 0
    return not np.any(M)


def _spectral_bound(M) -> float:
    if isinstance(M, spla.LinearOperator):
        return float(spla.svds(M, k=1, return_singular_vectors=False)[0]) * 1.01
    if sp.issparse(M):
        return float(abs(M).sum(axis=1).max())
    return float(np.abs(M).sum(axis=1).max())
