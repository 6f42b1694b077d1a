"""Node embeddings: normalised-Laplacian spectral clustering, ASE and DASE."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from dase.graph import AdjacencyMatrix
from dase.rng import SeedLike
from dase.spectral import DENSE_CUTOFF, DEFAULT_TOL, symmetric_eigs, truncated_svd

METHODS = ("SC", "ASE", "DASE")


@dataclass(frozen=True)
class Embedding:
    coords: np.ndarray
    method: str
    d: int
    scaled: bool
    sigma: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown embedding method {self.method!r}")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("embedding has non-finite coordinates")

    @property
    def N(self) -> int:
        return self.coords.shape[0]

    def to_csv(self, path) -> None:
        """Write ``node,coord_0,...,coord_{m-1}`` rows."""
        m = self.coords.shape[1]
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node"] + [f"coord_{j}" for j in range(m)])
            for i, row in enumerate(self.coords):
                w.writerow([i] + [repr(float(x)) for x in row])


def read_embedding_csv(path) -> np.ndarray:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(data[:, 0], kind="stable")
    return data[order, 1:]


def spectral_embedding(M, d: int, directed: bool, scaled: bool = True, seed: SeedLike = 0,
                       tol: float = DEFAULT_TOL):
    """Embed the rows of a (possibly implicit) square matrix ``M`` via its top-``d`` SVD.

    Directed: ``[U S^1/2 | V S^1/2]``; undirected: ``U S^1/2``.  With
    ``scaled=False`` the singular-value factors are dropped.
    """
    trip = truncated_svd(M, d, tol=tol, seed=seed)
    w = np.sqrt(trip.sigma) if scaled else np.ones_like(trip.sigma)
    if directed:
        coords = np.hstack([trip.U * w, trip.V * w])
    else:
        coords = trip.U * w
    return coords, trip.sigma


def doubled_operator(A: AdjacencyMatrix) -> spla.LinearOperator:
    """``A @ A`` applied implicitly, so the product is never formed."""
    M = sp.csr_matrix(A.entries, dtype=float)
    Mt = M.T.tocsr()
    n = A.N
    return spla.LinearOperator(
        (n, n),
        matvec=lambda x: M @ (M @ x),
        rmatvec=lambda y: Mt @ (Mt @ y),
        matmat=lambda X: M @ (M @ X),
        rmatmat=lambda Y: Mt @ (Mt @ Y),
        dtype=float,
    )


def dase_embedding(A: AdjacencyMatrix, d: int, scaled: bool = True, seed: SeedLike = 0,
                   tol: float = DEFAULT_TOL) -> Embedding:
    if not 1 <= d <= A.N:
        raise ValueError(f"need 1 <= d <= N, got d={d}, N={A.N}")
    if A.N <= DENSE_CUTOFF or A.entries.nnz == 0:
        M = (A.entries @ A.entries).astype(float)
    else:
        M = doubled_operator(A)
    coords, sigma = spectral_embedding(M, d, A.directed, scaled, seed, tol)
    return Embedding(coords, "DASE", d, scaled, sigma)


def ase_embedding(A: AdjacencyMatrix, d: int, scaled: bool = True, seed: SeedLike = 0,
                  tol: float = DEFAULT_TOL) -> Embedding:
    if not 1 <= d <= A.N:
        raise ValueError(f"need 1 <= d <= N, got d={d}, N={A.N}")
    coords, sigma = spectral_embedding(A.entries.astype(float), d, A.directed, scaled, seed, tol)
    return Embedding(coords, "ASE", d, scaled, sigma)


def symmetrized(A: AdjacencyMatrix) -> sp.csr_matrix:
    """Binary undirected version: an edge wherever ``A + A^T`` is positive."""
    S = (A.entries + A.entries.T).tocsr()
    S.data[:] = 1.0
    return S.astype(float)


def laplacian_sc_embedding(A: AdjacencyMatrix, K: int, seed: SeedLike = 0,
                           tol: float = DEFAULT_TOL) -> Embedding:
    """Row-normalised bottom-``K`` eigenvectors of ``I - D^-1/2 S D^-1/2``.

    ``S`` is the symmetrised binary graph.  Isolated vertices get a zero
    ``D^-1/2`` entry and hence a zero row.
    """
    if A.entries.nnz == 0:
        raise ValueError("spectral clustering needs a graph with at least one edge")
    if not 1 <= K <= A.N:
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={A.N}")
    S = symmetrized(A)
    deg = np.asarray(S.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    Dm = sp.diags(inv_sqrt)
    norm_adj = (Dm @ S @ Dm).tocsr()
    L = (sp.identity(A.N, format="csr") - norm_adj).tocsr()
    _, X = symmetric_eigs(L, K, which="smallest", tol=tol, seed=seed)
    X = X.copy()
    X[~nz] = 0.0
    norms = np.linalg.norm(X, axis=1)
    rows = norms > 0
    X[rows] /= norms[rows, None]
    return Embedding(X, "SC", K, False)


def embed(A: AdjacencyMatrix, method: str, d: int, K: int, scaled: bool = True,
          seed: SeedLike = 0) -> Embedding:
    method = method.upper()
    if method == "DASE":
        return dase_embedding(A, d, scaled, seed)
    if method == "ASE":
        return ase_embedding(A, d, scaled, seed)
    if method == "SC":
        return laplacian_sc_embedding(A, K, seed)
    raise ValueError(f"unknown method {method!r}")
