"""Stochastic block models, graph sampling and doubled adjacency matrices.

Labels are 0-based integers throughout (block ``k`` of a ``K``-block model is
label ``k`` in ``range(K)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from dase.rng import SeedLike, make_rng

MAX_RESAMPLES = 100
RANK_RTOL = 1e-10


def numerical_rank(B: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Number of singular values above ``rtol * sigma_1``."""
    s = np.linalg.svd(np.atleast_2d(B), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class BlockModel:
    B: np.ndarray
    pi: np.ndarray
    directed: bool = True

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValueError(f"B must be square, got shape {B.shape}")
        if pi.shape != (B.shape[0],):
            raise ValueError(f"pi has length {pi.size}, B is {B.shape[0]}x{B.shape[0]}")
        if not np.all(np.isfinite(B)) or B.min() < 0 or B.max() > 1:
            raise ValueError("entries of B must lie in [0, 1]")
        if not self.directed and not np.array_equal(B, B.T):
            raise ValueError("undirected model requires symmetric B")
        if np.any(pi <= 0):
            raise ValueError("pi entries must be strictly positive")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"pi must sum to 1 (sum={pi.sum()!r})")
        B.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "pi", pi)

    @property
    def K(self) -> int:
        return self.B.shape[0]

    @property
    def rank(self) -> int:
        return numerical_rank(self.B)

    def expected_density(self) -> float:
        """Expected edge density ``pi^T B pi`` (self-loops ignored)."""
        return float(self.pi @ self.B @ self.pi)

    @classmethod
    def core_periphery(cls, params: "CorePeripheryParams", pi, directed: bool = True) -> "BlockModel":
        return cls(params.matrix(), pi, directed)


@dataclass(frozen=True)
class CorePeripheryParams:
    """Two-block core-periphery probabilities.

    ``p`` within core, ``q`` core to periphery, ``r`` periphery to core,
    ``s`` within periphery.  Requires ``s < q < p`` and ``s < r < p``.
    """

    p: float
    q: float
    r: float
    s: float
    check_order: bool = True

    def __post_init__(self):
        for name in ("p", "q", "r", "s"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} is not a probability")
        if self.check_order and not (self.s < self.q < self.p and self.s < self.r < self.p):
            raise ValueError(
                f"core-periphery ordering s < q,r < p violated: p={self.p}, q={self.q}, r={self.r}, s={self.s}"
            )

    def matrix(self) -> np.ndarray:
        return np.array([[self.p, self.q], [self.r, self.s]])

    @classmethod
    def from_matrix(cls, B, check_order: bool = True) -> "CorePeripheryParams":
        B = np.asarray(B, dtype=float)
        if B.shape != (2, 2):
            raise ValueError("core-periphery parameters need a 2x2 matrix")
        return cls(B[0, 0], B[0, 1], B[1, 0], B[1, 1], check_order=check_order)


@dataclass(frozen=True)
class CommunityAssignment:
    labels: np.ndarray
    K: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise ValueError(f"labels must lie in 0..{self.K - 1}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def N(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    def indicator(self) -> np.ndarray:
        """Dense N x K membership matrix Z."""
        Z = np.zeros((self.N, self.K))
        Z[np.arange(self.N), self.labels] = 1.0
        return Z

    @classmethod
    def from_sizes(cls, sizes) -> "CommunityAssignment":
        """Contiguous blocks of the given sizes (block 0 first)."""
        sizes = np.asarray(sizes, dtype=np.int64)
        return cls(np.repeat(np.arange(sizes.size), sizes), int(sizes.size))


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Binary adjacency with zero diagonal, stored as CSR."""

    entries: sp.csr_matrix
    directed: bool = True
    names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        M = sp.csr_matrix(self.entries)
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"adjacency must be square, got {M.shape}")
        M = M.astype(np.int64)
        M.eliminate_zeros()
        M.sum_duplicates()
        M.sort_indices()
        if M.nnz and (M.data.min() < 0 or M.data.max() > 1):
            raise ValueError("adjacency entries must be 0/1")
        if M.diagonal().any():
            raise ValueError("adjacency must have zero diagonal")
        if not self.directed and (M != M.T).nnz:
            raise ValueError("undirected adjacency must be symmetric")
        object.__setattr__(self, "entries", M)

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    @property
    def n_edges(self) -> int:
        """Directed arcs, or unordered pairs when undirected."""
        nnz = self.entries.nnz
        return nnz if self.directed else nnz // 2

    def toarray(self) -> np.ndarray:
        return self.entries.toarray()

    @classmethod
    def from_dense(cls, A, directed: bool = True) -> "AdjacencyMatrix":
        return cls(sp.csr_matrix(np.asarray(A)), directed)

    @classmethod
    def from_edges(cls, src, dst, N: int, directed: bool = True, names=()) -> "AdjacencyMatrix":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        keep = src != dst
        src, dst = src[keep], dst[keep]
        if not directed:
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        M = sp.csr_matrix((np.ones(src.size, dtype=np.int64), (src, dst)), shape=(N, N))
        M.sum_duplicates()
        M.data[:] = 1
        return cls(M, directed, tuple(names))


@dataclass(frozen=True)
class ExpectedMatrices:
    Q: np.ndarray
    Qtilde: np.ndarray
    Btilde: np.ndarray


def sample_assignment(pi, N: int, seed: SeedLike = None) -> CommunityAssignment:
    """Draw ``N`` i.i.d. categorical(``pi``) labels, resampling empty blocks.

    Raises ``ValueError`` if ``N < K`` or if a block is still empty after
    :data:`MAX_RESAMPLES` draws.
    """
    pi = np.atleast_1d(np.asarray(pi, dtype=float))
    K = pi.size
    if np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-12:
        raise ValueError("pi must be strictly positive and sum to 1")
    if N < K:
        raise ValueError(f"N={N} is smaller than the number of blocks K={K}")
    rng = make_rng(seed)
    for _ in range(MAX_RESAMPLES):
        labels = rng.choice(K, size=N, p=pi)
        if np.all(np.bincount(labels, minlength=K) > 0):
            return CommunityAssignment(labels, K)
    raise ValueError(f"a block stayed empty after {MAX_RESAMPLES} resamples (N={N}, pi={pi})")


def sample_sbm(model: BlockModel, assignment: CommunityAssignment, seed: SeedLike = None) -> AdjacencyMatrix:
    """Bernoulli edges with probability ``B[label_i, label_j]``.

    Directed graphs draw every ordered pair ``i != j``; undirected graphs draw
    each unordered pair once and mirror it.
    """
    if assignment.K != model.K:
        raise ValueError(f"assignment has K={assignment.K}, model has K={model.K}")
    rng = make_rng(seed)
    N = assignment.N
    members = [np.flatnonzero(assignment.labels == k) for k in range(model.K)]
    rows, cols = [], []
    for a in range(model.K):
        for b in range(model.K):
            ia, ib = members[a], members[b]
            if ia.size == 0 or ib.size == 0:
                continue
            hits = rng.random((ia.size, ib.size)) < model.B[a, b]
            ii, jj = np.nonzero(hits)
            gi, gj = ia[ii], ib[jj]
            keep = gi < gj if not model.directed else gi != gj
            rows.append(gi[keep])
            cols.append(gj[keep])
    src = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    dst = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    return AdjacencyMatrix.from_edges(src, dst, N, model.directed)


def doubled_adjacency(A: AdjacencyMatrix) -> sp.csr_matrix:
    """Two-step walk counts ``A @ A`` as an integer CSR matrix."""
    M = A.entries
    return (M @ M).tocsr()


def expected_matrices(model: BlockModel, assignment: CommunityAssignment) -> ExpectedMatrices:
    if assignment.K != model.K:
        raise ValueError(f"assignment has K={assignment.K}, model has K={model.K}")
    lab = assignment.labels
    Q = model.B[np.ix_(lab, lab)]
    Btilde = model.B @ np.diag(assignment.sizes.astype(float)) @ model.B
    Qtilde = Btilde[np.ix_(lab, lab)]
    return ExpectedMatrices(Q=Q, Qtilde=Qtilde, Btilde=Btilde)


def edge_density(A: AdjacencyMatrix) -> float:
    N = A.N
    if N < 2:
        raise ValueError("edge density needs at least two nodes")
    m = A.n_edges
    if A.directed:
        return m / (N * (N - 1))
    return 2 * m / (N * (N - 1))


def scaled_block_matrix(s: float, R) -> np.ndarray:
    """``B = s * R``; the ratio matrix carries the relative block densities."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if np.any(R < 0):
        raise ValueError("ratio matrix entries must be non-negative")
    if s < 0:
        raise ValueError("density scale must be non-negative")
    B = s * R
    if B.max(initial=0.0) > 1:
        raise ValueError(f"s * max(R) = {B.max():.4g} exceeds 1")
    return B


def latent_positions(model: BlockModel, assignment: CommunityAssignment):
    """Latent positions ``X, Y`` (N x d) with ``X_i . Y_j = B[label_i, label_j]``."""
    if assignment.K != model.K:
        raise ValueError(f"assignment has K={assignment.K}, model has K={model.K}")
    L, lam, Rt = np.linalg.svd(model.B)
    d = numerical_rank(model.B)
    if d == 0:
        raise ValueError("B is numerically zero; latent positions are undefined")
    root = np.sqrt(lam[:d])
    Xb = L[:, :d] * root
    Yb = Rt[:d].T * root
    err = np.abs(Xb @ Yb.T - model.B).max()
    if err > 1e-10:
        raise ValueError(f"rank-{d} factorisation of B has reconstruction error {err:.3g}")
    return Xb[assignment.labels], Yb[assignment.labels]
