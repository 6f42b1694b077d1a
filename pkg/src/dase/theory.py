"""Chernoff information, misclustering bounds and concentration checks.

Block moments for the Chernoff computation come in two flavours:

* ASE: block means ``B`` with Bernoulli variances ``B (1 - B)``.
* DASE: Poisson-Binomial means and variances of the two-step walk counts,
  block-averaged in closed form from ``B`` and the block sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dase.graph import (
    BlockModel,
    CommunityAssignment,
    CorePeripheryParams,
    doubled_adjacency,
    numerical_rank,
    sample_sbm,
)
from dase.rng import SeedLike, child_seeds

GRID_POINTS = 64
T_TOL = 1e-8
_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class ChernoffInputs:
    M: np.ndarray
    C: np.ndarray
    Pi: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        Pi = np.atleast_2d(np.asarray(self.Pi, dtype=float))
        K = M.shape[0]
        if M.shape != (K, K) or C.shape != (K, K) or Pi.shape != (K, K):
            raise ValueError("M, C and Pi must all be K x K")
        if np.any(C <= 0):
            raise ValueError("block variances must be strictly positive")
        if np.any(Pi - np.diag(np.diag(Pi))):
            raise ValueError("Pi must be diagonal")
        p = np.diag(Pi)
        if np.any(p <= 0) or np.any(p >= 1) and K > 1 or abs(p.sum() - 1) > 1e-9:
            raise ValueError("Pi diagonal must be proportions in (0, 1) summing to 1")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "Pi", Pi)

    @property
    def K(self) -> int:
        return self.M.shape[0]

    def permuted(self, order) -> "ChernoffInputs":
        ix = np.ix_(order, order)
        return ChernoffInputs(self.M[ix], self.C[ix], self.Pi[ix])


def ase_block_moments(B, pi) -> ChernoffInputs:
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if np.any((B <= 0) | (B >= 1)):
        raise ValueError("ASE block variances vanish for entries equal to 0 or 1")
    return ChernoffInputs(B, B * (1 - B), np.diag(np.asarray(pi, dtype=float)))


def dase_block_moments(model: BlockModel, sizes) -> ChernoffInputs:
    """Block means and variances of ``A @ A`` from block sizes.

    ``M[a, b] = sum_c n_c B[a, c] B[c, b]`` and
    ``C[a, b] = sum_c n_c B[a, c] B[c, b] (1 - B[a, c] B[c, b])``.
    """
    n = np.asarray(sizes, dtype=float)
    if n.shape != (model.K,) or np.any(n <= 0):
        raise ValueError("need one positive size per block")
    B = model.B
    # prod[a, c, b] = B[a, c] * B[c, b]
    prod = B[:, :, None] * B[None, :, :]
    M = np.einsum("c,acb->ab", n, prod)
    C = np.einsum("c,acb->ab", n, prod * (1 - prod))
    return ChernoffInputs(M, C, np.diag(n / n.sum()))


def chernoff_objective(inputs: ChernoffInputs, k: int, l: int, t):
    """``t (1 - t) / 2 * e^T M Pi S_kl(t)^-1 M e`` with ``e = e_k - e_l``."""
    M, C, p = inputs.M, inputs.C, np.diag(inputs.Pi)
    row = M[k] - M[l]            # e^T M
    col = M[:, k] - M[:, l]      # M e
    t = np.asarray(t, dtype=float)
    S = (1 - t)[..., None] * C[k] + t[..., None] * C[l]
    quad = (row * p * col / S).sum(-1)
    return t * (1 - t) / 2 * quad


def _golden_max(f, lo: float, hi: float, tol: float):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    t = (a + b) / 2
    return t, f(t)


def chernoff_pair(inputs: ChernoffInputs, k: int, l: int):
    """Maximise the pair objective over ``t in (0, 1)``; returns ``(value, t_star)``."""
    grid = np.arange(1, GRID_POINTS + 1) / (GRID_POINTS + 1)
    vals = chernoff_objective(inputs, k, l, grid)
    i = int(np.argmax(vals))
    lo = grid[i - 1] if i > 0 else 0.0
    hi = grid[i + 1] if i < grid.size - 1 else 1.0
    t, v = _golden_max(lambda x: float(chernoff_objective(inputs, k, l, x)), lo, hi, T_TOL)
    if vals[i] > v:
        t, v = grid[i], vals[i]
    if v < 0:
        # the objective vanishes at both ends, so the supremum over (0, 1) is 0
        t, v = (0.0 if vals[0] >= vals[-1] else 1.0), 0.0
    return float(v), float(t)


def chernoff_information(inputs: ChernoffInputs, require_full_rank: bool = True) -> float:
    """Size-adjusted Chernoff information: min over block pairs of the sup over ``t``."""
    if inputs.K < 2:
        raise ValueError("Chernoff information needs at least two blocks")
    if require_full_rank and numerical_rank(inputs.M) < inputs.K:
        raise ValueError("block mean matrix is rank deficient")
    best = math.inf
    for k in range(inputs.K):
        for l in range(k + 1, inputs.K):
            v, _ = chernoff_pair(inputs, k, l)
            best = min(best, v)
    return float(best)


def ase_chernoff(model: BlockModel) -> float:
    return chernoff_information(ase_block_moments(model.B, model.pi))


def dase_chernoff(model: BlockModel, N: int) -> float:
    sizes = block_sizes(model.pi, N)
    return chernoff_information(dase_block_moments(model, sizes))


def block_sizes(pi, N: int) -> np.ndarray:
    """Rounded block sizes ``pi * N`` adjusted to sum to ``N``."""
    pi = np.asarray(pi, dtype=float)
    sizes = np.floor(pi * N).astype(np.int64)
    rem = N - sizes.sum()
    order = np.argsort(-(pi * N - sizes), kind="stable")
    sizes[order[:rem]] += 1
    return sizes


# --- misclustering bounds -------------------------------------------------


@dataclass(frozen=True)
class BoundConstants:
    """Model constants entering the misclustering bounds.

    ``b`` and ``beta`` belong to the ASE bound (factorisation of ``B``);
    ``btilde`` and ``beta_hat`` to the DASE bounds (factorisation of
    ``B diag(n) B``).  ``T``/``Ttilde`` are only set for two-block
    core-periphery models.
    """

    b: float
    btilde: float
    beta: float
    beta_hat: float
    pi_min: float
    T: float = float("nan")
    Ttilde: float = float("nan")
    T1: float = float("nan")
    T2: float = float("nan")
    Ttilde1: float = float("nan")
    Ttilde2: float = float("nan")
    N: int = 0


def _separation(F: np.ndarray, G: np.ndarray) -> float:
    """``min_{u != v} max(||F_u - F_v||, ||G_u - G_v||)``."""
    K = F.shape[0]
    best = math.inf
    for u in range(K):
        for v in range(u + 1, K):
            best = min(best, max(np.linalg.norm(F[u] - F[v]), np.linalg.norm(G[u] - G[v])))
    return float(best)


def _factor(B: np.ndarray):
    L, lam, Rt = np.linalg.svd(B)
    d = numerical_rank(B)
    root = np.sqrt(lam[:d])
    return lam[:d], L[:, :d] * root, Rt[:d].T * root


def bound_constants_from_model(model: BlockModel, sizes) -> BoundConstants:
    sizes = np.asarray(sizes, dtype=float)
    if sizes.shape != (model.K,) or np.any(sizes <= 0):
        raise ValueError("need one positive size per block")
    N = sizes.sum()
    Bt = model.B @ np.diag(sizes) @ model.B
    lam_t, nu_t, mu_t = _factor(Bt)
    d = model.rank
    if numerical_rank(Bt) < d or d == 0:
        raise ValueError("B diag(n) B lost rank")
    lam, nu, mu = _factor(model.B)
    if model.K < 2:
        beta = beta_t = float("nan")
    else:
        beta = _separation(nu, mu)
        beta_t = _separation(nu_t, mu_t)
    consts = dict(
        b=float(lam[d - 1] / N),
        btilde=float(lam_t[d - 1] / N),
        beta=beta,
        beta_hat=float(beta_t / N),
        pi_min=float(sizes.min() / N),
        N=int(round(N)),
    )
    if model.K == 2:
        params = CorePeripheryParams.from_matrix(model.B, check_order=False)
        consts.update(t_constants(params, sizes / N, N, check_order=False))
    return BoundConstants(**consts)


def t_constants(params: CorePeripheryParams, pi, N, check_order: bool = True) -> dict:
    """Core-periphery constants ``T1, T2, T`` (ASE) and ``Ttilde1, Ttilde2, Ttilde`` (DASE).

    Each sum over a group ``G_i`` is ``n_i = pi_i N`` copies of the same term.
    """
    if check_order:
        CorePeripheryParams(params.p, params.q, params.r, params.s)
    p, q, r, s = params.p, params.q, params.r, params.s
    pi1, pi2 = np.asarray(pi, dtype=float)
    n1, n2 = pi1 * N, pi2 * N
    T1 = n1 * (1 - r**2) + n2 * (1 - s**2)
    T2 = n1 * (1 - q**2) + n2 * (1 - s**2)
    Tt1 = n1 * (1 - (pi1 * p * r + pi2 * r * s) ** 2) + n2 * (1 - (pi1 * q * r + pi2 * s**2) ** 2)
    Tt2 = n1 * (1 - (pi1 * p * q + pi2 * q * s) ** 2) + n2 * (1 - (pi1 * q * r + pi2 * s**2) ** 2)
    return {
        "T1": float(T1),
        "T2": float(T2),
        "T": float((T1**2 + T2**2) / N**2),
        "Ttilde1": float(Tt1),
        "Ttilde2": float(Tt2),
        "Ttilde": float((Tt1**2 + Tt2**2) / N**2),
    }


def _require_positive(**vals):
    for name, v in vals.items():
        if not (v > 0):
            raise ValueError(f"{name} must be positive, got {v}")


def bound_general_dase(c: BoundConstants, N: float, directed: bool = True) -> float:
    """``2^5 3^2 log N / (beta_hat^2 (btilde pi_min)^5 N)``; half that when undirected."""
    _require_positive(beta_hat=c.beta_hat, btilde=c.btilde, pi_min=c.pi_min, N=N)
    numer = 2**5 * 3**2 if directed else 2**4 * 3**2
    return numer * math.log(N) / (c.beta_hat**2 * (c.btilde * c.pi_min) ** 5 * N)


def bound_core(c: BoundConstants, N: float, method: str = "DASE") -> float:
    """Core-periphery misclustering bounds.

    DASE: ``2^4 3^2 Ttilde log N / (beta_hat^2 (btilde pi_min)^5 N)``.
    ASE:  ``2^2 3^2 6 T log N / (beta^2 (b pi_min)^5)``.
    """
    method = method.upper()
    if method == "DASE":
        _require_positive(Ttilde=c.Ttilde, beta_hat=c.beta_hat, btilde=c.btilde, pi_min=c.pi_min, N=N)
        return 2**4 * 3**2 * c.Ttilde * math.log(N) / (c.beta_hat**2 * (c.btilde * c.pi_min) ** 5 * N)
    if method == "ASE":
        _require_positive(T=c.T, beta=c.beta, b=c.b, pi_min=c.pi_min, N=N)
        return 2**2 * 3**2 * 6 * c.T * math.log(N) / (c.beta**2 * (c.b * c.pi_min) ** 5)
    raise ValueError(f"method must be DASE or ASE, got {method!r}")


# --- concentration --------------------------------------------------------


def general_gram_bound(N: int) -> float:
    return math.sqrt(2 * N**7 * math.log(N))


def core_gram_bound(Ttilde_k: float, N: int) -> float:
    return math.sqrt(2) * Ttilde_k * math.sqrt(N**5 * math.log(N))


def doubled_covariance(Q: np.ndarray, u: int, v: int, w: int) -> float:
    """``Cov(Atilde[u, w], Atilde[v, w]) = sum_l Q[u, l] Q[v, l] Q[l, w] (1 - Q[l, w])``.

    Exact for directed graphs when ``Q`` has a zero diagonal and ``u != v``.
    """
    return float((Q[u] * Q[v] * Q[:, w] * (1 - Q[:, w])).sum())


def _grams(A):
    At = doubled_adjacency(A).astype(float).toarray()
    return At @ At.T, At.T @ At


@dataclass(frozen=True)
class ConcentrationResult:
    violations_gram_left: int
    violations_gram_right: int
    bound_used: float
    core_violations_left: int | None
    core_violations_right: int | None
    core_bound_left: float | None
    core_bound_right: float | None
    max_deviation_left: float
    max_deviation_right: float
    replicates: int


def concentration_check(model: BlockModel, assignment: CommunityAssignment, replicates: int,
                        seed: SeedLike = 0, reference_samples: int = 1000) -> ConcentrationResult:
    """Compare Gram-matrix deviations of ``A @ A`` against the concentration bounds.

    ``E(Atilde Atilde^T)`` and ``E(Atilde^T Atilde)`` are estimated from
    ``reference_samples`` graphs drawn on streams disjoint from the
    replicates.
    """
    if replicates < 1:
        raise ValueError("replicates must be positive")
    N = assignment.N
    ref_seed, rep_seed = child_seeds(seed, 2)
    EL = np.zeros((N, N))
    ER = np.zeros((N, N))
    for ss in child_seeds(ref_seed, reference_samples):
        L, R = _grams(sample_sbm(model, assignment, ss))
        EL += L
        ER += R
    EL /= reference_samples
    ER /= reference_samples

    bound = general_gram_bound(N)
    core_left = core_right = None
    if model.K == 2:
        params = CorePeripheryParams.from_matrix(model.B, check_order=False)
        tc = t_constants(params, assignment.sizes / N, N, check_order=False)
        core_left = core_gram_bound(tc["Ttilde1"], N)
        core_right = core_gram_bound(tc["Ttilde2"], N)

    dev_l, dev_r = [], []
    for ss in child_seeds(rep_seed, replicates):
        L, R = _grams(sample_sbm(model, assignment, ss))
        dev_l.append(np.linalg.norm(L - EL))
        dev_r.append(np.linalg.norm(R - ER))
    dev_l, dev_r = np.array(dev_l), np.array(dev_r)
    return ConcentrationResult(
        violations_gram_left=int((dev_l > bound).sum()),
        violations_gram_right=int((dev_r > bound).sum()),
        bound_used=bound,
        core_violations_left=None if core_left is None else int((dev_l > core_left).sum()),
        core_violations_right=None if core_right is None else int((dev_r > core_right).sum()),
        core_bound_left=core_left,
        core_bound_right=core_right,
        max_deviation_left=float(dev_l.max()),
        max_deviation_right=float(dev_r.max()),
        replicates=replicates,
    )
