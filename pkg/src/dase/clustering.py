"""k-means (k-means++ seeding, Lloyd iterations) and full-covariance Gaussian mixtures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from dase.rng import SeedLike, child_seeds, make_rng

KMEANS_DEFAULTS = {"restarts": 10, "max_iters": 300, "tol": 1e-8}
GMM_DEFAULTS = {"max_iters": 200, "tol": 1e-7, "reg": 1e-6}


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective: float
    iterations: int
    restarts_used: int
    history: tuple = ()

    @property
    def K(self) -> int:
        return self.centroids.shape[0]


@dataclass(frozen=True)
class GMMResult:
    labels: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    weights: np.ndarray
    log_likelihood: float
    iterations: int
    history: tuple = ()

    @property
    def K(self) -> int:
        return self.means.shape[0]


def _check_points(points, K: int) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("points must be an N x m array")
    if K < 1:
        raise ValueError("K must be positive")
    if X.shape[0] < K:
        raise ValueError(f"need at least K={K} points, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain non-finite values")
    return X


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    D = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    np.maximum(D, 0.0, out=D)
    return D


def mse_criterion(points, labels, centroids) -> float:
    """``sum_u ||x_u - c_{label(u)}||^2``."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    C = np.asarray(centroids, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    labels = np.asarray(labels)
    if labels.shape != (X.shape[0],):
        raise ValueError("labels must have one entry per point")
    if C.shape[1] != X.shape[1]:
        raise ValueError("centroid and point dimensions differ")
    if labels.size and (labels.min() < 0 or labels.max() >= C.shape[0]):
        raise ValueError("label out of range for the given centroids")
    diff = X - C[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def kmeans_plus_plus(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    N = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(N)]
    closest = _sq_dists(X, centers[:1]).ravel()
    for k in range(1, K):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(N)
        else:
            idx = rng.choice(N, p=closest / total)
        centers[k] = X[idx]
        closest = np.minimum(closest, _sq_dists(X, centers[k:k + 1]).ravel())
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iters: int, tol: float):
    K = centers.shape[0]
    history = []
    labels = None
    for it in range(1, max_iters + 1):
        D = _sq_dists(X, centers)
        new_labels = D.argmin(axis=1)
        obj = float(D[np.arange(X.shape[0]), new_labels].sum())
        if history and obj > history[-1] * (1 + 1e-9) + 1e-12:
            raise RuntimeError(f"Lloyd objective increased: {history[-1]!r} -> {obj!r}")
        converged = labels is not None and (
            np.array_equal(new_labels, labels) or history[-1] - obj <= tol * max(history[-1], 1e-300)
        )
        history.append(obj)
        labels = new_labels
        if converged:
            break
        counts = np.bincount(labels, minlength=K)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, X)
        nonempty = counts > 0
        centers = centers.copy()
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        for k in np.flatnonzero(~nonempty):
            # reseed an empty cluster at the point farthest from its centroid
            dist = ((X - centers[labels]) ** 2).sum(1)
            dist[np.bincount(labels, minlength=K)[labels] <= 1] = -1.0
            far = int(np.argmax(dist))
            centers[k] = X[far]
            labels = labels.copy()
            labels[far] = k
    return labels, centers, history, it


def kmeans(points, K: int, restarts: int = 10, max_iters: int = 300, tol: float = 1e-8,
           seed: SeedLike = 0) -> KMeansResult:
    """Best-of-``restarts`` Lloyd k-means with k-means++ seeding.

    The winner is the restart with the smallest objective; ties go to the
    earliest restart.  The Lloyd objective is checked to be nonincreasing
    at every iteration.
    """
    X = _check_points(points, K)
    if restarts < 1:
        raise ValueError("restarts must be positive")
    best = None
    for r, ss in enumerate(child_seeds(seed, restarts)):
        rng = make_rng(ss)
        centers = kmeans_plus_plus(X, K, rng)
        labels, centers, history, iters = _lloyd(X, centers, max_iters, tol)
        labels = labels.copy()
        for k in np.flatnonzero(np.bincount(labels, minlength=K) == 0):
            dist = ((X - centers[labels]) ** 2).sum(1)
            dist[np.bincount(labels, minlength=K)[labels] <= 1] = -1.0
            far = int(np.argmax(dist))
            labels[far] = k
            centers[k] = X[far]
        counts = np.bincount(labels, minlength=K)
        # final centroids are the cluster means of the returned labels
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, X)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        obj = mse_criterion(X, labels, centers)
        if best is None or obj < best[0]:
            best = (obj, labels, centers, iters, tuple(history))
    obj, labels, centers, iters, history = best
    return KMeansResult(labels, centers, obj, iters, restarts, history)


def _log_gauss(X: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    N, m = X.shape
    out = np.empty((N, means.shape[0]))
    for k in range(means.shape[0]):
        chol = np.linalg.cholesky(covs[k])
        z = np.linalg.solve(chol, (X - means[k]).T)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        out[:, k] = -0.5 * (m * np.log(2 * np.pi) + logdet + (z * z).sum(0))
    return out


def _m_step(X: np.ndarray, resp: np.ndarray, reg: float):
    N, m = X.shape
    nk = resp.sum(0) + 10 * np.finfo(float).eps
    weights = nk / N
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((resp.shape[1], m, m))
    for k in range(resp.shape[1]):
        diff = X - means[k]
        covs[k] = (resp[:, k, None] * diff).T @ diff / nk[k]
        covs[k] = (covs[k] + covs[k].T) / 2 + reg * np.eye(m)
    return weights / weights.sum(), means, covs


def gmm(points, K: int, max_iters: int = 200, tol: float = 1e-7, reg: float = 1e-6,
        seed: SeedLike = 0, init: KMeansResult | None = None) -> GMMResult:
    """Full-covariance Gaussian mixture fitted by EM from a k-means start.

    ``reg * I`` is added to every covariance estimate.  Iteration stops once
    the relative log-likelihood change drops below ``tol``.
    """
    X = _check_points(points, K)
    if init is None:
        init = kmeans(X, K, seed=seed)
    resp = np.zeros((X.shape[0], K))
    resp[np.arange(X.shape[0]), init.labels] = 1.0
    weights, means, covs = _m_step(X, resp, reg)

    history = []
    it = 0
    for it in range(1, max_iters + 1):
        logp = _log_gauss(X, means, covs) + np.log(weights)
        norm = logsumexp(logp, axis=1)
        ll = float(norm.sum())
        history.append(ll)
        resp = np.exp(logp - norm[:, None])
        if len(history) > 1 and abs(history[-1] - history[-2]) <= tol * abs(history[-2]):
            break
        weights, means, covs = _m_step(X, resp, reg)

    labels = resp.argmax(axis=1)
    return GMMResult(labels, means, covs, weights, history[-1], it, tuple(history))


def cluster(points, K: int, clusterer: str = "kmeans", seed: SeedLike = 0, **config) -> np.ndarray:
    """Labels from ``"kmeans"`` or ``"gmm"``."""
    if clusterer == "kmeans":
        return kmeans(points, K, seed=seed, **config).labels
    if clusterer == "gmm":
        return gmm(points, K, seed=seed, **config).labels
    raise ValueError(f"unknown clusterer {clusterer!r}")
