"""Partition comparison metrics and scree-based dimension selection."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

EXHAUSTIVE_MAX_K = 8


@dataclass(frozen=True)
class ConfusionTable:
    counts: np.ndarray
    row_labels: np.ndarray
    col_labels: np.ndarray

    @property
    def N(self) -> int:
        return int(self.counts.sum())


def confusion_table(a, b) -> ConfusionTable:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"label vectors differ in shape: {a.shape} vs {b.shape}")
    ra, ia = np.unique(a, return_inverse=True)
    rb, ib = np.unique(b, return_inverse=True)
    counts = np.zeros((ra.size, rb.size), dtype=np.int64)
    np.add.at(counts, (ia, ib), 1)
    return ConfusionTable(counts, ra, rb)


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return -math.fsum(p * np.log(p))


def nmi(a, b) -> float:
    """Mutual information over the geometric mean of the two entropies (natural log).

    If either labelling has zero entropy the result is 1 when the partitions
    coincide and 0 otherwise.
    """
    table = confusion_table(a, b)
    N = table.N
    if N == 0:
        raise ValueError("empty labellings")
    joint = table.counts / N
    pa = table.counts.sum(1) / N
    pb = table.counts.sum(0) / N
    ha, hb = _entropy(pa), _entropy(pb)
    if ha == 0 or hb == 0:
        return 1.0 if ha == hb else 0.0
    nz = joint > 0
    if (nz.sum(0) == 1).all() and (nz.sum(1) == 1).all():
        # one-to-one relabelling; skip the rounding in MI / sqrt(Ha Hb)
        return 1.0
    # fsum is exactly rounded, so nmi(a, b) == nmi(b, a) bit for bit
    mi = math.fsum(joint[nz] * np.log(joint[nz] / np.outer(pa, pb)[nz]))
    value = mi / np.sqrt(ha * hb)
    return float(min(max(value, 0.0), 1.0))


@dataclass(frozen=True)
class Misclustering:
    count: int
    rate: float
    best_perm: dict


def misclustering(truth, est) -> Misclustering:
    """Fewest disagreements over relabelings of ``est``.

    ``best_perm`` maps each estimated label to the truth label it is matched
    with.  Exhaustive over permutations up to :data:`EXHAUSTIVE_MAX_K`
    labels, Hungarian assignment beyond.
    """
    table = confusion_table(truth, est)
    C = table.counts
    kt, ke = C.shape
    size = max(kt, ke)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:kt, :ke] = C
    if size <= EXHAUSTIVE_MAX_K:
        best_agree, best = -1, None
        cols = np.arange(size)
        for perm in itertools.permutations(range(size)):
            agree = int(padded[list(perm), cols].sum())
            if agree > best_agree:
                best_agree, best = agree, perm
        match = {j: best[j] for j in range(size)}
    else:
        rows, cols = linear_sum_assignment(-padded)
        best_agree = int(padded[rows, cols].sum())
        match = {int(c): int(r) for r, c in zip(rows, cols)}
    perm = {}
    for j in range(ke):
        i = match[j]
        perm[table.col_labels[j].item()] = table.row_labels[i].item() if i < kt else None
    count = table.N - best_agree
    return Misclustering(count, count / table.N, perm)


def profile_log_likelihood(values, q: int) -> float:
    """Two-segment Gaussian log-likelihood for a split after the first ``q`` values.

    Both segments share one variance (pooled MLE).
    """
    x = np.asarray(values, dtype=float)
    p = x.size
    if not 1 <= q < p:
        raise ValueError(f"split {q} outside 1..{p - 1}")
    a, b = x[:q], x[q:]
    ss = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
    var = ss / p
    var = max(var, np.finfo(float).tiny)
    return float(-0.5 * p * np.log(2 * np.pi * var) - ss / (2 * var))


def choose_k_profile_likelihood(sigma, max_k: int | None = None) -> int:
    """Elbow of a nonincreasing scree by profile likelihood.

    Returns the split size ``q`` in ``1..min(max_k, len(sigma) - 1)`` with the
    largest two-segment likelihood (first maximiser on ties).
    """
    x = np.asarray(sigma, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise ValueError("need at least three values")
    if np.any(np.diff(x) > 1e-12 * max(abs(x[0]), 1.0)):
        raise ValueError("values must be nonincreasing")
    upper = x.size - 1 if max_k is None else min(max_k, x.size - 1)
    if upper < 1:
        raise ValueError("max_k must be at least 1")
    scores = [profile_log_likelihood(x, q) for q in range(1, upper + 1)]
    return int(np.argmax(scores)) + 1
