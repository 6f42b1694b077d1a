"""Simulation sweeps, Chernoff sweeps and real-network evaluation.

Randomness is keyed by ``(master_seed, grid_point, replicate)`` so results do
not depend on worker count or execution order.  Aggregation always happens
in grid order after every replicate has finished.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from dase.clustering import cluster
from dase.embeddings import embed
from dase.graph import (
    AdjacencyMatrix,
    BlockModel,
    CommunityAssignment,
    edge_density,
    sample_assignment,
    sample_sbm,
    scaled_block_matrix,
)
from dase.io import read_edge_list, write_json
from dase.metrics import nmi
from dase.rng import make_rng
from dase.theory import (
    ChernoffInputs,
    ase_block_moments,
    block_sizes,
    chernoff_information,
    dase_block_moments,
)

SCENARIOS = ("density_sweep", "size_sweep", "ratio_sweep", "chernoff_sweep", "real_data")
BASELINE_RATIOS = [[1.0, 0.6], [0.6, 0.3]]

_SCENARIO_DEFAULTS = {
    "density_sweep": {"N_grid": [1000], "s_grid": [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1]},
    "size_sweep": {"N_grid": [250, 500, 1000, 1500, 2000, 3000], "s_grid": [0.05]},
    "ratio_sweep": {"N_grid": [1000], "s_grid": [0.08], "pi1_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]},
    "chernoff_sweep": {"N_grid": list(range(200, 2001, 200)), "s_grid": [0.8]},
    "real_data": {},
}

SUMMARY_HEADER = ["scenario", "N", "s", "pi1", "density", "method", "clusterer",
                  "mean_nmi", "std_nmi", "replicates", "failures"]
TIMING_HEADER = ["scenario", "N", "s", "pi1", "method", "clusterer", "mean_runtime_seconds", "replicates"]
REPLICATE_HEADER = ["point", "N", "s", "pi1", "replicate", "method", "clusterer", "nmi", "error"]


@dataclass
class ExperimentConfig:
    scenario: str = "density_sweep"
    directed: bool = True
    N_grid: list = field(default_factory=lambda: [1000])
    s_grid: list = field(default_factory=lambda: [0.05])
    pi1_grid: list | None = None
    pi: list = field(default_factory=lambda: [0.5, 0.5])
    R: list = field(default_factory=lambda: [row[:] for row in BASELINE_RATIOS])
    B: list | None = None
    methods: list = field(default_factory=lambda: ["SC", "ASE", "DASE"])
    clusterer: str = "kmeans"
    replicates: int = 50
    d: int = 2
    K: int = 2
    scaled: bool = True
    fixed_assignment: bool = False
    master_seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.N_grid or not self.s_grid or (self.pi1_grid is not None and not self.pi1_grid):
            raise ValueError("parameter grids must be nonempty")
        self.methods = [m.upper() for m in self.methods]
        bad = set(self.methods) - {"SC", "ASE", "DASE"}
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if self.clusterer not in ("kmeans", "gmm"):
            raise ValueError(f"unknown clusterer {self.clusterer!r}")
        for point in self.points():
            self.model_at(point)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data.pop("schema_version", None)
        scenario = data.get("scenario", "density_sweep")
        merged = {**_SCENARIO_DEFAULTS.get(scenario, {}), **data}
        known = {f.name for f in fields(cls)}
        unknown = set(merged) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**merged)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(Path(path)) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def points(self) -> list[tuple]:
        """Grid points ``(N, s, pi1)`` in N-major order."""
        pis = self.pi1_grid if self.pi1_grid is not None else [None]
        return list(itertools.product(self.N_grid, self.s_grid, pis))

    def model_at(self, point) -> BlockModel:
        _, s, pi1 = point
        B = np.asarray(self.B, dtype=float) if self.B is not None else scaled_block_matrix(s, self.R)
        pi = [pi1, 1 - pi1] if pi1 is not None else self.pi
        return BlockModel(B, pi, self.directed)


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    N: int
    s: float | None
    pi1: float
    density: float
    method: str
    clusterer: str
    mean_nmi: float
    std_nmi: float
    mean_runtime_seconds: float
    replicates: int
    failures: int


@dataclass
class SweepResult:
    rows: list
    records: list
    config: ExperimentConfig

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "summary": out / "summary.csv",
            "timings": out / "timings.csv",
            "replicates": out / "replicates.csv",
            "metadata": out / "metadata.json",
        }
        write_summary_csv(self.rows, paths["summary"])
        write_timings_csv(self.rows, paths["timings"])
        write_replicates_csv(self.records, paths["replicates"])
        write_json({
            "config": self.config.to_dict(),
            "assignment_resampling": "fixed per grid point" if self.config.fixed_assignment
            else "fresh assignment and graph per replicate",
            "runtime_scope": "embedding + clustering wall clock; graph sampling excluded",
            "nondeterministic_files": ["timings.csv"],
        }, paths["metadata"])
        return paths


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def write_summary_csv(rows, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, h)) for h in SUMMARY_HEADER])


def write_timings_csv(rows, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, h)) for h in TIMING_HEADER])


def write_replicates_csv(records, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPLICATE_HEADER)
        for rec in records:
            w.writerow([_fmt(rec[h]) for h in REPLICATE_HEADER])


def _run_replicate(task):
    cfg_dict, point_index, point, rep = task
    cfg = ExperimentConfig(**cfg_dict)
    model = cfg.model_at(point)
    N = point[0]
    seed = cfg.master_seed
    if cfg.fixed_assignment:
        assignment = sample_assignment(model.pi, N, (seed, point_index, 0, 0))
    else:
        assignment = sample_assignment(model.pi, N, (seed, point_index, rep + 1, 0))
    A = sample_sbm(model, assignment, (seed, point_index, rep + 1, 1))
    out = []
    for mi, method in enumerate(cfg.methods):
        key = (seed, point_index, rep + 1, 2, mi)
        start = time.perf_counter()
        try:
            emb = embed(A, method, cfg.d, cfg.K, cfg.scaled, seed=key + (0,))
            labels = cluster(emb.coords, cfg.K, cfg.clusterer, seed=key + (1,))
            value, err = nmi(assignment.labels, labels), ""
        except Exception as exc:  # recorded per replicate, never silently dropped
            value, err = float("nan"), f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - start
        out.append({
            "point": point_index, "N": N, "s": point[1], "pi1": float(model.pi[0]),
            "replicate": rep, "method": method, "clusterer": cfg.clusterer,
            "nmi": value, "runtime_seconds": elapsed, "error": err,
        })
    return out


def run_sweep(config: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Replicate loop over every grid point and method.

    Each replicate samples an assignment and a graph, then embeds, clusters
    and scores every method on that same graph.
    """
    cfg_dict = config.to_dict()
    points = config.points()
    tasks = [(cfg_dict, pi_, pt, rep) for pi_, pt in enumerate(points) for rep in range(config.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replicate, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_run_replicate(t) for t in tasks]
    records = [rec for batch in results for rec in batch]
    rows = summarize(records, config)
    return SweepResult(rows, records, config)


def summarize(records, config: ExperimentConfig) -> list[SummaryRow]:
    points = config.points()
    rows = []
    for pi_, point in enumerate(points):
        model = config.model_at(point)
        s = None if config.B is not None else point[1]
        for method in config.methods:
            recs = [r for r in records if r["point"] == pi_ and r["method"] == method]
            ok = np.array([r["nmi"] for r in recs if not r["error"]], dtype=float)
            times = np.array([r["runtime_seconds"] for r in recs if not r["error"]], dtype=float)
            rows.append(SummaryRow(
                scenario=config.scenario,
                N=point[0],
                s=s,
                pi1=float(model.pi[0]),
                density=model.expected_density(),
                method=method,
                clusterer=config.clusterer,
                mean_nmi=float(ok.mean()) if ok.size else float("nan"),
                std_nmi=float(ok.std()) if ok.size else float("nan"),
                mean_runtime_seconds=float(times.mean()) if times.size else float("nan"),
                replicates=int(ok.size),
                failures=len(recs) - int(ok.size),
            ))
    return rows


def run_ratio_sweep(config: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Sweep over the core proportion ``pi1`` with ``B`` held fixed."""
    if config.pi1_grid is None:
        raise ValueError("ratio sweep needs pi1_grid")
    return run_sweep(config, workers)


def run_chernoff_sweep(config: ExperimentConfig) -> list[dict]:
    """Deterministic ASE and DASE Chernoff information at every grid point."""
    if config.K < 2:
        raise ValueError("Chernoff information needs at least two blocks")
    rows = []
    for point in config.points():
        model = config.model_at(point)
        if model.K < 2:
            raise ValueError("Chernoff information needs at least two blocks")
        N = point[0]
        sizes = block_sizes(model.pi, N)
        ci_ase = chernoff_information(ase_block_moments(model.B, model.pi))
        ci_dase = chernoff_information(dase_block_moments(model, sizes))
        rows.append({
            "N": N,
            "pi1": float(model.pi[0]),
            "density": model.expected_density(),
            "CI_ASE": ci_ase,
            "CI_DASE": ci_dase,
        })
    return rows


CHERNOFF_HEADER = ["N", "pi1", "density", "CI_ASE", "CI_DASE"]


def write_chernoff_csv(rows, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHERNOFF_HEADER)
        for r in rows:
            w.writerow([_fmt(r[h]) for h in CHERNOFF_HEADER])


# --- real networks ----------------------------------------------------------


def ingest_edge_list(path, directed: bool = True, binarize: bool = True):
    """Binary adjacency (with node names) and an ingest report."""
    return read_edge_list(path, directed, binarize)


def top_fraction_labels(scores, fraction: float = 0.15) -> np.ndarray:
    """Label the top ``fraction`` of nodes by score as block 0, the rest 1."""
    scores = np.asarray(scores, dtype=float)
    k = int(round(fraction * scores.size))
    order = np.argsort(-scores, kind="stable")
    labels = np.ones(scores.size, dtype=np.int64)
    labels[order[:k]] = 0
    return labels


def _block_stats_adjacency(A: sp.csr_matrix, labels: np.ndarray, K: int):
    """Per-block-pair (sum, sum of squares, count) of off-diagonal entries of a binary ``A``."""
    Z = sp.csr_matrix((np.ones(labels.size), (np.arange(labels.size), labels)), shape=(labels.size, K))
    S = (Z.T @ A @ Z).toarray()
    n = np.bincount(labels, minlength=K).astype(float)
    count = np.outer(n, n) - np.diag(n)
    return S, S.copy(), count


def _block_stats_doubled(A: sp.csr_matrix, labels: np.ndarray, K: int, chunk: int = 2048):
    """Block sums and sums of squares of off-diagonal entries of ``A @ A``, row-chunked."""
    N = labels.size
    Z = sp.csr_matrix((np.ones(N), (np.arange(N), labels)), shape=(N, K))
    A = A.astype(np.float64).tocsr()
    total = (Z.T @ A @ (A @ Z)).toarray()
    sq = np.zeros((K, K))
    diag = np.zeros(N)
    for start in range(0, N, chunk):
        rows = A[start:start + chunk] @ A
        rows = rows.tocoo()
        r = rows.row + start
        on_diag = r == rows.col
        diag[r[on_diag]] = rows.data[on_diag]
        off = ~on_diag
        np.add.at(sq, (labels[r[off]], labels[rows.col[off]]), rows.data[off] ** 2)
    np.add.at(total, (labels, labels), -diag)
    n = np.bincount(labels, minlength=K).astype(float)
    count = np.outer(n, n) - np.diag(n)
    return total, sq, count


def empirical_block_moments(A: AdjacencyMatrix, labels, doubled: bool) -> ChernoffInputs:
    """Plug-in block means and variances of ``A`` (or ``A @ A``) under a partition."""
    _, labels = np.unique(np.asarray(labels), return_inverse=True)
    K = int(labels.max()) + 1
    stats = _block_stats_doubled if doubled else _block_stats_adjacency
    total, sq, count = stats(A.entries, labels, K)
    with np.errstate(invalid="ignore", divide="ignore"):
        M = total / count
        C = sq / count - M**2
    n = np.bincount(labels, minlength=K)
    return ChernoffInputs(M, np.maximum(C, 0.0), np.diag(n / n.sum()))


def plugin_chernoff(A: AdjacencyMatrix, labels, doubled: bool) -> float:
    """Chernoff information of the plug-in moments; NaN when undefined."""
    try:
        return chernoff_information(empirical_block_moments(A, labels, doubled))
    except ValueError:
        return float("nan")


@dataclass(frozen=True)
class RealDatasetReport:
    dataset: str
    N: int
    m: int
    density: float
    K: int
    d: int
    clusterer: str
    nmi_mean: dict
    nmi_std: dict
    ci_mean: dict
    ci_std: dict
    NMI_ratio: float | None
    CI_ratio: float | None
    reseeds: int

    def to_dict(self) -> dict:
        return asdict(self)


def _canonical(labels: np.ndarray) -> bytes:
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    _, inv = np.unique(labels, return_inverse=True)
    return remap[inv].astype(np.int64).tobytes()


def evaluate_real(A: AdjacencyMatrix, methods=("ASE", "DASE"), clusterer: str = "kmeans", K: int = 2,
                  d: int = 2, ground_truth=None, reseeds: int = 50, seed: int = 0,
                  dataset: str = "graph", scaled: bool = True) -> RealDatasetReport:
    """Embed once per method, cluster under ``reseeds`` seeds, score NMI and Chernoff information.

    Chernoff information uses plug-in block moments of ``A`` for ASE and of
    ``A @ A`` for DASE under each fitted partition; SC has none.
    """
    methods = [m.upper() for m in methods]
    if ground_truth is not None:
        ground_truth = np.asarray(ground_truth)
        if ground_truth.shape != (A.N,):
            raise ValueError(f"ground truth has {ground_truth.size} labels for {A.N} nodes")
    nmi_mean, nmi_std, ci_mean, ci_std = {}, {}, {}, {}
    for mi, method in enumerate(methods):
        emb = embed(A, method, d, K, scaled, seed=(seed, mi, 0))
        cache: dict[bytes, float] = {}
        nmis, cis = [], []
        for r in range(reseeds):
            labels = cluster(emb.coords, K, clusterer, seed=(seed, mi, 1, r))
            if ground_truth is not None:
                nmis.append(nmi(ground_truth, labels))
            if method in ("ASE", "DASE"):
                key = _canonical(labels)
                if key not in cache:
                    cache[key] = plugin_chernoff(A, labels, doubled=method == "DASE")
                cis.append(cache[key])
        if nmis:
            nmi_mean[method] = float(np.mean(nmis))
            nmi_std[method] = float(np.std(nmis))
        if cis:
            ci_mean[method] = float(np.mean(cis))
            ci_std[method] = float(np.std(cis))

    def ratio(table):
        if "ASE" in table and "DASE" in table and table["ASE"] != 0:
            return table["DASE"] / table["ASE"]
        return None

    return RealDatasetReport(
        dataset=dataset, N=A.N, m=A.n_edges, density=edge_density(A), K=K, d=d, clusterer=clusterer,
        nmi_mean=nmi_mean, nmi_std=nmi_std, ci_mean=ci_mean, ci_std=ci_std,
        NMI_ratio=ratio(nmi_mean), CI_ratio=ratio(ci_mean), reseeds=reseeds,
    )


def export_heatmap_matrix(A: AdjacencyMatrix, labels, path) -> dict:
    """Write the adjacency with nodes sorted by (cluster, degree descending) as 0/1 CSV.

    Clusters are ordered by mean degree, densest first, so a core block lands
    in the top-left corner.  A sidecar ``<path>.json`` records the node order
    and cluster boundaries.
    """
    labels = np.asarray(labels)
    if labels.shape != (A.N,):
        raise ValueError(f"need {A.N} labels, got {labels.size}")
    M = A.entries
    degree = np.asarray(M.sum(axis=1)).ravel() + np.asarray(M.sum(axis=0)).ravel()
    uniq = np.unique(labels)
    mean_deg = np.array([degree[labels == c].mean() for c in uniq])
    cluster_rank = {c: i for i, c in enumerate(uniq[np.argsort(-mean_deg, kind="stable")])}
    rank = np.array([cluster_rank[c] for c in labels])
    order = np.lexsort((np.arange(A.N), -degree, rank))
    P = M[order][:, order].toarray()
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in P:
            w.writerow(row.tolist())
    sorted_ranks = rank[order]
    boundaries = [int(i) for i in np.flatnonzero(np.diff(sorted_ranks)) + 1]
    meta = {
        "order": order.tolist(),
        "clusters": [int(c) if isinstance(c, (np.integer, int)) else str(c)
                     for c in uniq[np.argsort(-mean_deg, kind="stable")]],
        "boundaries": boundaries,
    }
    write_json(meta, path.with_suffix(path.suffix + ".json"))
    return meta


def assignment_from_labels(labels, K: int | None = None) -> CommunityAssignment:
    labels = np.asarray(labels, dtype=np.int64)
    return CommunityAssignment(labels, int(labels.max()) + 1 if K is None else K)


__all__ = [
    "ExperimentConfig",
    "RealDatasetReport",
    "SummaryRow",
    "SweepResult",
    "empirical_block_moments",
    "evaluate_real",
    "export_heatmap_matrix",
    "ingest_edge_list",
    "run_chernoff_sweep",
    "run_ratio_sweep",
    "run_sweep",
    "top_fraction_labels",
]
