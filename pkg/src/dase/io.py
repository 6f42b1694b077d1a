"""File formats: tab-separated edge lists, canonical ``.npz`` graphs, label CSVs."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from dase.graph import AdjacencyMatrix

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class IngestReport:
    lines: int
    edges_read: int
    self_loops: int
    duplicates: int
    nonpositive: int


def read_edge_list(path, directed: bool = True, binarize: bool = True):
    """Parse ``source<TAB>target[<TAB>weight]`` lines into a binary adjacency.

    Node names are mapped to 0-based indices in order of first appearance.
    Duplicate edges and positive weights collapse to one edge; edges with a
    non-positive weight are skipped; self-loops are dropped and counted.
    With ``binarize=False`` any weight other than 1 or repeated edge is an
    error.  Returns ``(AdjacencyMatrix, IngestReport)``.
    """
    index: dict[str, int] = {}
    src, dst = [], []
    n_lines = loops = nonpos = 0
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            n_lines += 1
            parts = line.split("\t")
            if len(parts) not in (2, 3) or not parts[0] or not parts[1]:
                raise ValueError(f"{path}:{lineno}: expected 'source<TAB>target[<TAB>weight]', got {line!r}")
            if len(parts) == 3:
                try:
                    weight = float(parts[2])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: weight {parts[2]!r} is not a number") from None
                if not binarize and weight != 1:
                    raise ValueError(f"{path}:{lineno}: weight {weight} with binarize disabled")
                if weight <= 0:
                    nonpos += 1
                    continue
            for name in parts[:2]:
                if name not in index:
                    index[name] = len(index)
            u, v = index[parts[0]], index[parts[1]]
            if u == v:
                loops += 1
                continue
            src.append(u)
            dst.append(v)
    if not index:
        raise ValueError(f"{path}: no edges found")
    if loops:
        log.warning("%s: dropped %d self-loop(s)", path, loops)

    src_a = np.asarray(src, dtype=np.int64)
    dst_a = np.asarray(dst, dtype=np.int64)
    N = len(index)
    if directed:
        keys = src_a * N + dst_a
    else:
        keys = np.minimum(src_a, dst_a) * N + np.maximum(src_a, dst_a)
    duplicates = int(keys.size - np.unique(keys).size)
    if duplicates and not binarize:
        raise ValueError(f"{path}: {duplicates} repeated edge(s) with binarize disabled")
    names = tuple(sorted(index, key=index.__getitem__))
    A = AdjacencyMatrix.from_edges(src_a, dst_a, N, directed, names)
    return A, IngestReport(n_lines, len(src), loops, duplicates, nonpos)


def write_edge_list(A: AdjacencyMatrix, path) -> None:
    coo = A.entries.tocoo()
    names = A.names or tuple(str(i) for i in range(A.N))
    with open(Path(path), "w", encoding="utf-8") as fh:
        fh.write(f"# nodes={A.N} directed={str(A.directed).lower()}\n")
        for i, j in zip(coo.row, coo.col):
            if A.directed or i < j:
                fh.write(f"{names[i]}\t{names[j]}\n")


def save_graph(A: AdjacencyMatrix, path) -> None:
    coo = A.entries.tocoo()
    names = np.array(A.names or [str(i) for i in range(A.N)], dtype=str)
    with open(Path(path), "wb") as fh:
        np.savez_compressed(fh, row=coo.row.astype(np.int64), col=coo.col.astype(np.int64),
                            N=np.int64(A.N), directed=np.bool_(A.directed), names=names)


def load_graph(path, directed: bool | None = None) -> AdjacencyMatrix:
    """Load a ``.npz`` canonical graph or a tab-separated edge list."""
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as z:
            N = int(z["N"])
            is_dir = bool(z["directed"])
            names = tuple(str(x) for x in z["names"])
            row, col = z["row"], z["col"]
        if directed is not None and directed != is_dir:
            raise ValueError(f"{path} stores a {'directed' if is_dir else 'undirected'} graph")
        M = sp.csr_matrix((np.ones(row.size, dtype=np.int64), (row, col)), shape=(N, N))
        return AdjacencyMatrix(M, is_dir, names)
    A, _ = read_edge_list(path, True if directed is None else directed)
    return A


def write_labels(labels, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "label"])
        for i, lab in enumerate(np.asarray(labels)):
            w.writerow([i, int(lab)])


def read_labels(path) -> np.ndarray:
    """Labels from a ``node,label`` CSV, ordered by node index."""
    nodes, labels = [], []
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["node", "label"]:
            raise ValueError(f"{path}: expected header 'node,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                nodes.append(int(row[0]))
                labels.append(int(row[1]))
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from None
    order = np.argsort(nodes, kind="stable")
    nodes_arr = np.asarray(nodes)[order]
    if not np.array_equal(nodes_arr, np.arange(len(nodes))):
        raise ValueError(f"{path}: node ids must be 0..N-1 without gaps")
    return np.asarray(labels, dtype=np.int64)[order]


def write_json(obj, path) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **obj}
    with open(Path(path), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")
