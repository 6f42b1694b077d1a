"""Command-line interface: ``dase <subcommand> ...``.

Every subcommand writes into ``--out`` (a directory, created if missing)
using fixed file names:

========== ==============================================================
simulate   ``edges.tsv``, ``graph.npz``, ``labels.csv``, ``simulate.json``
embed      ``embedding.csv`` (``node,coord_0,...``), ``embed.json``
cluster    ``labels.csv`` (``node,label``)
evaluate   ``metrics.json``
chernoff   ``chernoff.json`` or, with ``--config``, ``chernoff.csv``
bounds     ``bounds.json``
sweep      ``summary.csv``, ``replicates.csv``, ``timings.csv``, ``metadata.json``
ingest     ``graph.npz``, ``ingest.json``
heatmap    ``heatmap.csv``, ``heatmap.csv.json``
real       ``report.json``
========== ==============================================================
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from dase import harness
from dase.clustering import cluster
from dase.embeddings import embed, read_embedding_csv
from dase.graph import BlockModel, edge_density, sample_assignment, sample_sbm, scaled_block_matrix
from dase.io import load_graph, read_labels, save_graph, write_edge_list, write_json, write_labels
from dase.metrics import misclustering, nmi
from dase.theory import (
    ase_chernoff,
    block_sizes,
    bound_constants_from_model,
    bound_core,
    bound_general_dase,
    dase_chernoff,
)


def _add_common(p: argparse.ArgumentParser, seed=True, out=True) -> None:
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    if out:
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def _add_direction(p: argparse.ArgumentParser, default=True) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--directed", dest="directed", action="store_true", default=default)
    g.add_argument("--undirected", dest="directed", action="store_false")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--B", type=json.loads, default=None,
                   help="block matrix as JSON, e.g. '[[0.08,0.048],[0.048,0.024]]'")
    p.add_argument("--scale", type=float, default=0.05,
                   help="s in B = s * [[1,.6],[.6,.3]] when --B is not given")
    p.add_argument("--pi", type=float, nargs="+", default=[0.5, 0.5], help="block proportions")
    p.add_argument("--N", type=int, default=1000, help="number of nodes")


def _model(args) -> BlockModel:
    B = np.asarray(args.B, dtype=float) if args.B is not None else scaled_block_matrix(args.scale, harness.BASELINE_RATIOS)
    return BlockModel(B, args.pi, getattr(args, "directed", True))


def _outdir(args) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_simulate(args) -> None:
    model = _model(args)
    out = _outdir(args)
    tau = sample_assignment(model.pi, args.N, (args.seed, 0))
    A = sample_sbm(model, tau, (args.seed, 1))
    write_edge_list(A, out / "edges.tsv")
    save_graph(A, out / "graph.npz")
    write_labels(tau.labels, out / "labels.csv")
    write_json({"N": A.N, "m": A.n_edges, "directed": A.directed, "B": model.B, "pi": model.pi,
                "seed": args.seed}, out / "simulate.json")


def cmd_embed(args) -> None:
    A = load_graph(args.graph)
    out = _outdir(args)
    emb = embed(A, args.method, args.d, args.k, args.scaled, seed=args.seed)
    emb.to_csv(out / "embedding.csv")
    write_json({"method": emb.method, "d": emb.d, "scaled": emb.scaled,
                "singular_values": emb.sigma if emb.sigma is not None else None}, out / "embed.json")


def cmd_cluster(args) -> None:
    X = read_embedding_csv(args.embedding)
    out = _outdir(args)
    labels = cluster(X, args.k, args.clusterer, seed=args.seed)
    write_labels(labels, out / "labels.csv")


def cmd_evaluate(args) -> None:
    truth = read_labels(args.truth)
    est = read_labels(args.estimate)
    out = _outdir(args)
    mc = misclustering(truth, est)
    write_json({"N": int(truth.size), "nmi": nmi(truth, est), "misclustering_count": mc.count,
                "misclustering_rate": mc.rate}, out / "metrics.json")


def cmd_chernoff(args) -> None:
    out = _outdir(args)
    if args.config is not None:
        cfg = harness.ExperimentConfig.from_json(args.config)
        harness.write_chernoff_csv(harness.run_chernoff_sweep(cfg), out / "chernoff.csv")
        return
    model = _model(args)
    write_json({"N": args.N, "B": model.B, "pi": model.pi, "density": model.expected_density(),
                "CI_ASE": ase_chernoff(model), "CI_DASE": dase_chernoff(model, args.N)},
               out / "chernoff.json")


def cmd_bounds(args) -> None:
    model = _model(args)
    out = _outdir(args)
    consts = bound_constants_from_model(model, block_sizes(model.pi, args.N))
    rows = []
    for n in args.grid or [args.N]:
        row = {"N": n, "general_DASE": bound_general_dase(consts, n, model.directed)}
        if model.K == 2:
            row["core_DASE"] = bound_core(consts, n, "DASE")
            row["core_ASE"] = bound_core(consts, n, "ASE")
        rows.append(row)
    write_json({"constants": consts.__dict__, "directed": model.directed, "bounds": rows}, out / "bounds.json")


def cmd_sweep(args) -> None:
    cfg = harness.ExperimentConfig.from_json(args.config)
    if args.replicates is not None:
        cfg.replicates = args.replicates
    result = harness.run_sweep(cfg, workers=args.workers)
    result.write(_outdir(args))


def cmd_ingest(args) -> None:
    out = _outdir(args)
    A, report = harness.ingest_edge_list(args.edges, args.directed, not args.no_binarize)
    save_graph(A, out / "graph.npz")
    write_json({"N": A.N, "m": A.n_edges, "directed": A.directed,
                "density": edge_density(A),
                **report.__dict__}, out / "ingest.json")


def cmd_heatmap(args) -> None:
    A = load_graph(args.graph)
    labels = read_labels(args.labels)
    out = _outdir(args)
    harness.export_heatmap_matrix(A, labels, out / "heatmap.csv")


def cmd_real(args) -> None:
    A = load_graph(args.graph)
    truth = read_labels(args.truth) if args.truth is not None else None
    out = _outdir(args)
    report = harness.evaluate_real(A, args.methods, args.clusterer, args.k, args.d, truth,
                                   reseeds=args.reseeds, seed=args.seed,
                                   dataset=Path(args.graph).stem, scaled=args.scaled)
    write_json(report.to_dict(), out / "report.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dase", description="Doubled adjacency spectral embedding toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample one SBM graph")
    _add_model(p)
    _add_direction(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("embed", help="spectral embedding of a graph")
    p.add_argument("graph", type=Path)
    p.add_argument("--method", type=str.upper, choices=["SC", "ASE", "DASE"], default="DASE")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=2, help="number of eigenvectors for SC")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--scaled", dest="scaled", action="store_true", default=True)
    g.add_argument("--unscaled", dest="scaled", action="store_false")
    _add_common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="cluster embedding rows")
    p.add_argument("embedding", type=Path)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--clusterer", choices=["kmeans", "gmm"], default="kmeans")
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("evaluate", help="compare two label files")
    p.add_argument("truth", type=Path)
    p.add_argument("estimate", type=Path)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("chernoff", help="Chernoff information of ASE and DASE")
    _add_model(p)
    _add_direction(p)
    p.add_argument("--config", type=Path, default=None, help="chernoff_sweep config (JSON)")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_chernoff)

    p = sub.add_parser("bounds", help="misclustering bounds")
    _add_model(p)
    _add_direction(p)
    p.add_argument("--grid", type=int, nargs="*", default=None, help="node counts to evaluate the bounds at")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("sweep", help="run a simulation sweep from a JSON config")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--replicates", type=int, default=None, help="override the config's replicate count")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ingest", help="edge list to canonical graph file")
    p.add_argument("edges", type=Path)
    p.add_argument("--no-binarize", action="store_true")
    _add_direction(p)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("heatmap", help="degree-sorted adjacency matrix CSV")
    p.add_argument("graph", type=Path)
    p.add_argument("labels", type=Path)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("real", help="evaluate methods on a real network")
    p.add_argument("graph", type=Path)
    p.add_argument("--truth", type=Path, default=None)
    p.add_argument("--methods", type=str.upper, nargs="+", default=["ASE", "DASE"])
    p.add_argument("--clusterer", choices=["kmeans", "gmm"], default="kmeans")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--reseeds", type=int, default=50)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--scaled", dest="scaled", action="store_true", default=True)
    g.add_argument("--unscaled", dest="scaled", action="store_false")
    _add_common(p)
    p.set_defaults(func=cmd_real)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"dase {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
