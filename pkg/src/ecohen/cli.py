"""Command-line entry point: ``ecohen <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .extraction import (THREADS_ENV, Community, CommunitySet, ExtractionConfig,
                         extract_all)
from .graphio import (LabeledGraph, emit, file_digest, ingest,
                      labeled, read_gml_as_tables, write_edges)
from .hetgraph import GraphError
from .hsbm import TwoBlockSpec, two_block
from .metrics import (background_proportion, community_stats, max_jaccard,
                      snowball_ratd_quantile)
from .nullmodel import HdcmSampler
from .refinement import RefinementConfig, refine


class CliError(Exception):
    pass


def _json_number(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else "-inf"
    return x


def _stats_dict(lg: LabeledGraph, c: Community):
    g = lg.graph
    if not g.is_simple() or not 2 <= c.size < g.n:
        return None
    d = community_stats(g, c.members).as_dict()
    d["type_composition"] = dict(zip(lg.type_labels, d["type_composition"]))
    return {k: _json_number(v) for k, v in d.items()}


def communities_to_json(lg: LabeledGraph, cs: CommunitySet) -> list:
    out = []
    for i, c in enumerate(cs):
        out.append({
            "community_id": i,
            "members": lg.names(c.members),
            "seed_id": lg.node_ids[c.seed_id],
            "seed_ids": [lg.node_ids[s] for s in c.seed_ids],
            "iterations": max(c.iterations),
            "converged": c.converged,
            "tie_breaks": c.tie_breaks,
            "stats": _stats_dict(lg, c),
        })
    return out


def communities_from_json(lg: LabeledGraph, records) -> CommunitySet:
    index = lg.index()
    comms = []
    for r in records:
        try:
            members = tuple(sorted(index[m] for m in r["members"]))
            seeds = tuple(index[s] for s in r.get("seed_ids", [r["seed_id"]]))
        except KeyError as exc:
            raise CliError(f"community refers to unknown node {exc.args[0]!r}") from None
        comms.append(Community(members, seeds, (int(r.get("iterations", 0)),) * len(seeds),
                               bool(r.get("converged", True)), int(r.get("tie_breaks", 0))))
    comms.sort(key=lambda c: (-c.size, c.members))
    return CommunitySet(tuple(comms))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _load(args) -> LabeledGraph:
    return ingest(args.nodes, args.edges)


def _graph_args(p):
    p.add_argument("--nodes", required=True, help="CSV with header id,type")
    p.add_argument("--edges", required=True, help="CSV with header src,dst")


def _refine_args(p):
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--min-size", type=int, default=1)
    p.add_argument("--max-size", type=int, default=None)
    p.add_argument("--exclude-complete", action="store_true")


def _refine_config(args) -> RefinementConfig:
    return RefinementConfig(args.min_size, args.max_size, args.beta, args.exclude_complete)


def _audit_rows(lg: LabeledGraph, cs: CommunitySet):
    for i, c in enumerate(cs):
        for s, t in zip(c.seed_ids, c.seed_tie_breaks):
            if t:
                yield [i, lg.node_ids[s], t]


def run_extract(args) -> int:
    timings = {}
    t0 = time.perf_counter()
    lg = _load(args)
    timings["ingest"] = time.perf_counter() - t0
    config = ExtractionConfig(alpha=args.alpha, xi=args.xi, phi=args.phi,
                              max_iters=args.max_iters, threads=args.threads or 1)
    rconf = _refine_config(args) if args.refine else None

    t = time.perf_counter()
    cs = extract_all(lg.graph, config, threads=args.threads)
    timings["extract"] = time.perf_counter() - t
    extracted = len(cs)
    if rconf is not None:
        t = time.perf_counter()
        cs = refine(cs, rconf, lg.graph)
        timings["refine"] = time.perf_counter() - t

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    _write_json(out / "communities.json", communities_to_json(lg, cs))
    with open(out / "tiebreaks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["community_id", "seed", "tie_breaks"])
        w.writerows(_audit_rows(lg, cs))
    timings["write"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0

    manifest = {
        "command": "extract",
        "version": __version__,
        "config": {
            "alpha": config.alpha, "xi": config.xi, "phi": config.phi,
            "max_iters": config.max_iters, "threads": args.threads,
            "refine": args.refine, "beta": args.beta, "min_size": args.min_size,
            "max_size": args.max_size, "exclude_complete": args.exclude_complete,
        },
        "seed": args.seed,
        "inputs": {
            "nodes": {"path": str(Path(args.nodes).resolve()), "sha256": file_digest(args.nodes)},
            "edges": {"path": str(Path(args.edges).resolve()), "sha256": file_digest(args.edges)},
        },
        "graph": {"nodes": lg.graph.n, "edges": lg.graph.n_edges,
                  "types": list(lg.type_labels)},
        "counts": {"extracted": extracted, "reported": len(cs)},
        "extraction_stats": {k: v for k, v in cs.stats.items()},
        "timings_sec": timings,
    }
    _write_json(out / "manifest.json", manifest)
    print(f"{len(cs)} communities written to {out / 'communities.json'}")
    return 0


def run_replay(args) -> int:
    m = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    if m.get("command") != "extract":
        raise CliError("manifest does not describe an extract run")
    for key in ("nodes", "edges"):
        inp = m["inputs"][key]
        if file_digest(inp["path"]) != inp["sha256"]:
            raise CliError(f"input {inp['path']} changed since the recorded run")
    c = m["config"]
    ns = argparse.Namespace(
        nodes=m["inputs"]["nodes"]["path"], edges=m["inputs"]["edges"]["path"],
        alpha=c["alpha"], xi=c["xi"], phi=c["phi"], max_iters=c["max_iters"],
        threads=args.threads if args.threads is not None else c["threads"],
        refine=c["refine"], beta=c["beta"], min_size=c["min_size"],
        max_size=c["max_size"], exclude_complete=c["exclude_complete"],
        seed=m.get("seed"), out=args.out)
    return run_extract(ns)


def run_refine(args) -> int:
    lg = _load(args)
    records = json.loads(Path(args.communities).read_text(encoding="utf-8"))
    cs = refine(communities_from_json(lg, records), _refine_config(args), lg.graph)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, communities_to_json(lg, cs))
    print(f"{len(cs)} communities kept")
    return 0


def run_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(args.seed).spawn(args.replicates)
    for i, ss in enumerate(seeds):
        spec = TwoBlockSpec(args.p, args.b, args.r11, args.r22, args.r12,
                            args.per_type, seed=ss)
        g, hcb = two_block(spec)
        lg = labeled(g)
        emit(lg, out / f"nodes_{i}.csv", out / f"edges_{i}.csv")
        with open(out / f"truth_{i}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "block"])
            for u in range(g.n):
                w.writerow([lg.node_ids[u], int(u in hcb)])
    _write_json(out / "simulation.json", {
        "version": __version__, "seed": args.seed, "replicates": args.replicates,
        "p": args.p, "b": args.b, "r11": args.r11, "r22": args.r22, "r12": args.r12,
        "per_type": args.per_type})
    print(f"{args.replicates} replicates written to {out}")
    return 0


def _read_truth(path, block: str) -> List[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "id" not in rows[0]:
        raise CliError(f"{path}: expected a header with an id column")
    if "block" in rows[0]:
        return [r["id"] for r in rows if r["block"] == block]
    return [r["id"] for r in rows]


def run_metrics(args) -> int:
    lg = _load(args)
    records = json.loads(Path(args.communities).read_text(encoding="utf-8"))
    cs = communities_from_json(lg, records)
    g = lg.graph
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["community_id", "size", "internal_edges", "boundary_edges",
            "internal_density", "between_density", "ratio_of_densities"]
    cols += [f"frac_{t}" for t in lg.type_labels]
    if args.snowball:
        cols.append("snowball_q95")
    rng_seeds = np.random.SeedSequence(args.seed).spawn(max(len(cs), 1))
    with open(out / "communities.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i, c in enumerate(cs):
            if not (g.is_simple() and 2 <= c.size < g.n):
                continue
            s = community_stats(g, c.members)
            row = [i, s.size, s.internal_edges, s.boundary_edges, s.internal_density,
                   s.between_density, s.ratio_of_densities, *s.type_composition]
            if args.snowball:
                row.append(snowball_ratd_quantile(g, c.size, args.snowball, 0.95,
                                                  seed=rng_seeds[i]))
            w.writerow(row)
    summary = {"communities": len(cs),
               "background_proportion": background_proportion(g, cs)}
    if args.truth:
        index = lg.index()
        truth = [index[v] for v in _read_truth(args.truth, args.truth_block) if v in index]
        summary["max_jaccard"] = max_jaccard(truth, cs) if truth else None
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary))
    return 0


def run_null_sample(args) -> int:
    lg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sampler = HdcmSampler(lg.graph, args.seed)
    for i in range(args.count):
        write_edges(lg, sampler.sample_edges(), out / f"edges_{i}.csv")
    print(f"{args.count} samples written to {out}")
    return 0


def run_prepare(args) -> int:
    nodes, edges = read_gml_as_tables(args.gml, args.type_attr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "nodes.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "type"])
        w.writerows(nodes)
    with open(out / "edges.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        w.writerows(edges)
    print(f"{len(nodes)} nodes, {len(edges)} edges written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecohen", description="Community extraction from node-typed networks.")
    parser.add_argument("--version", action="version", version=f"ecohen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract communities from a graph")
    _graph_args(p)
    p.add_argument("--alpha", type=float, default=0.10)
    p.add_argument("--xi", type=float, default=1.0)
    p.add_argument("--phi", type=float, default=0.99)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker processes (default: ${THREADS_ENV} or 1)")
    p.add_argument("--seed", type=int, default=None,
                   help="recorded in the manifest; extraction itself is deterministic")
    p.add_argument("--refine", action="store_true")
    _refine_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=run_extract)

    p = sub.add_parser("replay", help="re-run an extraction from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_replay)

    p = sub.add_parser("refine", help="filter a community file by size and overlap")
    _graph_args(p)
    p.add_argument("--communities", required=True)
    _refine_args(p)
    p.add_argument("--out", required=True, help="output JSON file")
    p.set_defaults(func=run_refine)

    p = sub.add_parser("simulate", help="sample two-block benchmark graphs")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--r11", type=float, default=0.0)
    p.add_argument("--r22", type=float, default=0.0)
    p.add_argument("--r12", type=float, default=0.0)
    p.add_argument("--per-type", type=int, default=500)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("metrics", help="per-community statistics and summary")
    _graph_args(p)
    p.add_argument("--communities", required=True)
    p.add_argument("--truth", default=None, help="CSV with id[,block] columns")
    p.add_argument("--truth-block", default="1")
    p.add_argument("--snowball", type=int, default=0,
                   help="snowball samples per community for the 95%% RatD quantile")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_metrics)

    p = sub.add_parser("null-sample", help="draw degree-preserving random graphs")
    _graph_args(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_null_sample)

    p = sub.add_parser("prepare", help="convert a GML network to node/edge CSV")
    p.add_argument("--gml", required=True)
    p.add_argument("--type-attr", default="value")
    p.add_argument("--out", required=True)
    p.set_defaults(func=run_prepare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, GraphError, ValueError, OSError) as exc:
        print(f"ecohen: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
