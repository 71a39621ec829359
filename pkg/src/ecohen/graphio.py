"""Reading and writing labelled graphs as node/edge CSV files."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .hetgraph import GraphError, HetGraph, build_graph

__all__ = ["IngestError", "LabeledGraph", "ingest", "emit", "file_digest",
           "read_gml_as_tables"]


class IngestError(GraphError):
    """Malformed input file; the message carries the file name and line."""


@dataclass(frozen=True)
class LabeledGraph:
    """A :class:`HetGraph` plus the original string ids and type labels."""
    graph: HetGraph
    node_ids: Tuple[str, ...]  # dense id -> original id
    type_labels: Tuple[str, ...]  # dense type -> original label

    def index(self) -> Dict[str, int]:
        return {v: i for i, v in enumerate(self.node_ids)}

    def names(self, nodes) -> List[str]:
        return [self.node_ids[int(v)] for v in sorted(nodes)]


def _rows(path: Path, header: Sequence[str]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [h.strip() for h in first] != list(header):
            raise IngestError(f"{path}:1: expected header {','.join(header)}")
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise IngestError(
                    f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [f.strip() for f in row]


def ingest(nodes_path, edges_path) -> LabeledGraph:
    """Load ``id,type`` and ``src,dst`` CSV files.

    Type labels get dense ids in order of first appearance. Repeated edge
    rows become multi-edges and ``src == dst`` rows become self-loops.
    """
    nodes_path, edges_path = Path(nodes_path), Path(edges_path)
    ids: Dict[str, int] = {}
    labels: Dict[str, int] = {}
    types: List[int] = []
    for line, (nid, tlabel) in _rows(nodes_path, ("id", "type")):
        if not nid or not tlabel:
            raise IngestError(f"{nodes_path}:{line}: empty id or type")
        if nid in ids:
            raise IngestError(f"{nodes_path}:{line}: duplicate node id {nid!r}")
        ids[nid] = len(ids)
        types.append(labels.setdefault(tlabel, len(labels)))
    if not ids:
        raise IngestError(f"{nodes_path}: no nodes")

    edges = []
    for line, (a, b) in _rows(edges_path, ("src", "dst")):
        try:
            edges.append((ids[a], ids[b]))
        except KeyError as exc:
            raise IngestError(
                f"{edges_path}:{line}: endpoint {exc.args[0]!r} not in node file") from None
    g = build_graph(types, np.array(edges, dtype=np.int64).reshape(-1, 2), len(labels))
    return LabeledGraph(g, tuple(ids), tuple(labels))


def emit(lg: LabeledGraph, nodes_path, edges_path) -> None:
    """Write ``lg`` in the format read by :func:`ingest`."""
    g = lg.graph
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "type"])
        for u in range(g.n):
            w.writerow([lg.node_ids[u], lg.type_labels[g.types[u]]])
    write_edges(lg, g.edges, edges_path)


def write_edges(lg: LabeledGraph, edges: np.ndarray, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        for a, b in edges:
            w.writerow([lg.node_ids[a], lg.node_ids[b]])


def labeled(g: HetGraph, type_labels=None) -> LabeledGraph:
    """Wrap a dense graph with ids ``"0".."n-1"`` and labels ``"0".."K-1"``."""
    if type_labels is None:
        type_labels = [str(k) for k in range(g.n_types)]
    # label order must follow first appearance for ingest(emit(.)) to round trip
    order = []
    for t in g.types:
        if int(t) not in order:
            order.append(int(t))
    order += [k for k in range(g.n_types) if k not in order]
    remap = np.empty(g.n_types, dtype=np.int64)
    remap[order] = np.arange(g.n_types)
    g2 = build_graph(remap[g.types], g.edges, g.n_types)
    return LabeledGraph(g2, tuple(str(u) for u in range(g.n)),
                        tuple(str(type_labels[k]) for k in order))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def read_gml_as_tables(path, type_attr: str = "value"):
    """Reduce a GML network to an undirected simple graph on its largest
    connected component.

    Returns ``(nodes, edges)`` where ``nodes`` is a list of ``(id, type)``
    string pairs and ``edges`` a list of ``(src, dst)`` pairs. Directed
    links in both directions collapse to one edge; self-loops are dropped.
    """
    import networkx as nx

    raw = nx.read_gml(path, label="label")
    g = nx.Graph()
    g.add_nodes_from(raw.nodes(data=True))
    g.add_edges_from((a, b) for a, b in raw.edges() if a != b)
    if g.number_of_nodes() == 0:
        raise IngestError(f"{path}: no nodes")
    keep = max(nx.connected_components(g), key=len)
    g = g.subgraph(keep)
    nodes = []
    for v, data in g.nodes(data=True):
        if type_attr not in data:
            raise IngestError(f"{path}: node {v!r} lacks attribute {type_attr!r}")
        nodes.append((str(v), str(data[type_attr])))
    edges = [(str(a), str(b)) for a, b in g.edges()]
    return nodes, edges
