"""Immutable node-typed multigraph with per-type degree bookkeeping.

Nodes are dense integers ``0..n-1`` and node types are dense integers
``0..K-1``. Edges are undirected; self-loops and multi-edges are allowed.
A self-loop on ``u`` adds 2 to ``u``'s same-type degree, so every type-pair
bucket satisfies the handshake identity.
"""
from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised for malformed graph input (bad node id or type id)."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class HetGraph:
    """Undirected heterogeneous multigraph.

    Do not construct directly; use :func:`build_graph`. All array attributes
    are read-only so a single instance can be shared by many workers.

    Attributes
    ----------
    n : int
        Number of nodes.
    n_types : int
        Number of node types ``K``.
    types : ndarray of shape (n,)
        Type id of every node.
    edges : ndarray of shape (m, 2)
        Canonical edge list (``u <= v`` per row, rows sorted).
    degrees : ndarray of shape (n, K)
        ``degrees[u, k]`` is the number of edge ends at ``u`` whose other end
        is a type-``k`` node (self-loops count twice).
    bucket_sizes : ndarray of shape (K, K)
        Symmetric matrix of edge counts per unordered type pair.
    """

    __slots__ = (
        "n", "n_types", "types", "edges", "degrees", "bucket_sizes",
        "self_loops", "adj", "type_onehot", "_type_members",
    )

    def __init__(self, n, n_types, types, edges, degrees, bucket_sizes,
                 self_loops, adj):
        self.n = n
        self.n_types = n_types
        self.types = _readonly(types)
        self.edges = _readonly(edges)
        self.degrees = _readonly(degrees)
        self.bucket_sizes = _readonly(bucket_sizes)
        self.self_loops = _readonly(self_loops)
        # off-diagonal adjacency with multiplicities; self-loops kept apart
        self.adj = adj
        onehot = np.zeros((n, n_types), dtype=np.float64)
        onehot[np.arange(n), types] = 1.0
        self.type_onehot = _readonly(onehot)
        self._type_members = tuple(
            _readonly(np.flatnonzero(types == k)) for k in range(n_types)
        )

    def __setattr__(self, name, value):
        if hasattr(self, name):
            raise AttributeError("HetGraph is immutable")
        object.__setattr__(self, name, value)

    def __repr__(self) -> str:
        return (f"HetGraph(n={self.n}, K={self.n_types}, "
                f"m={self.n_edges})")

    def __eq__(self, other) -> bool:
        if not isinstance(other, HetGraph):
            return NotImplemented
        return (self.n == other.n and self.n_types == other.n_types
                and np.array_equal(self.types, other.types)
                and np.array_equal(self.edges, other.edges))

    def __hash__(self):
        return hash((self.n, self.n_types, self.types.tobytes(),
                     self.edges.tobytes()))

    def __reduce__(self):
        return (build_graph, (self.types, self.edges, self.n_types))

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def total_degrees(self) -> np.ndarray:
        return self.degrees.sum(axis=1)

    def type_members(self, k: int) -> np.ndarray:
        """Node ids of type ``k`` in ascending order."""
        return self._type_members[k]

    def type_sizes(self) -> np.ndarray:
        return np.array([len(m) for m in self._type_members], dtype=np.int64)

    def bucket(self, k: int, l: int) -> np.ndarray:
        """Edges between type ``k`` and type ``l`` as an (m_kl, 2) array."""
        tu = self.types[self.edges[:, 0]]
        tv = self.types[self.edges[:, 1]]
        sel = ((tu == k) & (tv == l)) | ((tu == l) & (tv == k))
        return self.edges[sel]

    def is_simple(self) -> bool:
        if self.self_loops.any():
            return False
        if self.n_edges < 2:
            return True
        e = self.edges
        return not np.any((e[1:] == e[:-1]).all(axis=1))

    def neighbors(self, u: int) -> np.ndarray:
        """Distinct neighbors of ``u`` (excluding ``u`` itself)."""
        _check_node(self, u)
        return self.adj.indices[self.adj.indptr[u]:self.adj.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        _check_node(self, u)
        _check_node(self, v)
        if u == v:
            return bool(self.self_loops[u])
        return self.adj[u, v] > 0


def _check_node(g: HetGraph, u) -> None:
    if not (0 <= int(u) < g.n) or int(u) != u:
        raise GraphError(f"unknown node {u!r} (graph has {g.n} nodes)")


def build_graph(node_types: Sequence[int],
                edge_list: Iterable[Sequence[int]],
                n_types: Optional[int] = None) -> HetGraph:
    """Build an immutable :class:`HetGraph`.

    Parameters
    ----------
    node_types : sequence of int
        ``node_types[u]`` is the type of node ``u``, in ``0..K-1``.
    edge_list : iterable of (u, v) pairs
        Undirected edges; repeated pairs are multi-edges and ``u == v`` is a
        self-loop.
    n_types : int, optional
        ``K``. Defaults to ``max(node_types) + 1``. Passing it explicitly
        allows types with no nodes.
    """
    types = np.asarray(node_types, dtype=np.int64).reshape(-1)
    n = int(types.shape[0])
    if n_types is None:
        n_types = int(types.max()) + 1 if n else 0
    n_types = int(n_types)
    if n and (types.min() < 0 or types.max() >= n_types):
        bad = types[(types < 0) | (types >= n_types)][0]
        raise GraphError(f"type id {bad} out of range 0..{n_types - 1}")

    edges = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray)
                       else edge_list, dtype=np.int64)
    if edges.size == 0:
        edges = np.zeros((0, 2), dtype=np.int64)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise GraphError("edge_list must contain (u, v) pairs")
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        bad = edges[(edges < 0) | (edges >= n)][0]
        raise GraphError(f"unknown node {bad} in edge list (n={n})")

    edges = np.sort(edges, axis=1)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    u, v = edges[:, 0], edges[:, 1]
    tu, tv = types[u], types[v]

    # each edge end contributes one to its endpoint's degree toward the other type
    degrees = np.zeros((n, n_types), dtype=np.int64)
    np.add.at(degrees, (u, tv), 1)
    np.add.at(degrees, (v, tu), 1)

    bucket_sizes = np.zeros((n_types, n_types), dtype=np.int64)
    np.add.at(bucket_sizes, (tu, tv), 1)
    off = tu != tv
    np.add.at(bucket_sizes, (tv[off], tu[off]), 1)

    loop = u == v
    self_loops = np.bincount(u[loop], minlength=n).astype(np.int64)

    ou, ov = u[~loop], v[~loop]
    rows = np.concatenate([ou, ov])
    cols = np.concatenate([ov, ou])
    adj = sp.csr_matrix((np.ones(rows.shape[0], dtype=np.float64), (rows, cols)),
                        shape=(n, n))
    adj.sum_duplicates()
    adj.sort_indices()

    return HetGraph(n, n_types, types.copy(), edges, degrees, bucket_sizes,
                    self_loops, adj)


def typed_degree(g: HetGraph, u: int) -> np.ndarray:
    """Heterogeneous degree sequence of ``u``: length-K edge counts per type."""
    _check_node(g, u)
    return g.degrees[u].copy()


def neighborhood(g: HetGraph, u: int) -> frozenset:
    """Closed neighborhood ``{u} | {v : {u, v} in E}``."""
    _check_node(g, u)
    return frozenset(int(v) for v in g.neighbors(u)) | {int(u)}


def degree_collection(g: HetGraph) -> np.ndarray:
    """All heterogeneous degree sequences as an (n, K) array copy."""
    return g.degrees.copy()
