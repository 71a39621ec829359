"""Evaluation statistics for extracted communities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .hetgraph import GraphError, HetGraph
from .refinement import jaccard

__all__ = [
    "CommunityStats", "community_stats", "ratio_of_densities", "max_jaccard",
    "background_proportion", "snowball_sample", "SnowballSample",
    "snowball_ratd_quantile", "nearest_rank_quantile",
]


@dataclass(frozen=True)
class CommunityStats:
    size: int
    internal_edges: int
    boundary_edges: int
    internal_density: float
    between_density: float
    ratio_of_densities: float  # inf when there are no boundary edges
    type_composition: Tuple[float, ...]

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["type_composition"] = list(self.type_composition)
        return d


def _member_array(g: HetGraph, C) -> np.ndarray:
    idx = np.array(sorted({int(v) for v in C}), dtype=np.int64)
    if idx.size and (idx[0] < 0 or idx[-1] >= g.n):
        raise GraphError("community contains unknown nodes")
    return idx


def community_stats(g: HetGraph, C: Iterable[int]) -> CommunityStats:
    """Edge counts and densities of ``C``; requires a simple graph and
    ``2 <= |C| < n``."""
    if not g.is_simple():
        raise GraphError("density statistics assume a simple graph")
    idx = _member_array(g, C)
    s = idx.size
    if s < 2:
        raise ValueError("community needs at least two nodes")
    if s >= g.n:
        raise ValueError("community cannot be the whole node set")
    mask = np.zeros(g.n, dtype=bool)
    mask[idx] = True
    rows = g.adj[idx]
    inside = int(rows[:, mask].sum()) // 2
    boundary = int(rows.sum()) - 2 * inside
    p_i = inside / (s * (s - 1) / 2)
    p_b = boundary / (s * (g.n - s))
    ratd = p_i / p_b if p_b > 0 else math.inf
    comp = np.bincount(g.types[idx], minlength=g.n_types) / s
    return CommunityStats(s, inside, boundary, p_i, p_b, ratd,
                          tuple(float(v) for v in comp))


def ratio_of_densities(g: HetGraph, C: Iterable[int]) -> float:
    """Internal edge density over boundary edge density (``inf`` if no
    boundary edges)."""
    return community_stats(g, C).ratio_of_densities


def max_jaccard(truth: Iterable[int], communities) -> float:
    """Best Jaccard overlap between ``truth`` and any community."""
    D = frozenset(int(v) for v in truth)
    if not D:
        raise ValueError("ground truth set must be nonempty")
    best = 0.0
    for c in communities:
        s = c.as_set() if hasattr(c, "as_set") else frozenset(c)
        best = max(best, jaccard(D, s))
    return best


def background_proportion(g: HetGraph, communities) -> float:
    """Fraction of nodes not in any community."""
    if g.n == 0:
        return 1.0
    covered = np.zeros(g.n, dtype=bool)
    for c in communities:
        members = c.members if hasattr(c, "members") else tuple(c)
        covered[np.asarray(members, dtype=np.int64)] = True
    return float(1.0 - covered.mean())


@dataclass(frozen=True)
class SnowballSample:
    nodes: frozenset
    restarts: int  # times the frontier ran dry and a fresh start node was drawn


def snowball_sample(g: HetGraph, size: int, rng: np.random.Generator) -> SnowballSample:
    """Grow a node set breadth-first from a uniform start node.

    Each round records the unvisited neighbors of the current frontier. If
    there are more of them than slots left, the remainder is a uniform
    subset. When the frontier dies out early, a new uniform unvisited node
    starts a fresh ball.
    """
    if not 1 <= size <= g.n:
        raise ValueError(f"size must lie in 1..{g.n}")
    chosen = np.zeros(g.n, dtype=bool)
    restarts = -1
    count = 0
    frontier = np.zeros(0, dtype=np.int64)
    while count < size:
        if frontier.size == 0:
            restarts += 1
            pool = np.flatnonzero(~chosen)
            start = int(rng.choice(pool))
            chosen[start] = True
            count += 1
            frontier = np.array([start])
            continue
        nbrs = np.unique(g.adj[frontier].indices)
        nbrs = nbrs[~chosen[nbrs]]
        left = size - count
        if nbrs.size > left:
            nbrs = np.sort(rng.choice(nbrs, size=left, replace=False))
        chosen[nbrs] = True
        count += nbrs.size
        frontier = nbrs
    return SnowballSample(frozenset(int(v) for v in np.flatnonzero(chosen)),
                          max(restarts, 0))


def nearest_rank_quantile(values, q: float) -> float:
    """Smallest value with at least ``q`` of the sample at or below it."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("empty sample")
    rank = max(1, math.ceil(q * v.size))
    return float(v[rank - 1])


def snowball_ratd_quantile(g: HetGraph, size: int, n_samples: int = 1000,
                           q: float = 0.95, seed=None) -> float:
    """Quantile of RatD over snowball samples of the given size."""
    rng = np.random.default_rng(seed)
    vals = [ratio_of_densities(g, snowball_sample(g, size, rng).nodes)
            for _ in range(n_samples)]
    return nearest_rank_quantile(vals, q)
