"""Post-processing of extracted communities: size filter plus greedy
selection of large, weakly overlapping sets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .extraction import CommunitySet
from .hetgraph import HetGraph

__all__ = ["RefinementConfig", "refine", "jaccard"]


def jaccard(a, b) -> float:
    """``|a & b| / |a | b|``; two empty sets give 0."""
    a, b = set(a), set(b)
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


@dataclass(frozen=True)
class RefinementConfig:
    min_size: int = 1
    max_size: Optional[int] = None
    beta: float = 1.0
    exclude_complete: bool = False

    def __post_init__(self):
        if self.min_size < 1:
            raise ValueError("min_size must be at least 1")
        if self.max_size is not None and self.max_size < self.min_size:
            raise ValueError("max_size must be >= min_size")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")


def _is_complete(g: HetGraph, members) -> bool:
    s = len(members)
    if s < 2:
        return True
    sub = g.adj[members][:, members]
    return sub.nnz == s * (s - 1)


def refine(communities: CommunitySet, config: RefinementConfig,
           g: Optional[HetGraph] = None) -> CommunitySet:
    """Keep in-bounds communities, then greedily pick the largest one whose
    Jaccard overlap with every already chosen community is at most ``beta``.

    Equal sizes are visited in lexicographic order of their member lists.
    """
    if config.exclude_complete and g is None:
        raise ValueError("exclude_complete needs the graph")
    pool = []
    for c in communities:
        if c.size < config.min_size:
            continue
        if config.max_size is not None and c.size > config.max_size:
            continue
        if config.exclude_complete and _is_complete(g, list(c.members)):
            continue
        pool.append(c)
    pool.sort(key=lambda c: (-c.size, c.members))

    chosen, chosen_sets = [], []
    for c in pool:
        s = c.as_set()
        if all(jaccard(s, t) <= config.beta for t in chosen_sets):
            chosen.append(c)
            chosen_sets.append(s)
    stats = dict(communities.stats)
    stats["refined_from"] = len(communities)
    stats["communities"] = len(chosen)
    return CommunitySet(tuple(chosen), stats)
