"""Random multigraphs that keep every node's typed degree sequence.

Sampling works bucket by bucket. For a same-type bucket the two endpoint
columns are concatenated into one stub vector, shuffled, and re-paired two
by two. For a between-type bucket only the type-``l`` column is shuffled,
so each type-``k`` stub is matched to a uniformly random type-``l`` stub.
Self-loops and multi-edges are allowed in the output.
"""
from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from .hetgraph import HetGraph, build_graph

__all__ = ["HdcmSampler", "sample_hdcm", "sample_many"]


class HdcmSampler:
    """Seeded sampler over one source graph.

    Draws are reproducible: the i-th call to :meth:`sample` on a sampler
    built with a given seed always returns the same graph. Use
    :meth:`spawn` for independent child samplers (e.g. one per worker).
    """

    def __init__(self, source: HetGraph, seed=None):
        self.source = source
        self._ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self.rng_seed = self._ss.entropy
        self._rng = np.random.default_rng(self._ss)
        g = source
        tu = g.types[g.edges[:, 0]]
        tv = g.types[g.edges[:, 1]]
        # orient every edge so column 0 holds the smaller type
        e = g.edges.copy()
        flip = tu > tv
        e[flip] = e[flip][:, ::-1]
        lo, hi = np.minimum(tu, tv), np.maximum(tu, tv)
        self._buckets = []
        for k in range(g.n_types):
            for l in range(k, g.n_types):
                sel = (lo == k) & (hi == l)
                if sel.any():
                    self._buckets.append((k == l, e[sel]))

    def spawn(self, count: int) -> list:
        return [HdcmSampler(self.source, s) for s in self._ss.spawn(count)]

    def sample_edges(self) -> np.ndarray:
        parts = []
        for same, e in self._buckets:
            if same:
                stubs = self._rng.permutation(e.reshape(-1))
                parts.append(stubs.reshape(-1, 2))
            else:
                parts.append(np.column_stack([e[:, 0], self._rng.permutation(e[:, 1])]))
        if not parts:
            return np.zeros((0, 2), dtype=np.int64)
        return np.concatenate(parts)

    def sample(self) -> HetGraph:
        return build_graph(self.source.types, self.sample_edges(), self.source.n_types)

    def sample_many(self, count: int) -> Iterator[HetGraph]:
        if count < 1:
            raise ValueError("count must be at least 1")
        for _ in range(count):
            yield self.sample()


def sample_hdcm(source: HetGraph, seed: Optional[int] = None) -> HetGraph:
    """One HDCM draw; an edgeless source gives an edgeless copy."""
    return HdcmSampler(source, seed).sample()


def sample_many(source: HetGraph, count: int, seed: Optional[int] = None) -> Iterator[HetGraph]:
    return HdcmSampler(source, seed).sample_many(count)
