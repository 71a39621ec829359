"""Heterogeneous stochastic block model generators.

A ``K x C`` matrix ``N`` fixes how many type-``k`` nodes sit in block ``c``.
Two nodes of types ``k`` and ``l`` connect independently with probability
``P[k, l]``, raised to ``P[k, l] + R[k, l]`` when they share a block. The
two-block family has a background block and one high connectivity block
(HCB) holding a fraction ``p`` of each type.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .hetgraph import HetGraph, build_graph

__all__ = ["HsbmSpec", "TwoBlockSpec", "generate_hsbm", "two_block",
           "heterogeneous_er"]


@dataclass(frozen=True)
class HsbmSpec:
    sizes: np.ndarray  # (K, C) block sizes n_kc
    P: np.ndarray  # (K, K) between-block rates
    R: np.ndarray  # (K, K) within-block boosts
    seed: Optional[int] = None
    # block whose members get no boost among themselves (None: every block boosted)
    background: Optional[int] = None

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        P = np.asarray(self.P, dtype=np.float64)
        R = np.asarray(self.R, dtype=np.float64)
        if sizes.ndim != 2:
            raise ValueError("sizes must be a K x C matrix")
        K = sizes.shape[0]
        if P.shape != (K, K) or R.shape != (K, K):
            raise ValueError(f"P and R must be {K} x {K}")
        if (sizes < 0).any():
            raise ValueError("block sizes must be non-negative")
        if not (np.allclose(P, P.T) and np.allclose(R, R.T)):
            raise ValueError("P and R must be symmetric")
        if (P < 0).any() or (R < 0).any() or (P + R > 1 + 1e-12).any():
            raise ValueError("rates must satisfy 0 <= P, R and P + R <= 1")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class TwoBlockSpec:
    """Background block plus one HCB holding a fraction ``p`` of each type."""
    p: float
    b: float
    r11: float = 0.0
    r22: float = 0.0
    r12: float = 0.0
    per_type: int = 500
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.per_type < 0:
            raise ValueError("per_type must be non-negative")

    def to_hsbm(self) -> HsbmSpec:
        hcb = math.floor(self.per_type * self.p + 1e-9)
        sizes = np.array([[self.per_type - hcb, hcb],
                          [self.per_type - hcb, hcb]])
        P = np.full((2, 2), self.b)
        R = np.array([[self.r11, self.r12], [self.r12, self.r22]])
        return HsbmSpec(sizes, P, R, self.seed, background=0)


def _sample_pairs(rng: np.random.Generator, n_pairs: int, rate: float) -> np.ndarray:
    """Indices of successes among ``n_pairs`` independent Bernoulli trials."""
    if rate <= 0.0 or n_pairs == 0:
        return np.zeros(0, dtype=np.int64)
    if rate >= 1.0:
        return np.arange(n_pairs, dtype=np.int64)
    # binomial count then a uniform subset has the same law as per-pair draws
    count = rng.binomial(n_pairs, rate)
    return np.sort(rng.choice(n_pairs, size=count, replace=False))


def _triangle_pairs(idx: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Map linear indices over unordered pairs ``i < j`` of ``nodes``."""
    # row i holds pairs (i, i+1..s-1); offset(i) = i*s - i*(i+1)/2
    s = nodes.size
    i = np.floor((2 * s - 1 - np.sqrt((2 * s - 1) ** 2 - 8.0 * idx)) / 2).astype(np.int64)
    offset = i * s - i * (i + 1) // 2
    # guard against floating error at row boundaries
    low = idx < offset
    i[low] -= 1
    offset = i * s - i * (i + 1) // 2
    high = idx >= offset + (s - 1 - i)
    i[high] += 1
    offset = i * s - i * (i + 1) // 2
    j = idx - offset + i + 1
    return np.column_stack([nodes[i], nodes[j]])


def generate_hsbm(spec: HsbmSpec) -> Tuple[HetGraph, np.ndarray]:
    """Sample a simple graph and its block labels.

    Nodes are laid out by (type, block) cell and then relabelled by a
    seeded random permutation so node ids carry no block information.
    Returns the graph and an array with each node's block index.
    """
    rng = np.random.default_rng(spec.seed)
    K, C = spec.sizes.shape
    cell_type = np.repeat(np.arange(K), C)
    cell_block = np.tile(np.arange(C), K)
    counts = spec.sizes.reshape(-1)
    n = int(counts.sum())
    perm = rng.permutation(n)
    starts = np.concatenate([[0], np.cumsum(counts)])
    cells = [perm[starts[i]:starts[i + 1]] for i in range(K * C)]

    types = np.empty(n, dtype=np.int64)
    blocks = np.empty(n, dtype=np.int64)
    for i, nodes in enumerate(cells):
        types[nodes] = cell_type[i]
        blocks[nodes] = cell_block[i]

    parts = []
    for a in range(K * C):
        for b in range(a, K * C):
            k, l = cell_type[a], cell_type[b]
            shared = cell_block[a] == cell_block[b] != spec.background
            rate = spec.P[k, l] + (spec.R[k, l] if shared else 0.0)
            na, nb = cells[a], cells[b]
            if a == b:
                idx = _sample_pairs(rng, na.size * (na.size - 1) // 2, rate)
                if idx.size:
                    parts.append(_triangle_pairs(idx, na))
            else:
                idx = _sample_pairs(rng, na.size * nb.size, rate)
                if idx.size:
                    parts.append(np.column_stack([na[idx // nb.size], nb[idx % nb.size]]))
    edges = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)
    return build_graph(types, edges, n_types=K), blocks


def two_block(spec: TwoBlockSpec) -> Tuple[HetGraph, frozenset]:
    """Sample the two-block design; returns the graph and the planted HCB."""
    g, blocks = generate_hsbm(spec.to_hsbm())
    return g, frozenset(int(v) for v in np.flatnonzero(blocks == 1))


def heterogeneous_er(b: float, per_type: int = 500, n_types: int = 2,
                     seed: Optional[int] = None) -> HetGraph:
    """Typed graph where every pair connects with probability ``b``."""
    sizes = np.full((n_types, 1), per_type)
    P = np.full((n_types, n_types), b)
    g, _ = generate_hsbm(HsbmSpec(sizes, P, np.zeros_like(P), seed))
    return g
