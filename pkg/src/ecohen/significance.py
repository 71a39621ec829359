"""Connectivity p-values between a node and a node set under the
heterogeneous configuration null, plus Benjamini-Hochberg adjustment.

For a node ``u`` of type ``l`` and a set ``B``, the number of type-``k``
neighbors of ``u`` inside ``B`` is compared with a Binomial(c, p) reference
where ``c = d^[k](u)`` and::

    p = (sum_{w in B, type k} d^[l](w) - [k == l][u in B] c)
        / (2^[k == l] |E^[kl]| - [k == l] c)

The p-value is the product over types of the upper binomial tails. Because
both the numerator correction and the observed count ignore ``u``'s own
self-loops, the value does not depend on whether ``u`` belongs to ``B``.
"""
from __future__ import annotations

import math
from collections.abc import Collection
from typing import NamedTuple

import numpy as np
from scipy.special import betainc, gammaln, logsumexp

from .hetgraph import GraphError, HetGraph, _check_node

__all__ = [
    "ConnectionCounts", "connection_counts", "success_probs",
    "node_set_pvalue", "node_set_log_pvalue", "binom_log_sf",
    "bh_adjust", "bh_adjust_log", "SetEvaluator",
]

# binomial tails below this are recomputed by log-space summation
_UNDERFLOW = 1e-280


class ConnectionCounts(NamedTuple):
    x: np.ndarray  # observed type-k neighbors of u inside B
    c: np.ndarray  # trials: d^[k](u)


def _as_mask(g: HetGraph, B) -> np.ndarray:
    if isinstance(B, np.ndarray) and B.dtype == bool:
        if B.shape != (g.n,):
            raise GraphError("mask length does not match node count")
        return B
    mask = np.zeros(g.n, dtype=bool)
    idx = np.fromiter((int(b) for b in B), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= g.n):
        bad = idx[(idx < 0) | (idx >= g.n)][0]
        raise GraphError(f"unknown node {bad} in node set")
    mask[idx] = True
    return mask


def connection_counts(g: HetGraph, u: int, B: Collection[int]) -> ConnectionCounts:
    """Edges from ``u`` into ``B`` per neighbor type, with multiplicity.

    ``u``'s own self-loops are never counted, whether or not ``u`` is in ``B``.
    """
    _check_node(g, u)
    mask = _as_mask(g, B)
    lo, hi = g.adj.indptr[u], g.adj.indptr[u + 1]
    nbrs = g.adj.indices[lo:hi]
    mult = g.adj.data[lo:hi]
    inside = mask[nbrs]
    x = np.bincount(g.types[nbrs[inside]], weights=mult[inside],
                    minlength=g.n_types).astype(np.int64)
    return ConnectionCounts(x, g.degrees[u].copy())


def success_probs(g: HetGraph, u: int, B: Collection[int]) -> np.ndarray:
    """Per-type Bernoulli success probabilities for ``u`` against ``B``.

    Entries with zero trials (or an empty reference bucket) are 0.
    """
    _check_node(g, u)
    mask = _as_mask(g, B)
    l = g.types[u]
    c = g.degrees[u]
    members = np.flatnonzero(mask)
    num = np.bincount(g.types[members], weights=g.degrees[members, l],
                      minlength=g.n_types)
    den = g.bucket_sizes[:, l].astype(np.float64).copy()
    den[l] *= 2
    if mask[u]:
        num[l] -= c[l]
    den[l] -= c[l]
    assert np.all(num >= 0) and np.all(den >= 0), "invalid degree bookkeeping"
    p = np.zeros(g.n_types)
    ok = (c > 0) & (den > 0)
    p[ok] = num[ok] / den[ok]
    return np.clip(p, 0.0, 1.0)


def _log_sf_sum(x, c, p):
    """log P(Binom(c, p) >= x) by log-space summation of the pmf."""
    if p <= 0.0:
        return 0.0 if x <= 0 else -math.inf
    if p >= 1.0:
        return 0.0
    j = np.arange(x, c + 1)
    logpmf = (gammaln(c + 1) - gammaln(j + 1) - gammaln(c - j + 1)
              + j * math.log(p) + (c - j) * math.log1p(-p))
    return float(min(logsumexp(logpmf), 0.0))


def binom_log_sf(x, c, p):
    """Elementwise ``log P(Binom(c, p) >= x)``.

    Uses the regularized incomplete beta identity
    ``P(Y >= x) = I_p(x, c - x + 1)`` and falls back to direct log-space
    summation where the tail underflows.
    """
    x = np.asarray(x, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    p = np.asarray(p, dtype=np.float64)
    x, c, p = np.broadcast_arrays(x, c, p)
    out = np.zeros(x.shape, dtype=np.float64)
    pos = x > 0
    if not pos.any():
        return out
    xs, cs, ps = x[pos], c[pos], p[pos]
    with np.errstate(divide="ignore"):
        tail = betainc(xs.astype(np.float64), (cs - xs + 1).astype(np.float64), ps)
        vals = np.log(tail)
    redo = np.flatnonzero(tail < _UNDERFLOW)
    for i in redo:
        vals[i] = _log_sf_sum(int(xs[i]), int(cs[i]), float(ps[i]))
    out[pos] = vals
    return out


def node_set_log_pvalue(g: HetGraph, u: int, B: Collection[int]) -> float:
    counts = connection_counts(g, u, B)
    p = success_probs(g, u, B)
    return float(binom_log_sf(counts.x, counts.c, p).sum())


def node_set_pvalue(g: HetGraph, u: int, B: Collection[int]) -> float:
    """Approximate p-value that ``u`` is well connected to ``B``.

    >>> from ecohen.hetgraph import build_graph
    >>> g = build_graph([0, 0, 1, 1], [(0, 1), (0, 2), (1, 2), (2, 3)])
    >>> node_set_pvalue(g, 0, {1, 2})
    1.0
    """
    return math.exp(node_set_log_pvalue(g, u, B))


def _check_pvalues(p: np.ndarray) -> None:
    if np.any(~((p >= 0.0) & (p <= 1.0))):
        raise ValueError("p-values must lie in [0, 1]")


def bh_adjust(pvalues) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(pvalues, dtype=np.float64).reshape(-1)
    _check_pvalues(p)
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def bh_adjust_log(log_p: np.ndarray) -> np.ndarray:
    """:func:`bh_adjust` on natural-log p-values; returns log adjusted values.

    Works where the raw values underflow double precision.
    """
    lp = np.asarray(log_p, dtype=np.float64).reshape(-1)
    m = lp.size
    if m == 0:
        return lp.copy()
    order = np.argsort(lp, kind="stable")
    ranked = lp[order] + math.log(m) - np.log(np.arange(1, m + 1))
    adj = np.minimum.accumulate(ranked[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj, 0.0)
    return out


class SetEvaluator:
    """Incrementally maintained statistics of one candidate set.

    Holds the membership mask, the per-node counts of neighbors inside the
    set by type, and the per-type stub totals of the set, so that p-values of
    many nodes can be evaluated in one vectorized pass and updated cheaply
    when a few nodes enter or leave.
    """

    def __init__(self, g: HetGraph, members=()):
        self.g = g
        self.mask = np.zeros(g.n, dtype=bool)
        # inside[u, k]: edges from u to type-k members (self-loops excluded)
        self.inside = np.zeros((g.n, g.n_types), dtype=np.float64)
        # stubs[k, l]: sum over type-k members w of d^[l](w)
        self.stubs = np.zeros((g.n_types, g.n_types), dtype=np.float64)
        den = g.bucket_sizes.astype(np.float64).copy()
        den[np.diag_indices(g.n_types)] *= 2
        self._den = den
        members = np.asarray(sorted(set(int(m) for m in members)), dtype=np.int64)
        if members.size:
            self.add(members)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def _apply(self, nodes: np.ndarray, sign: float) -> None:
        if nodes.size == 0:
            return
        g = self.g
        rows = g.adj[nodes]
        self.inside += sign * (rows.T @ g.type_onehot[nodes])
        np.add.at(self.stubs, g.types[nodes], sign * g.degrees[nodes])

    def add(self, nodes) -> None:
        nodes = np.asarray(nodes, dtype=np.int64)
        nodes = nodes[~self.mask[nodes]]
        self.mask[nodes] = True
        self._apply(nodes, 1.0)

    def remove(self, nodes) -> None:
        nodes = np.asarray(nodes, dtype=np.int64)
        nodes = nodes[self.mask[nodes]]
        self.mask[nodes] = False
        self._apply(nodes, -1.0)

    def log_pvalues(self, nodes: np.ndarray) -> np.ndarray:
        """Log p-values of ``nodes`` against the current set."""
        g = self.g
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.size == 0:
            return np.zeros(0)
        x = np.rint(self.inside[nodes]).astype(np.int64)
        c = g.degrees[nodes]
        l = g.types[nodes]
        num = self.stubs[:, l].T.copy()  # (len, K)
        den = self._den[:, l].T.copy()
        rows = np.arange(nodes.size)
        own = c[rows, l].astype(np.float64)
        num[rows, l] -= np.where(self.mask[nodes], own, 0.0)
        den[rows, l] -= own
        active = x > 0
        p = np.zeros(x.shape)
        ok = active & (den > 0)
        p[ok] = num[ok] / den[ok]
        np.clip(p, 0.0, 1.0, out=p)
        lsf = np.zeros(x.shape)
        if active.any():
            lsf[active] = binom_log_sf(x[active], c[active], p[active])
        return lsf.sum(axis=1)
