"""Iterative extraction of communities from node-set seeds.

Each seed set is updated by alternately admitting external nodes that are
significantly well connected to the set and dropping internal nodes that no
longer are, with Benjamini-Hochberg control in each phase and an
exponentially decaying cap on how many nodes may move per iteration. The
loop stops at a fixed point.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .hetgraph import HetGraph, neighborhood
from .significance import SetEvaluator, bh_adjust_log

__all__ = [
    "ExtractionConfig", "ExtractionResult", "Community", "CommunitySet",
    "maximal_allowance", "add_well_connected", "remove_loosely_connected",
    "extract_one", "extract_all", "default_seeds",
]

THREADS_ENV = "ECOHEN_THREADS"
_HISTORY = 64


@dataclass(frozen=True)
class ExtractionConfig:
    """Extraction parameters.

    ``max_iters=None`` means one iteration per node of the graph.
    """
    alpha: float = 0.10
    xi: float = 1.0
    phi: float = 0.99
    max_iters: Optional[int] = None
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must lie in [0, 1], got {self.phi}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    def iteration_cap(self, n: int) -> int:
        return self.max_iters if self.max_iters is not None else max(n, 1)


def maximal_allowance(xi: float, phi: float, i: int, n: int) -> int:
    """Cap on nodes entering (and leaving) the set at iteration ``i >= 1``."""
    if i < 1:
        raise ValueError("iterations are numbered from 1")
    # phi**(i-1) underflows harmlessly to 0 for long runs
    return max(1, math.floor(xi * phi ** (i - 1) * n))


@dataclass
class _PhaseOutcome:
    moved: np.ndarray
    n_candidates: int
    tie_at_cutoff: bool


def _select(nodes: np.ndarray, adj_log: np.ndarray, candidates: np.ndarray,
            mu: int, largest: bool) -> _PhaseOutcome:
    cand_nodes = nodes[candidates]
    cand_vals = adj_log[candidates]
    k = cand_nodes.size
    if k == 0:
        return _PhaseOutcome(cand_nodes, 0, False)
    key = -cand_vals if largest else cand_vals
    # primary key adjusted p-value, ties by ascending node id
    order = np.lexsort((cand_nodes, key))
    if k <= mu:
        return _PhaseOutcome(np.sort(cand_nodes), k, False)
    tie = bool(key[order[mu - 1]] == key[order[mu]])
    return _PhaseOutcome(np.sort(cand_nodes[order[:mu]]), k, tie)


def _add_phase(ev: SetEvaluator, log_alpha: float, mu: int) -> _PhaseOutcome:
    outside = np.flatnonzero(~ev.mask)
    if outside.size == 0:
        return _PhaseOutcome(outside, 0, False)
    adj = bh_adjust_log(ev.log_pvalues(outside))
    return _select(outside, adj, adj <= log_alpha, mu, largest=False)


def _remove_phase(ev: SetEvaluator, log_alpha: float, mu: int) -> _PhaseOutcome:
    inside = ev.members()
    if inside.size == 0:
        return _PhaseOutcome(inside, 0, False)
    adj = bh_adjust_log(ev.log_pvalues(inside))
    return _select(inside, adj, adj > log_alpha, mu, largest=True)


def add_well_connected(g: HetGraph, B: Iterable[int], alpha: float,
                       mu: int) -> frozenset:
    """Return ``B`` plus at most ``mu`` significantly attached external nodes."""
    ev = SetEvaluator(g, B)
    out = _add_phase(ev, math.log(alpha), mu)
    return frozenset(int(v) for v in ev.members()) | frozenset(int(v) for v in out.moved)


def remove_loosely_connected(g: HetGraph, B: Iterable[int], alpha: float,
                             mu: int) -> frozenset:
    """Return ``B`` minus at most ``mu`` members no longer well connected."""
    ev = SetEvaluator(g, B)
    out = _remove_phase(ev, math.log(alpha), mu)
    return frozenset(int(v) for v in ev.members()) - frozenset(int(v) for v in out.moved)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    mu: int
    added: Tuple[int, ...]
    removed: Tuple[int, ...]
    size: int
    add_tie: bool
    remove_tie: bool


@dataclass(frozen=True)
class ExtractionResult:
    community: frozenset
    seed_id: int
    iterations: int
    converged: bool
    terminated_by_cap: bool
    two_cycle: bool = False
    longer_cycle: bool = False
    tie_breaks: int = 0
    member_log_pvalues: Tuple[float, ...] = ()
    trace: Tuple[IterationRecord, ...] = ()


def extract_one(g: HetGraph, seed: Iterable[int], config: ExtractionConfig,
                seed_id: int = -1, trace: bool = False) -> ExtractionResult:
    """Run one extraction from ``seed`` until a fixed point or the cap."""
    ev = SetEvaluator(g, seed)
    log_alpha = math.log(config.alpha)
    cap = config.iteration_cap(g.n)
    history: List[bytes] = [np.packbits(ev.mask).tobytes()]
    records: List[IterationRecord] = []
    two_cycle = longer_cycle = False
    ties = 0
    converged = False
    i = 0
    while i < cap:
        i += 1
        mu = maximal_allowance(config.xi, config.phi, i, g.n)
        added = _add_phase(ev, log_alpha, mu)
        ev.add(added.moved)
        removed = _remove_phase(ev, log_alpha, mu)
        ev.remove(removed.moved)
        ties += added.tie_at_cutoff + removed.tie_at_cutoff
        if trace:
            records.append(IterationRecord(
                i, mu, tuple(int(v) for v in added.moved),
                tuple(int(v) for v in removed.moved), ev.size,
                added.tie_at_cutoff, removed.tie_at_cutoff))
        if ev.size == 0:
            converged = True
            break
        if added.moved.size == 0 and removed.moved.size == 0:
            converged = True
            break
        state = np.packbits(ev.mask).tobytes()
        if state != history[-1]:
            if len(history) >= 2 and state == history[-2]:
                two_cycle = True
            elif state in history[:-2]:
                longer_cycle = True
        history.append(state)
        if len(history) > _HISTORY:
            del history[0]

    members = ev.members()
    log_p = tuple(float(v) for v in ev.log_pvalues(members)) if members.size else ()
    return ExtractionResult(
        community=frozenset(int(v) for v in members),
        seed_id=int(seed_id),
        iterations=i,
        converged=converged,
        terminated_by_cap=not converged,
        two_cycle=two_cycle,
        longer_cycle=longer_cycle,
        tie_breaks=int(ties),
        member_log_pvalues=log_p,
        trace=tuple(records),
    )


@dataclass(frozen=True)
class Community:
    """An extracted node set with the seeds that produced it."""
    members: Tuple[int, ...]
    seed_ids: Tuple[int, ...]
    iterations: Tuple[int, ...]
    converged: bool
    tie_breaks: int = 0
    member_log_pvalues: Tuple[float, ...] = ()
    # tie-break events per seed, aligned with seed_ids
    seed_tie_breaks: Tuple[int, ...] = ()

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def seed_id(self) -> int:
        return self.seed_ids[0]

    def as_set(self) -> frozenset:
        return frozenset(self.members)


def _community_key(c: Community):
    return (-len(c.members), c.members)


@dataclass(frozen=True)
class CommunitySet:
    """Ordered collection of communities: size descending, then members."""
    communities: Tuple[Community, ...] = ()
    stats: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.communities)

    def __iter__(self):
        return iter(self.communities)

    def __getitem__(self, i):
        return self.communities[i]

    def sets(self) -> List[frozenset]:
        return [c.as_set() for c in self.communities]

    @classmethod
    def from_results(cls, results: Sequence[ExtractionResult]) -> "CommunitySet":
        """Drop empty results and merge identical member sets."""
        merged = {}
        stats = {"seeds": len(results), "converged": 0, "terminated_by_cap": 0,
                 "two_cycles": 0, "longer_cycles": 0, "tie_breaks": 0}
        for r in results:
            stats["converged"] += r.converged
            stats["terminated_by_cap"] += r.terminated_by_cap
            stats["two_cycles"] += r.two_cycle
            stats["longer_cycles"] += r.longer_cycle
            stats["tie_breaks"] += r.tie_breaks
            if not r.community:
                continue
            key = tuple(sorted(r.community))
            merged.setdefault(key, []).append(r)
        comms = []
        for key, rs in merged.items():
            rs = sorted(rs, key=lambda r: r.seed_id)
            comms.append(Community(
                members=key,
                seed_ids=tuple(r.seed_id for r in rs),
                iterations=tuple(r.iterations for r in rs),
                converged=all(r.converged for r in rs),
                tie_breaks=sum(r.tie_breaks for r in rs),
                member_log_pvalues=rs[0].member_log_pvalues,
                seed_tie_breaks=tuple(r.tie_breaks for r in rs),
            ))
        comms.sort(key=_community_key)
        stats["communities"] = len(comms)
        return cls(tuple(comms), stats)

    @classmethod
    def from_sets(cls, sets: Iterable[Iterable[int]]) -> "CommunitySet":
        comms = [Community(tuple(sorted(int(v) for v in s)), (i,), (0,), True)
                 for i, s in enumerate(sets)]
        comms = [c for c in comms if c.members]
        comms.sort(key=_community_key)
        return cls(tuple(comms))


def default_seeds(g: HetGraph) -> List[frozenset]:
    """Closed neighborhood of every node, indexed by node id."""
    return [neighborhood(g, u) for u in range(g.n)]


# worker state for the process pool; set once per worker by the initializer
_WORKER = {}


def _init_worker(g: HetGraph, config: ExtractionConfig) -> None:
    _WORKER["g"] = g
    _WORKER["config"] = config


def _run_chunk(chunk):
    g, config = _WORKER["g"], _WORKER["config"]
    return [extract_one(g, seed, config, seed_id=sid) for sid, seed in chunk]


def _resolve_threads(threads: Optional[int]) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def extract_all(g: HetGraph, config: ExtractionConfig = ExtractionConfig(),
                seeds: Optional[Sequence[Iterable[int]]] = None,
                threads: Optional[int] = None) -> CommunitySet:
    """Extract from every seed (default: every closed neighborhood).

    Seeds run in ``threads`` worker processes sharing one copy of the graph
    each; the returned collection is identical for any worker count.
    """
    if seeds is None:
        seeds = default_seeds(g) if g.n_edges else []
    seeds = [frozenset(int(v) for v in s) for s in seeds]
    # identical seeds give identical trajectories; run each distinct one once
    first = {}
    for sid, s in enumerate(seeds):
        if s:
            first.setdefault(s, sid)
    jobs = sorted((sid, s) for s, sid in first.items())
    workers = _resolve_threads(threads if threads is not None else
                               (config.threads if config.threads > 1 else None))

    if workers <= 1 or len(jobs) < 2:
        unique = [extract_one(g, s, config, seed_id=sid) for sid, s in jobs]
    else:
        size = max(1, math.ceil(len(jobs) / (workers * 4)))
        chunks = [jobs[i:i + size] for i in range(0, len(jobs), size)]
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(g, config)) as pool:
            unique = [r for part in pool.map(_run_chunk, chunks) for r in part]

    by_seed = {first[s]: r for (_, s), r in zip(jobs, unique)}
    results = []
    for sid, s in enumerate(seeds):
        if not s:
            continue
        r = by_seed[first[s]]
        if sid != r.seed_id:
            r = replace(r, seed_id=sid)
        results.append(r)
    return CommunitySet.from_results(results)
