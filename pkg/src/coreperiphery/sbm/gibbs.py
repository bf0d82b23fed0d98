"""Gibbs sampling for the core-periphery block models.

Each Gibbs iteration runs a batch of Metropolis-Hastings label switches with
the densities held fixed, then redraws the densities one at a time from
their truncated-beta conditionals. Block statistics are updated
incrementally by the compiled kernel.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..graph import Graph
from . import _kernels
from .model import (
    BlockStats,
    ModelKind,
    block_stats,
    capacities,
    density_counts,
    expand_densities,
    log_likelihood,
    log_prior_p,
    log_prior_theta,
)
from .truncbeta import sample_truncated_beta

__all__ = [
    "ChainResult",
    "ChainState",
    "coreness",
    "init_state",
    "mh_label_step",
    "run_gibbs",
    "sample_densities",
]

log = logging.getLogger(__name__)

PROPOSALS = ("uniform", "neighborhood")


def sample_densities(stats: BlockStats, p_current, kind: ModelKind, rng: np.random.Generator) -> np.ndarray:
    """One sequential Gibbs sweep over the densities, innermost first.

    Density ``s`` is bounded above by the freshly drawn ``s - 1`` and below by
    the current ``s + 1``.
    """
    alpha, beta = density_counts(stats, kind)
    p = np.array(p_current, dtype=float)
    k = p.size
    for s in range(k):
        hi = p[s - 1] if s > 0 else 1.0
        lo = p[s + 1] if s + 1 < k else 0.0
        p[s] = sample_truncated_beta(alpha[s], beta[s], lo, hi, rng)
    return p


def _initial_densities(stats: BlockStats, kind: ModelKind, rng) -> np.ndarray:
    alpha, beta = density_counts(stats, kind)
    guess = np.sort((alpha + 1.0) / (alpha + beta + 2.0))[::-1]
    if not np.all(np.diff(guess) < 0):
        from ..mdl import sample_prior_densities

        guess = sample_prior_densities(kind.n_densities, rng)
    return sample_densities(stats, guess, kind, rng)


@dataclass
class ChainState:
    """Mutable sampler state; only ever advanced by one thread."""

    graph: Graph
    kind: ModelKind
    theta: np.ndarray
    sizes: np.ndarray
    edges: np.ndarray
    dsum: np.ndarray
    p: np.ndarray
    rng: np.random.Generator
    t: int = 0
    tau: int = 0
    counters: np.ndarray = field(default_factory=lambda: np.zeros(5, dtype=np.int64))

    @classmethod
    def from_partition(cls, g: Graph, kind: ModelKind, theta, p, rng) -> "ChainState":
        theta = np.array(theta, dtype=np.int64)
        stats = block_stats(g, theta, kind.n_blocks)
        dsum = np.bincount(theta, weights=g.degrees, minlength=kind.n_blocks).astype(np.int64)
        return cls(g, kind, theta, stats.sizes.copy(), stats.edges.copy(), dsum,
                   np.array(p, dtype=float), rng)

    def stats(self) -> BlockStats:
        return BlockStats(self.sizes.copy(), self.edges.copy(), capacities(self.sizes))

    def log_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        full = expand_densities(self.p, self.kind)
        return np.log(full), np.log1p(-full)

    def log_posterior(self) -> float:
        """log P(A | theta, p) + log P(theta) + log P(p), up to a constant in neither."""
        stats = self.stats()
        return (
            log_likelihood(stats, self.p, self.kind)
            + log_prior_theta(stats.sizes)
            + log_prior_p(self.p, self.kind)
        )

    def label_steps(self, n_steps: int, proposal: str = "uniform", eps: float = 0.1) -> None:
        logp, log1mp = self.log_matrices()
        seed = int(self.rng.integers(0, 2**32 - 1))
        _kernels.label_steps(
            self.graph.indptr, self.graph.indices, self.theta, self.sizes, self.edges,
            self.dsum, logp, log1mp, int(n_steps), proposal == "neighborhood", float(eps),
            seed, self.counters,
        )
        self.tau += int(n_steps)

    def is_consistent(self) -> bool:
        fresh = block_stats(self.graph, self.theta, self.kind.n_blocks)
        dsum = np.bincount(self.theta, weights=self.graph.degrees, minlength=self.kind.n_blocks)
        return (
            np.array_equal(fresh.sizes, self.sizes)
            and np.array_equal(fresh.edges, self.edges)
            and np.array_equal(dsum.astype(np.int64), self.dsum)
        )


def init_state(g: Graph, kind: ModelKind, rng: np.random.Generator) -> ChainState:
    """Random partition with no empty block, relabeled by decreasing internal density."""
    n_blocks = kind.n_blocks
    if g.n_nodes < n_blocks:
        raise ValueError(f"graph has {g.n_nodes} nodes, fewer than the {n_blocks} blocks")
    while True:
        theta = rng.integers(0, n_blocks, size=g.n_nodes)
        if np.bincount(theta, minlength=n_blocks).min() > 0:
            break
    stats = block_stats(g, theta, n_blocks)
    diag = np.diag(stats.edges).astype(float)
    cap = np.diag(stats.capacity).astype(float)
    density = np.divide(diag, cap, out=np.zeros_like(diag), where=cap > 0)
    order = np.argsort(-density, kind="stable")  # order[new] = old
    relabel = np.empty(n_blocks, dtype=np.int64)
    relabel[order] = np.arange(n_blocks)
    theta = relabel[theta]
    stats = block_stats(g, theta, n_blocks)
    p0 = _initial_densities(stats, kind, rng)
    return ChainState.from_partition(g, kind, theta, p0, rng)


def mh_label_step(state: ChainState, proposal: str = "uniform", eps: float = 0.1) -> ChainState:
    """A single label-switching proposal (random node, random target block)."""
    state.label_steps(1, proposal=proposal, eps=eps)
    return state


def log_acceptance(state: ChainState, node: int, block: int, proposal: str = "uniform",
                   eps: float = 0.1) -> float:
    """Log Metropolis-Hastings ratio of moving ``node`` to ``block``."""
    logp, log1mp = state.log_matrices()
    scratch = np.zeros(state.kind.n_blocks, dtype=np.int64)
    return float(_kernels.log_acceptance(
        state.graph.indptr, state.graph.indices, state.theta, state.sizes, state.edges,
        state.dsum, logp, log1mp, scratch, int(node), int(block),
        proposal == "neighborhood", float(eps),
    ))


def coreness(marginals, n_blocks: Optional[int] = None) -> np.ndarray:
    """1 - (1/L) sum_r r P(theta_i = r), blocks numbered from 1 at the core.

    Ranges over ``[0, 1 - 1/L]``.
    """
    marg = np.asarray(marginals, dtype=float)
    n_blocks = marg.shape[1] if n_blocks is None else n_blocks
    r = np.arange(1, n_blocks + 1)
    return 1.0 - (marg @ r) / n_blocks


@dataclass
class ChainResult:
    kind: ModelKind
    samples: np.ndarray  # retained theta samples, (n_retained, N)
    marginals: np.ndarray
    map_partition: np.ndarray
    coreness: np.ndarray
    p_final: np.ndarray
    acceptance_rate: float
    log_posterior_trace: np.ndarray
    counters: np.ndarray
    n_gibbs: int
    n_mcmc: int
    seed: Optional[int] = None

    @property
    def n_retained(self) -> int:
        return int(self.samples.shape[0])


def run_gibbs(
    g: Graph,
    kind: ModelKind,
    n_gibbs: int,
    n_mcmc: int,
    proposal: str = "uniform",
    rng=None,
    eps: float = 0.1,
    keep_samples: bool = True,
    warmup: Optional[int] = None,
) -> ChainResult:
    """Gibbs sampler over (theta, p); the second half of the chain is retained.

    ``n_mcmc`` label-switching proposals are made per Gibbs iteration. The
    first ``warmup`` iterations (default ``min(20, n_gibbs // 4)``) use only
    ``n_mcmc // 20`` proposals so the densities can separate before labels
    settle; these iterations always fall inside the burn-in. The MAP
    partition is the per-node argmax of the retained marginals (lowest block
    on ties).
    """
    if n_gibbs < 2:
        raise ValueError("n_gibbs must be at least 2")
    if n_mcmc < 1:
        raise ValueError("n_mcmc must be at least 1")
    if proposal not in PROPOSALS:
        raise ValueError(f"proposal must be one of {PROPOSALS}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)

    state = init_state(g, kind, rng)
    burn_in = n_gibbs // 2
    warmup = min(20, n_gibbs // 4) if warmup is None else min(int(warmup), burn_in)
    short = max(1, n_mcmc // 20)
    n_keep = n_gibbs - burn_in
    counts = np.zeros((g.n_nodes, kind.n_blocks), dtype=np.int64)
    dtype = np.int8 if kind.n_blocks < 128 else np.int32
    samples = np.empty((n_keep if keep_samples else 0, g.n_nodes), dtype=dtype)
    trace = np.empty(n_gibbs)
    for t in range(n_gibbs):
        state.label_steps(short if t < warmup else n_mcmc, proposal=proposal, eps=eps)
        state.p = sample_densities(state.stats(), state.p, kind, rng)
        state.t = t + 1
        trace[t] = state.log_posterior()
        if t >= burn_in:
            _kernels.count_occupancy(counts, state.theta)
            if keep_samples:
                samples[t - burn_in] = state.theta

    marginals = counts / n_keep
    map_partition = np.argmax(marginals, axis=1)
    c = state.counters
    moves = c[_kernels.PROPOSED] - c[_kernels.NOOP]
    acc = c[_kernels.ACCEPTED] / moves if moves else 0.0
    log.debug("gibbs %s: acceptance %.3f, final log posterior %.1f", kind, acc, trace[-1])
    return ChainResult(
        kind=kind,
        samples=samples,
        marginals=marginals,
        map_partition=map_partition,
        coreness=coreness(marginals, kind.n_blocks),
        p_final=state.p.copy(),
        acceptance_rate=float(acc),
        log_posterior_trace=trace,
        counters=c.copy(),
        n_gibbs=n_gibbs,
        n_mcmc=n_mcmc,
        seed=seed,
    )
