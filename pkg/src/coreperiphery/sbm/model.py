"""Constrained core-periphery block models: block statistics, likelihood, priors.

Blocks are 0-based here, block 0 being the core / innermost layer. Two
model families are supported:

* hub-and-spoke: two blocks, densities ``(p11, p12, p22)`` with
  ``1 > p11 > p12 > p22 > 0``;
* layered: ``L`` blocks, densities ``(p_1, ..., p_L)`` strictly decreasing,
  and the pair density of blocks ``r, s`` is the density of the outer one.

Both priors on the densities are uniform on their ordered region, which
has volume ``1/K!`` for ``K`` densities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from ..graph import Graph

__all__ = [
    "BlockStats",
    "ModelKind",
    "block_stats",
    "check_densities",
    "density_counts",
    "expand_densities",
    "log_likelihood",
    "log_prior_p",
    "log_prior_theta",
]

HUB_SPOKE = "hub-spoke"
LAYERED = "layered"


@dataclass(frozen=True)
class ModelKind:
    name: str
    n_blocks: int

    def __post_init__(self):
        if self.name == HUB_SPOKE:
            if self.n_blocks != 2:
                raise ValueError("hub-and-spoke model has exactly 2 blocks")
        elif self.name == LAYERED:
            if self.n_blocks < 2:
                raise ValueError("layers must be ≥ 2")
        else:
            raise ValueError(f"unknown model {self.name!r}")

    @classmethod
    def hub_and_spoke(cls) -> "ModelKind":
        return cls(HUB_SPOKE, 2)

    @classmethod
    def layered(cls, n_layers: int) -> "ModelKind":
        return cls(LAYERED, int(n_layers))

    @classmethod
    def parse(cls, name: str, n_layers: int | None = None) -> "ModelKind":
        if name in (HUB_SPOKE, "hub-and-spoke", "hub_spoke", "H"):
            return cls.hub_and_spoke()
        if name in (LAYERED, "L"):
            if n_layers is None:
                raise ValueError("layered model needs a layer count")
            return cls.layered(n_layers)
        raise ValueError(f"unknown model {name!r}")

    @property
    def is_layered(self) -> bool:
        return self.name == LAYERED

    @property
    def n_densities(self) -> int:
        return self.n_blocks if self.is_layered else 3

    def __str__(self) -> str:
        return f"layered({self.n_blocks})" if self.is_layered else HUB_SPOKE


@dataclass(frozen=True)
class BlockStats:
    """Sufficient statistics of a partition.

    ``edges[r, s]`` counts edges between blocks ``r`` and ``s`` (internal
    edges on the diagonal, counted once); ``capacity`` holds the number of
    node pairs, ``n_r n_s`` off the diagonal and ``n_r (n_r - 1) / 2`` on it.
    """

    sizes: np.ndarray
    edges: np.ndarray
    capacity: np.ndarray

    @property
    def n_blocks(self) -> int:
        return int(self.sizes.size)

    @property
    def n_nodes(self) -> int:
        return int(self.sizes.sum())

    @property
    def layer_alpha(self) -> np.ndarray:
        """Edges whose outer endpoint block is ``s``: sum over ``r <= s`` of ``m_rs``."""
        return np.triu(self.edges).sum(axis=0)

    @property
    def layer_beta(self) -> np.ndarray:
        return np.triu(self.capacity - self.edges).sum(axis=0)


def capacities(sizes: np.ndarray) -> np.ndarray:
    n = np.asarray(sizes, dtype=np.int64)
    cap = np.outer(n, n)
    np.fill_diagonal(cap, n * (n - 1) // 2)
    return cap


def block_stats(g: Graph, theta, n_blocks: int) -> BlockStats:
    theta = np.asarray(theta, dtype=np.int64)
    if theta.shape != (g.n_nodes,):
        raise ValueError("theta must assign every node")
    if theta.size and (theta.min() < 0 or theta.max() >= n_blocks):
        raise ValueError("block label out of range")
    sizes = np.bincount(theta, minlength=n_blocks)
    if np.any(sizes == 0):
        raise ValueError(f"empty block(s) {np.flatnonzero(sizes == 0).tolist()}: outside prior support")
    a = theta[g.edges[:, 0]]
    b = theta[g.edges[:, 1]]
    m = np.zeros((n_blocks, n_blocks), dtype=np.int64)
    np.add.at(m, (np.minimum(a, b), np.maximum(a, b)), 1)
    m = m + np.triu(m, 1).T
    return BlockStats(sizes, m, capacities(sizes))


def density_counts(stats: BlockStats, kind: ModelKind) -> tuple[np.ndarray, np.ndarray]:
    """Edge / non-edge counts attached to each free density, in density order."""
    if kind.is_layered:
        return stats.layer_alpha, stats.layer_beta
    m, cap = stats.edges, stats.capacity
    alpha = np.array([m[0, 0], m[0, 1], m[1, 1]], dtype=np.int64)
    beta = np.array([cap[0, 0], cap[0, 1], cap[1, 1]], dtype=np.int64) - alpha
    return alpha, beta


def expand_densities(p, kind: ModelKind) -> np.ndarray:
    """Full block-pair density matrix from the free densities."""
    p = np.asarray(p, dtype=float)
    if kind.is_layered:
        idx = np.arange(kind.n_blocks)
        return p[np.maximum.outer(idx, idx)]
    return np.array([[p[0], p[1]], [p[1], p[2]]])


def check_densities(p, kind: ModelKind) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (kind.n_densities,):
        raise ValueError(f"{kind} expects {kind.n_densities} densities, got shape {p.shape}")
    if not (p[0] < 1.0 and p[-1] > 0.0 and np.all(np.diff(p) < 0)):
        raise ValueError(f"densities {p.tolist()} violate the ordering constraint of {kind}")
    return p


def log_likelihood(stats: BlockStats, p, kind: ModelKind) -> float:
    """Bernoulli log-likelihood of the graph given the partition and densities (nats)."""
    p = np.asarray(p, dtype=float)
    alpha, beta = density_counts(stats, kind)
    return float(np.sum(xlogy(alpha, p) + xlog1py(beta, -p)))


def log_prior_theta(sizes, n_nodes: int | None = None, n_blocks: int | None = None) -> float:
    """log P(theta): uniform layer count, uniform composition, uniform labelling."""
    n = np.asarray(sizes, dtype=np.int64)
    N = int(n.sum()) if n_nodes is None else int(n_nodes)
    L = int(n.size) if n_blocks is None else int(n_blocks)
    if n.size != L or int(n.sum()) != N:
        raise ValueError("block sizes inconsistent with N and block count")
    if np.any(n <= 0):
        raise ValueError("empty block: outside prior support")
    log_binom = gammaln(N) - gammaln(L) - gammaln(N - L + 1)
    return float(gammaln(n + 1).sum() - gammaln(N + 1) - log_binom - math.log(N))


def log_prior_p(p, kind: ModelKind) -> float:
    check_densities(p, kind)
    return math.lgamma(kind.n_densities + 1)
