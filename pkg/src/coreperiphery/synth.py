"""Planted-partition generators and the two synthetic validation experiments."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .graph import Graph
from .sbm.model import ModelKind

__all__ = [
    "DiscernmentConfig",
    "LayersConfig",
    "PlantedConfig",
    "discernment_matrix",
    "expected_mean_degree",
    "geometric_densities",
    "layered_matrix",
    "merged_layer_density",
    "merged_layer_densities",
    "run_discernment_experiment",
    "run_layers_experiment",
    "sbm_generate",
    "unrank_pairs",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlantedConfig:
    sizes: tuple
    matrix: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(x) for x in self.sizes)
        mat = np.asarray(self.matrix, dtype=float)
        if any(x < 0 for x in sizes):
            raise ValueError("block sizes must be non-negative")
        if mat.shape != (len(sizes), len(sizes)):
            raise ValueError("matrix shape must match the number of blocks")
        if not np.allclose(mat, mat.T, rtol=0, atol=0):
            raise ValueError("block matrix must be symmetric")
        if mat.min() < 0 or mat.max() > 1:
            raise ValueError("block matrix entries must lie in [0, 1]")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "matrix", mat)

    @property
    def n_nodes(self) -> int:
        return sum(self.sizes)

    @property
    def planted(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.sizes)), self.sizes)


def unrank_pairs(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices ``0..n(n-1)/2-1`` to pairs ``i < j`` in row-major order."""
    k = np.asarray(k, dtype=np.int64)
    # row i starts at offset i*n - i*(i+1)/2 - ... ; solve the quadratic then fix rounding
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * k)) / 2).astype(np.int64)
    start = i * (2 * n - i - 1) // 2
    over = start > k
    i[over] -= 1
    start = i * (2 * n - i - 1) // 2
    nxt = (i + 1) * (2 * n - i - 2) // 2
    under = nxt <= k
    i[under] += 1
    start = i * (2 * n - i - 1) // 2
    j = k - start + i + 1
    return i, j


def sbm_generate(cfg: PlantedConfig, rng) -> tuple[Graph, np.ndarray]:
    """Sample a graph where each pair ``i < j`` is an edge with probability ``p[theta_i, theta_j]``.

    Per block pair, the edge count is drawn from its binomial and the edges
    are a uniform subset of that size, which is the same distribution.
    """
    rng = np.random.default_rng(rng)
    sizes = cfg.sizes
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    chunks = []
    for r in range(len(sizes)):
        for s in range(r, len(sizes)):
            p = cfg.matrix[r, s]
            nr, ns = sizes[r], sizes[s]
            cap = nr * (nr - 1) // 2 if r == s else nr * ns
            if cap == 0 or p == 0:
                continue
            count = rng.binomial(cap, p)
            if count == 0:
                continue
            idx = rng.choice(cap, size=count, replace=False)
            if r == s:
                i, j = unrank_pairs(idx, nr)
                i, j = i + offsets[r], j + offsets[r]
            else:
                i = idx // ns + offsets[r]
                j = idx % ns + offsets[s]
            chunks.append(np.column_stack([i, j]))
    edges = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
    return Graph.from_edges(cfg.n_nodes, edges), cfg.planted


def discernment_matrix(p: float, gamma: float, delta: float) -> np.ndarray:
    """Three-block matrix interpolating hub-and-spoke (delta=0) and 3 layers (delta=1).

    ``gamma`` sets how pronounced the structure is; at ``gamma = 1`` every
    entry equals ``p``.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    if not 1.0 <= gamma <= 1.0 / p:
        raise ValueError(f"gamma must lie in [1, 1/p] = [1, {1.0 / p:g}]")
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    lo = p / gamma
    corner = p * (1 - delta) + lo * delta
    mid = p * delta + lo * (1 - delta)
    return np.array([
        [p * gamma, p, corner],
        [p, mid, lo],
        [corner, lo, lo],
    ])


def geometric_densities(p_first: float, p_last: float, n_layers: int) -> np.ndarray:
    """``p_r = p_first (p_last / p_first)^((r-1)/(L-1))`` for ``r = 1..L``."""
    r = np.arange(n_layers)
    return p_first * (p_last / p_first) ** (r / (n_layers - 1))


def layered_matrix(densities) -> np.ndarray:
    """Block matrix with ``p_rs = p_max(r, s)``."""
    d = np.asarray(densities, dtype=float)
    idx = np.arange(d.size)
    return d[np.maximum.outer(idx, idx)]


def merged_layer_density(p_layers, k: int, n: int, n_layers: Optional[int] = None):
    """Density of layers ``k..L`` (1-based) merged so the mean degree is unchanged.

    Exact for rational input (``Fraction`` in, ``Fraction`` out).
    """
    p = list(p_layers)
    L = len(p) if n_layers is None else n_layers
    if len(p) != L:
        raise ValueError("need one density per layer")
    if not 2 <= k <= L:
        raise ValueError("k must satisfy 2 <= k <= L")
    within = n * (n - 1) // 2
    cross = n * n
    num = within * sum(p[r - 1] for r in range(k, L + 1)) + cross * sum((r - 1) * p[r - 1] for r in range(k, L + 1))
    den = within * (L - k + 1) + cross * sum(r - 1 for r in range(k, L + 1))
    if isinstance(num, Fraction):
        return num / den
    return float(num) / den


def merged_layer_densities(p_layers, k: int, n: int) -> np.ndarray:
    """Layer densities of the merged network: unchanged for ``r < k``, ``q_k`` after."""
    p = np.asarray(p_layers, dtype=float).copy()
    p[k - 1:] = merged_layer_density(list(p), k, n)
    return p


def expected_mean_degree(sizes: Sequence[int], matrix) -> float:
    sizes = np.asarray(sizes, dtype=float)
    mat = np.asarray(matrix, dtype=float)
    pairs = np.outer(sizes, sizes)
    np.fill_diagonal(pairs, sizes * (sizes - 1) / 2)
    expected_edges = np.triu(pairs * mat).sum()
    return 2.0 * expected_edges / sizes.sum()


# Paper-scale reference values used to derive desk-scale defaults.
PAPER_DISCERNMENT_N = 10_000
PAPER_DISCERNMENT_P = 0.0075
PAPER_LAYERS_N = 10_000
PAPER_LAYER_INNER = 0.1
PAPER_LAYER_OUTER = 0.002


@dataclass
class FitSettings:
    """MCMC and MDL settings shared by the experiments."""

    n_gibbs: int = 100
    mcmc_per_node: int = 10
    restarts: int = 3
    n_samples: int = 10**6
    estimator: Optional[str] = "quadrature"
    proposal: str = "uniform"


@dataclass
class DiscernmentConfig:
    n_nodes: int = 1500
    mean_degree: Optional[float] = None  # default: matched to the paper's p(N - 1)
    gammas: tuple = (1.0, 2.0, 3.0, 4.0)
    deltas: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    n_networks: int = 1
    layers: int = 3
    fit: FitSettings = field(default_factory=FitSettings)

    @property
    def base_density(self) -> float:
        k = self.mean_degree
        if k is None:
            k = PAPER_DISCERNMENT_P * (PAPER_DISCERNMENT_N - 1)
        return k / (self.n_nodes - 1)


@dataclass
class LayersConfig:
    n_nodes: int = 1200
    n_layers_generator: int = 6
    planted_layers: tuple = (2, 3, 4, 5, 6)
    fitted_layers: tuple = (2, 3, 4, 5, 6)
    n_networks: int = 10
    p_inner: Optional[float] = None  # default: paper value rescaled to keep the mean degree
    p_outer: Optional[float] = None
    fit: FitSettings = field(default_factory=FitSettings)

    def densities(self) -> np.ndarray:
        scale = PAPER_LAYERS_N / self.n_nodes
        inner = PAPER_LAYER_INNER * scale if self.p_inner is None else self.p_inner
        outer = PAPER_LAYER_OUTER * scale if self.p_outer is None else self.p_outer
        return geometric_densities(inner, outer, self.n_layers_generator)

    def planted_config(self, planted_layers: int) -> PlantedConfig:
        L = self.n_layers_generator
        n = self.n_nodes // L
        if n * L != self.n_nodes:
            raise ValueError("n_nodes must be divisible by the generator's layer count")
        dens = self.densities()
        if planted_layers < L:
            dens = merged_layer_densities(dens, planted_layers, n)
        return PlantedConfig((n,) * L, layered_matrix(dens))


def _discernment_job(job):
    from .fit import fit_model

    cfg, gamma, delta, rep, seed = job
    ss = np.random.SeedSequence(seed)
    gen_seed, h_seed, l_seed = ss.spawn(3)
    n = cfg.n_nodes
    sizes = (n // 3, n // 3, n - 2 * (n // 3))
    planted = PlantedConfig(sizes, discernment_matrix(cfg.base_density, gamma, delta))
    g, _ = sbm_generate(planted, gen_seed)
    fs = cfg.fit
    fit_h = fit_model(g, ModelKind.hub_and_spoke(), fs.restarts, fs.n_gibbs, fs.mcmc_per_node * g.n_nodes,
                      fs.n_samples, h_seed, estimator=fs.estimator, proposal=fs.proposal)
    fit_l = fit_model(g, ModelKind.layered(cfg.layers), fs.restarts, fs.n_gibbs, fs.mcmc_per_node * g.n_nodes,
                      fs.n_samples, l_seed, estimator=fs.estimator, proposal=fs.proposal)
    m = max(g.n_edges, 1)
    return {
        "gamma": gamma,
        "delta": delta,
        "rep": rep,
        "seed": list(seed),
        "n_edges": g.n_edges,
        "dl_hub_spoke_bits": fit_h.dl.dl_bits,
        "dl_layered_bits": fit_l.dl.dl_bits,
        "dl_h_minus_l_bits": fit_h.dl.dl_bits - fit_l.dl.dl_bits,
        "dl_l_minus_h_per_edge": (fit_l.dl.dl_bits - fit_h.dl.dl_bits) / m,
    }


def run_discernment_experiment(cfg: DiscernmentConfig, seed: int, threads: int = 1,
                               cells: Optional[Sequence[tuple]] = None) -> list[dict]:
    """Fit both models to planted networks over a (gamma, delta) grid.

    Returns one record per (cell, repetition) with the layered minus
    hub-and-spoke description length per edge. Records are ordered by cell
    and repetition regardless of how jobs were scheduled.
    """
    from .fit import run_jobs

    if cells is None:
        cells = [(g, d) for g in cfg.gammas for d in cfg.deltas]
    jobs = []
    for c, (gamma, delta) in enumerate(cells):
        for rep in range(cfg.n_networks):
            jobs.append((cfg, float(gamma), float(delta), rep, [seed, c, rep]))
    return run_jobs(_discernment_job, jobs, threads)


def _layers_job(job):
    from .fit import fit_model

    cfg, planted_layers, net, seed = job
    g, _ = sbm_generate(cfg.planted_config(planted_layers), np.random.SeedSequence(seed + [0]))
    fs = cfg.fit
    out = {"planted_layers": planted_layers, "network": net, "seed": seed, "n_edges": g.n_edges, "dl_bits": {}}
    for k, n_layers in enumerate(cfg.fitted_layers):
        fit = fit_model(g, ModelKind.layered(n_layers), fs.restarts, fs.n_gibbs, fs.mcmc_per_node * g.n_nodes,
                        fs.n_samples, seed + [1, k],
                        estimator=fs.estimator, proposal=fs.proposal)
        out["dl_bits"][n_layers] = fit.dl.dl_bits
    out["best_layers"] = min(cfg.fitted_layers, key=lambda x: (out["dl_bits"][x], x))
    return out


def run_layers_experiment(cfg: LayersConfig, seed: int, threads: int = 1) -> dict:
    """Fit layered models with several layer counts to merged-layer networks.

    Returns per-network records plus the mean description length per edge
    for every (planted, fitted) layer pair and its argmin per planted count.
    """
    from .fit import run_jobs

    jobs = []
    for a, planted_layers in enumerate(cfg.planted_layers):
        for net in range(cfg.n_networks):
            jobs.append((cfg, int(planted_layers), net, [seed, a, net]))
    records = run_jobs(_layers_job, jobs, threads)
    table = {}
    argmin = {}
    for planted_layers in cfg.planted_layers:
        rows = [r for r in records if r["planted_layers"] == planted_layers]
        means = {
            n_layers: float(np.mean([r["dl_bits"][n_layers] / r["n_edges"] for r in rows]))
            for n_layers in cfg.fitted_layers
        }
        table[planted_layers] = means
        argmin[planted_layers] = min(cfg.fitted_layers, key=lambda x: (means[x], x))
    return {"records": records, "mean_dl_per_edge": table, "argmin": argmin}
