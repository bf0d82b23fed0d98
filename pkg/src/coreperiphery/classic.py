"""Baseline core-periphery decompositions: k-cores and the two-block model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph

__all__ = [
    "CorePartition",
    "be_objective",
    "binned_kcores",
    "k_core_decomposition",
    "two_block_partition",
]


@dataclass(frozen=True)
class CorePartition:
    """Block assignment with block 0 as the innermost (core) block.

    Blocks are contiguous ``0..n_blocks-1``; they are written 1-based in
    CLI output.
    """

    blocks: np.ndarray
    n_blocks: int

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=np.int64)
        if b.ndim != 1 or b.size == 0:
            raise ValueError("partition must be a nonempty vector")
        if self.n_blocks < 1 or b.min() < 0 or b.max() >= self.n_blocks:
            raise ValueError("block index out of range")
        if np.unique(b).size != self.n_blocks:
            raise ValueError("blocks must be contiguous (no empty block)")
        object.__setattr__(self, "blocks", b)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.blocks, minlength=self.n_blocks)


def k_core_decomposition(g: Graph) -> tuple[np.ndarray, CorePartition]:
    """Core numbers by bucket-sorted minimum-degree peeling, O(N + M).

    Returns the core number of each node and the shell partition, with the
    shell of the largest core number as block 0.
    """
    n = g.n_nodes
    if n == 0:
        raise ValueError("empty graph")
    deg = g.degrees.astype(np.int64).copy()
    max_deg = int(deg.max()) if n else 0

    # Batagelj-Zaversnik: vert is sorted by current degree, pos its inverse,
    # bin_start[d] the first slot holding degree d.
    counts = np.bincount(deg, minlength=max_deg + 1)
    bin_start = np.zeros(max_deg + 1, dtype=np.int64)
    bin_start[1:] = np.cumsum(counts)[:-1]
    vert = np.argsort(deg, kind="stable")
    pos = np.empty(n, dtype=np.int64)
    pos[vert] = np.arange(n)

    indptr, indices = g.indptr, g.indices
    deg_l = deg.tolist()
    vert_l = vert.tolist()
    pos_l = pos.tolist()
    bin_l = bin_start.tolist()
    for k in range(n):
        v = vert_l[k]
        dv = deg_l[v]
        for u in indices[indptr[v]:indptr[v + 1]].tolist():
            du = deg_l[u]
            if du > dv:
                pu = pos_l[u]
                pw = bin_l[du]
                w = vert_l[pw]
                if u != w:
                    vert_l[pu], vert_l[pw] = w, u
                    pos_l[u], pos_l[w] = pw, pu
                bin_l[du] += 1
                deg_l[u] = du - 1

    core = np.asarray(deg_l, dtype=np.int64)
    levels = np.unique(core)[::-1]
    rank = {int(c): r for r, c in enumerate(levels)}
    shells = np.array([rank[int(c)] for c in core], dtype=np.int64)
    return core, CorePartition(shells, len(levels))


def be_objective(g: Graph, core_mask) -> int:
    """Discrete Borgatti-Everett error: missing core-core pairs plus
    periphery-periphery edges."""
    core_mask = np.asarray(core_mask, dtype=bool)
    k = int(core_mask.sum())
    e = g.edges
    cc = int(np.sum(core_mask[e[:, 0]] & core_mask[e[:, 1]]))
    pp = int(np.sum(~core_mask[e[:, 0]] & ~core_mask[e[:, 1]]))
    return k * (k - 1) // 2 - cc + pp


def two_block_partition(g: Graph, return_objective: bool = False):
    """Two-block (core/periphery) partition by degree-ordered prefix search.

    Nodes are ranked by degree (descending, ties by id); every prefix of size
    ``1..N-1`` is scored with :func:`be_objective` using O(deg) incremental
    updates, and the smallest minimizing prefix becomes the core.
    """
    n = g.n_nodes
    if n == 0:
        raise ValueError("empty graph")
    if n == 1:
        part = CorePartition(np.zeros(1, dtype=np.int64), 1)
        return (part, 0) if return_objective else part

    deg = g.degrees
    order = np.lexsort((np.arange(n), -deg))
    in_core = np.zeros(n, dtype=bool)
    cc = 0
    pp = g.n_edges
    best_k, best_z = 0, None
    indptr, indices = g.indptr, g.indices
    for k in range(1, n):
        v = order[k - 1]
        nb = indices[indptr[v]:indptr[v + 1]]
        inside = int(in_core[nb].sum())
        cc += inside
        pp -= nb.size - inside
        in_core[v] = True
        z = k * (k - 1) // 2 - cc + pp
        if best_z is None or z < best_z:
            best_k, best_z = k, z

    blocks = np.ones(n, dtype=np.int64)
    blocks[order[:best_k]] = 0
    part = CorePartition(blocks, 2)
    return (part, best_z) if return_objective else part


def binned_kcores(shells: CorePartition, target_core_size: int) -> CorePartition:
    """Merge k-shells into a core and a periphery.

    Shells are accumulated from the innermost outward and the cut is placed
    where the accumulated size is nearest ``target_core_size`` (the smaller
    core wins a tie). With a single shell everything is core and the result
    has one block.
    """
    n = shells.blocks.size
    if not 0 < target_core_size < n:
        raise ValueError("target_core_size must lie strictly between 0 and N")
    sizes = shells.sizes
    if shells.n_blocks == 1:
        return CorePartition(np.zeros(n, dtype=np.int64), 1)
    cumulative = np.cumsum(sizes)[:-1]
    dist = np.abs(cumulative - target_core_size)
    cut = int(np.argmin(dist))  # first minimum = smaller core
    blocks = (shells.blocks > cut).astype(np.int64)
    return CorePartition(blocks, 2)
