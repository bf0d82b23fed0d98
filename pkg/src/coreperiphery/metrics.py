"""Partition distances: variation of information and adjusted mutual information.

All entropies are in bits. Partitions are given as label vectors over the
same node order; label values are irrelevant, only the grouping matters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "Contingency",
    "adjusted_mutual_information",
    "contingency",
    "entropy",
    "expected_mutual_information",
    "mutual_information",
    "normalized_vi",
    "variation_of_information",
]


def _labels(p) -> np.ndarray:
    blocks = getattr(p, "blocks", p)
    return np.asarray(blocks).ravel()


@dataclass(frozen=True)
class Contingency:
    table: np.ndarray  # n_uv
    rows: np.ndarray
    cols: np.ndarray
    total: int


def contingency(p1, p2) -> Contingency:
    a, b = _labels(p1), _labels(p2)
    if a.shape != b.shape:
        raise ValueError(f"partitions cover different node sets ({a.size} vs {b.size} nodes)")
    if a.size == 0:
        raise ValueError("empty partitions")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return Contingency(table, table.sum(axis=1), table.sum(axis=0), int(a.size))


def _h(counts: np.ndarray, total: int) -> float:
    # sorted so that the sum does not depend on label or table orientation
    q = np.sort(counts[counts > 0]) / total
    return float(-(q * np.log2(q)).sum())


def entropy(p) -> float:
    labels = _labels(p)
    _, counts = np.unique(labels, return_counts=True)
    return _h(counts, labels.size)


def mutual_information(p1, p2) -> float:
    c = contingency(p1, p2)
    nz = c.table > 0
    nuv = c.table[nz]
    outer = np.outer(c.rows, c.cols)[nz]
    return float(max(0.0, (nuv / c.total * np.log2(nuv * c.total / outer)).sum()))


def variation_of_information(p1, p2) -> float:
    """VI = H(P1) + H(P2) - 2 I(P1; P2), in bits."""
    c = contingency(p1, p2)
    h1 = _h(c.rows, c.total)
    h2 = _h(c.cols, c.total)
    joint = _h(c.table.ravel(), c.total)
    # H1 + H2 - 2I = 2 H(joint) - (H1 + H2); exactly symmetric in floating point
    vi = 2.0 * joint - (h1 + h2)
    return max(0.0, vi)


def normalized_vi(p1, p2) -> float:
    """VI divided by its maximum ``log2 N``."""
    n = _labels(p1).size
    if n < 2:
        raise ValueError("normalized VI needs at least 2 nodes")
    return variation_of_information(p1, p2) / np.log2(n)


def expected_mutual_information(rows, cols) -> float:
    """E[I] in bits under the permutation (hypergeometric) model with fixed marginals."""
    a = np.asarray(rows, dtype=np.int64)
    b = np.asarray(cols, dtype=np.int64)
    n = int(a.sum())
    emi = 0.0
    lg_n = gammaln(n + 1)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1)
            term = nij / n * np.log2(n * nij / (ai * bj))
            logp = (
                gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - lg_n - gammaln(nij + 1) - gammaln(ai - nij + 1)
                - gammaln(bj - nij + 1) - gammaln(n - ai - bj + nij + 1)
            )
            emi += float((term * np.exp(logp)).sum())
    return emi


def adjusted_mutual_information(p1, p2) -> float:
    """AMI with arithmetic-mean normalization.

    When the denominator vanishes (both partitions trivial in the same way)
    the value is 1 for identical groupings and 0 otherwise.
    """
    c = contingency(p1, p2)
    h1 = _h(c.rows, c.total)
    h2 = _h(c.cols, c.total)
    mi = mutual_information(p1, p2)
    emi = expected_mutual_information(c.rows, c.cols)
    denom = 0.5 * (h1 + h2) - emi
    if abs(denom) < 1e-12:
        same = c.table.shape[0] == c.table.shape[1] == np.count_nonzero(c.table)
        return 1.0 if same else 0.0
    return float((mi - emi) / denom)
