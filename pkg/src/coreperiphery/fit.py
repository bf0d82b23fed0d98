"""Multi-restart model fitting and job execution."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .graph import Graph
from .mdl import DLEstimate, estimate_dl
from .sbm import ChainResult, ModelKind, run_gibbs

__all__ = ["FitResult", "fit_model", "point_partition", "run_jobs"]

log = logging.getLogger(__name__)


def run_jobs(fn: Callable, jobs: Sequence, threads: Optional[int] = 1) -> list:
    """Map ``fn`` over ``jobs`` and return results in job order."""
    threads = os.cpu_count() or 1 if threads is None else threads
    if threads <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def point_partition(chain: ChainResult) -> tuple[np.ndarray, str]:
    """MAP partition, or the best retained sample if the MAP leaves a block empty."""
    theta = chain.map_partition
    if np.bincount(theta, minlength=chain.kind.n_blocks).min() > 0:
        return theta, "map"
    if chain.n_retained == 0:
        raise ValueError("MAP partition has an empty block and no samples were kept")
    burn_in = chain.n_gibbs - chain.n_retained
    best = int(np.argmax(chain.log_posterior_trace[burn_in:]))
    return chain.samples[best].astype(np.int64), "best-sample"


@dataclass
class FitResult:
    kind: ModelKind
    chain: ChainResult
    partition: np.ndarray
    partition_source: str
    dl: DLEstimate
    restart_dls: list
    best_restart: int

    def to_dict(self) -> dict:
        return {
            "model": self.kind.name,
            "layers": self.kind.n_blocks,
            "dl": self.dl.to_dict(),
            "restart_dl_bits": list(self.restart_dls),
            "best_restart": self.best_restart,
            "partition_source": self.partition_source,
            "acceptance_rate": self.chain.acceptance_rate,
        }


def fit_model(g: Graph, kind: ModelKind, restarts: int, n_gibbs: int, n_mcmc: int,
              n_samples: Optional[int], seed, estimator: Optional[str] = None,
              proposal: str = "uniform", eps: float = 0.1) -> FitResult:
    """Run independent chains and keep the one whose point partition has the smallest DL."""
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    seed = list(np.atleast_1d(seed)) if not isinstance(seed, np.random.SeedSequence) else seed
    best = None
    dls = []
    for r in range(restarts):
        chain_seed = np.random.SeedSequence(_seed_words(seed) + [0, r])
        chain = run_gibbs(g, kind, n_gibbs, n_mcmc, proposal=proposal, rng=chain_seed, eps=eps)
        theta, source = point_partition(chain)
        dl_seed = int(np.random.SeedSequence(_seed_words(seed) + [1, r]).generate_state(1, np.uint64)[0] >> 1)
        dl = estimate_dl(g, theta, kind, n_samples, rng=dl_seed, estimator=estimator)
        dls.append(dl.dl_bits)
        log.debug("%s restart %d: %.1f bits", kind, r, dl.dl_bits)
        if best is None or dl.dl_bits < best.dl.dl_bits:
            best = FitResult(kind, chain, theta, source, dl, dls, r)
    best.restart_dls = dls
    return best


def _seed_words(seed) -> list:
    if isinstance(seed, np.random.SeedSequence):
        ent = seed.entropy
        words = list(ent) if isinstance(ent, (list, tuple)) else [ent]
        return words + list(seed.spawn_key)
    return [int(x) for x in seed]
