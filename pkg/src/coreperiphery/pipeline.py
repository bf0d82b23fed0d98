"""End-to-end typology of one network: both block models, MDL verdict, baselines."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .classic import binned_kcores, k_core_decomposition, two_block_partition
from .fit import FitResult, fit_model, run_jobs
from .graph import Graph
from .metrics import adjusted_mutual_information, normalized_vi, variation_of_information
from .sbm import ModelKind

__all__ = ["PipelineSettings", "classify", "full_pipeline"]

log = logging.getLogger(__name__)

Z_95 = 1.96


@dataclass
class PipelineSettings:
    layer_range: tuple = tuple(range(2, 7))
    restarts: int = 3
    n_gibbs: int = 100
    mcmc_per_node: int = 10
    n_samples: Optional[int] = None
    estimator: Optional[str] = "quadrature"
    proposal: str = "uniform"


def _fit_job(job):
    g, kind, st, seed = job
    return fit_model(g, kind, st.restarts, st.n_gibbs, st.mcmc_per_node * g.n_nodes, st.n_samples,
                     seed, estimator=st.estimator, proposal=st.proposal)


def _spread(fit: FitResult) -> float:
    d = np.asarray(fit.restart_dls)
    return float(d.std(ddof=1)) if d.size > 1 else 0.0


def classify(fit_h: FitResult, fit_l: FitResult) -> dict:
    """Sign rule on the DL difference, 'indeterminate' inside a 95% band.

    The band combines Monte-Carlo error with the spread of the DL across
    restarts of each model.
    """
    diff = fit_h.dl.dl_bits - fit_l.dl.dl_bits
    se = math.sqrt(fit_h.dl.stderr_bits ** 2 + fit_l.dl.stderr_bits ** 2 + _spread(fit_h) ** 2 + _spread(fit_l) ** 2)
    if abs(diff) <= Z_95 * se or diff == 0:
        verdict = "indeterminate"
    else:
        verdict = "hub-and-spoke" if diff < 0 else "layered"
    return {
        "dl_hub_spoke_bits": fit_h.dl.dl_bits,
        "dl_layered_bits": fit_l.dl.dl_bits,
        "difference_bits": diff,
        "difference_per_edge": diff / max(fit_h.dl.n_edges, 1),
        "stderr_bits": se,
        "verdict": verdict,
    }


def full_pipeline(g: Graph, settings: Optional[PipelineSettings] = None, seed: int = 0,
                  threads: Optional[int] = 1) -> dict:
    """Fit hub-and-spoke and layered models, pick the verdict, compare to baselines."""
    st = settings or PipelineSettings()
    layers = sorted(set(int(x) for x in st.layer_range))
    if not layers:
        raise ValueError("empty layer range")
    kinds = [ModelKind.hub_and_spoke()] + [ModelKind.layered(n) for n in layers]
    jobs = [(g, kind, st, [seed, k]) for k, kind in enumerate(kinds)]
    fits = run_jobs(_fit_job, jobs, threads)
    fit_h, layered = fits[0], dict(zip(layers, fits[1:]))
    best_l = min(layers, key=lambda n: (layered[n].dl.dl_bits, n))
    fit_l = layered[best_l]

    core_numbers, shells = k_core_decomposition(g)
    two_block, z = two_block_partition(g, return_objective=True)
    binned = binned_kcores(shells, int((two_block.blocks == 0).sum()))
    parts = {
        "hub_spoke": fit_h.partition,
        "layered": fit_l.partition,
        "two_block": two_block.blocks,
        "kcores": shells.blocks,
        "binned_kcores": binned.blocks,
    }
    pairs = [
        ("hub_spoke", "two_block"),
        ("layered", "kcores"),
        ("hub_spoke", "kcores"),
        ("layered", "two_block"),
        ("two_block", "kcores"),
        ("two_block", "binned_kcores"),
    ]
    comparisons = [
        {
            "a": a,
            "b": b,
            "vi_bits": variation_of_information(parts[a], parts[b]),
            "nvi": normalized_vi(parts[a], parts[b]),
            "ami": adjusted_mutual_information(parts[a], parts[b]),
        }
        for a, b in pairs
    ]
    report = {
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "best_layers": best_l,
        "layered_dl_bits": {n: layered[n].dl.dl_bits for n in layers},
        "hub_spoke": fit_h.to_dict(),
        "layered": fit_l.to_dict(),
        "two_block_objective": int(z),
        "comparisons": comparisons,
    }
    report.update(classify(fit_h, fit_l))
    report["_partitions"] = parts
    report["_coreness"] = {"hub_spoke": fit_h.chain.coreness, "layered": fit_l.chain.coreness}
    report["_core_numbers"] = core_numbers
    return report
