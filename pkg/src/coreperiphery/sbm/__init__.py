from .gibbs import (
    ChainResult,
    ChainState,
    coreness,
    init_state,
    log_acceptance,
    mh_label_step,
    run_gibbs,
    sample_densities,
)
from .model import (
    BlockStats,
    ModelKind,
    block_stats,
    check_densities,
    density_counts,
    expand_densities,
    log_likelihood,
    log_prior_p,
    log_prior_theta,
)
from .truncbeta import sample_truncated_beta

__all__ = [
    "BlockStats",
    "ChainResult",
    "ChainState",
    "ModelKind",
    "block_stats",
    "check_densities",
    "coreness",
    "density_counts",
    "expand_densities",
    "init_state",
    "log_acceptance",
    "log_likelihood",
    "log_prior_p",
    "log_prior_theta",
    "mh_label_step",
    "run_gibbs",
    "sample_densities",
    "sample_truncated_beta",
]
