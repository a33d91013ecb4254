"""Pairwise dependence screening with Dirichlet process mixtures."""

from ._core import (
    chi_square,
    dpm_fit,
    knn_mi,
    log_bf,
    mixmod_ensemble,
    posterior_prob_dep,
    run_cli,
    screen,
)

__all__ = [
    "chi_square",
    "dpm_fit",
    "knn_mi",
    "log_bf",
    "mixmod_ensemble",
    "posterior_prob_dep",
    "run_cli",
    "screen",
]
