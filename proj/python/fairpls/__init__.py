"""Fair partial least squares: linear and kernel fair representations, fairness metrics."""

from ._core import (
    FairPlsError,
    FairPlsModel,
    KernelFairPlsModel,
    PlsModel,
    correlation_ratio,
    cov2,
    disparate_impact,
    eopp_ratio,
    fair_pls,
    hsic,
    kernel_fair_pls,
    ks_statistic,
    nipals,
    synthetic,
    vanilla_fair_pls,
)

__all__ = [
    "FairPlsError",
    "FairPlsModel",
    "KernelFairPlsModel",
    "PlsModel",
    "correlation_ratio",
    "cov2",
    "disparate_impact",
    "eopp_ratio",
    "fair_pls",
    "hsic",
    "kernel_fair_pls",
    "ks_statistic",
    "nipals",
    "synthetic",
    "vanilla_fair_pls",
]
__version__ = "0.1.0"
