"""Capacity bounds and numerical checks for the discrete-time Laguerre channel."""

from .bounds import (
    BoundResult,
    PowerConstraints,
    Regime,
    lower_bound,
    maxent_density,
    solve_mu,
    upper_bound,
)
from .cdma import CdmaConfig, cdma_lower_bound, optimal_users, sum_capacity
from .channel import ChannelParams, PmfRow, log_pmf, moments, pmf_row, sample
from .verify import DiscreteChannel, blahut_arimoto, discretize, mi_monte_carlo

__version__ = "0.1.0"

__all__ = [
    "BoundResult",
    "CdmaConfig",
    "ChannelParams",
    "DiscreteChannel",
    "PmfRow",
    "PowerConstraints",
    "Regime",
    "blahut_arimoto",
    "cdma_lower_bound",
    "discretize",
    "log_pmf",
    "lower_bound",
    "maxent_density",
    "mi_monte_carlo",
    "moments",
    "optimal_users",
    "pmf_row",
    "sample",
    "solve_mu",
    "sum_capacity",
    "upper_bound",
]
