"""Fourier neural operators and their multi-scale variant for oscillatory 1-D maps."""

__version__ = "0.1.0"

from .autodiff import Tensor, backward, gradients, no_grad
from .fno import FnoConfig, FnoParams, count_parameters, fno_forward, init_params
from .mscale import (
    MscaleParams,
    branch_contributions,
    init_mscale,
    mscale_count,
    mscale_forward,
)
from .training import TrainConfig, relative_l2, train

__all__ = [
    "FnoConfig",
    "FnoParams",
    "MscaleParams",
    "Tensor",
    "TrainConfig",
    "backward",
    "branch_contributions",
    "count_parameters",
    "fno_forward",
    "gradients",
    "init_mscale",
    "init_params",
    "mscale_count",
    "mscale_forward",
    "no_grad",
    "relative_l2",
    "train",
]
