"""Multi-scale FNO: parallel branches on scaled inputs, combined by trainable weights."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .fno import FnoConfig, FnoParams, count_parameters, fno_forward, init_params

# Initial scale presets used by the oscillatory-map and Helmholtz experiments.
SCALE_PRESETS = {
    "map": (1.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0),
    "map-m200": (1.0, 40.0, 80.0, 100.0, 120.0, 140.0, 180.0, 200.0),
    "helmholtz": (1.0, 4.0, 8.0, 10.0, 12.0, 14.0, 18.0, 20.0),
}


class MscaleParams:
    def __init__(
        self,
        config: FnoConfig,
        branches: Sequence[FnoParams],
        scales: Tensor,
        weights: Tensor,
        seed: int | None = None,
    ):
        n = len(branches)
        if n < 1:
            raise ValueError("MscaleParams: need at least one branch")
        if any(b.config != config for b in branches):
            raise ValueError("MscaleParams: all branches must share one config")
        if scales.shape != (n,) or weights.shape != (n,):
            raise ValueError(
                f"MscaleParams: scales {scales.shape} / weights {weights.shape} do not match N={n}"
            )
        scales.requires_grad = True
        weights.requires_grad = True
        self.config = config
        self.branches = list(branches)
        self.scales = scales
        self.weights = weights
        self.seed = seed

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for i, branch in enumerate(self.branches):
            out += [(f"branch{i}.{name}", t) for name, t in branch.named_parameters()]
        out += [("scales", self.scales), ("weights", self.weights)]
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def copy(self) -> "MscaleParams":
        return MscaleParams(
            self.config,
            [b.copy() for b in self.branches],
            Tensor(self.scales.data.copy()),
            Tensor(self.weights.data.copy()),
            self.seed,
        )

    def forward(self, x_grid, a_vals) -> Tensor:
        return mscale_forward(self, x_grid, a_vals)

    __call__ = forward


def mscale_count(config: FnoConfig, n_branches: int) -> int:
    if n_branches < 1:
        raise ValueError("mscale_count: need at least one branch")
    return n_branches * count_parameters(config) + 2 * n_branches


def init_mscale(
    config: FnoConfig, n_branches: int, initial_scales: Sequence[float], seed: int
) -> MscaleParams:
    """Branches get independent child seeds; combination weights start at ``1/N``."""
    if len(initial_scales) != n_branches:
        raise ValueError(
            f"init_mscale: {len(initial_scales)} initial scales given for N={n_branches}"
        )
    children = np.random.SeedSequence(seed).spawn(n_branches)
    branches = [
        init_params(config, int(child.generate_state(1, dtype=np.uint64)[0])) for child in children
    ]
    scales = Tensor(np.array(initial_scales, dtype=np.float64), requires_grad=True)
    weights = Tensor(np.full(n_branches, 1.0 / n_branches), requires_grad=True)
    return MscaleParams(config, branches, scales, weights, seed)


def _branch_inputs(x_grid, a_vals) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a_vals.data if isinstance(a_vals, Tensor) else a_vals, dtype=np.float64)
    x = np.asarray(x_grid.data if isinstance(x_grid, Tensor) else x_grid, dtype=np.float64)
    if x.ndim >= 2 and x.ndim < a.ndim:
        x = np.broadcast_to(x, a.shape[:-1] + x.shape[-1:]).copy()
    return x, a


def _contribution(params: MscaleParams, i: int, x: Tensor, a: Tensor) -> Tensor:
    c = ad.take(params.scales, i)
    gamma = ad.take(params.weights, i)
    return ad.mul(gamma, fno_forward(params.branches[i], ad.mul(c, x), ad.mul(c, a)))


def mscale_forward(params: MscaleParams, x_grid, a_vals) -> Tensor:
    """``sum_i weights[i] * FNO_i(scales[i] * x, scales[i] * a)``, reduced in branch order."""
    x_arr, a_arr = _branch_inputs(x_grid, a_vals)
    x, a = Tensor(x_arr), Tensor(a_arr)
    out = _contribution(params, 0, x, a)
    for i in range(1, params.n_branches):
        out = ad.add(out, _contribution(params, i, x, a))
    return out


def branch_contributions(params: MscaleParams, x_grid, a_vals) -> list[np.ndarray]:
    """Per-branch terms ``weights[i] * FNO_i(...)`` (evaluated without a graph)."""
    x_arr, a_arr = _branch_inputs(x_grid, a_vals)
    x, a = Tensor(x_arr), Tensor(a_arr)
    with ad.no_grad():
        return [_contribution(params, i, x, a).data for i in range(params.n_branches)]
