"""Single-branch Fourier neural operator for 1-D functions."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .spectral import irdft, max_modes, rdft, spectral_mix

ACTIVATIONS = {"gelu": ad.gelu, "sine": ad.sin}


@dataclass(frozen=True)
class FnoConfig:
    d_v: int
    k_max: int
    layers: int = 1
    activation: str = "gelu"
    d: int = 1
    d_a: int = 1
    d_u: int = 1

    def __post_init__(self):
        for name in ("d_v", "k_max", "layers", "d", "d_a", "d_u"):
            if getattr(self, name) < 1:
                raise ValueError(f"FnoConfig.{name} must be >= 1, got {getattr(self, name)}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}; expected one of {sorted(ACTIVATIONS)}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


def parameter_breakdown(config: FnoConfig) -> dict[str, int]:
    """Parameter counts per section; complex spectral weights count once each."""
    d, d_a, d_u, d_v, k = config.d, config.d_a, config.d_u, config.d_v, config.k_max
    per_layer_local = d_v * d_v + d_v
    per_layer_spectral = k * d_v * d_v
    per_layer_mlp = 2 * d_v * d_v + 2 * d_v
    return {
        "lift": (d + d_a + 1) * d_v,
        "local": config.layers * per_layer_local,
        "spectral": config.layers * per_layer_spectral,
        "mlp": config.layers * per_layer_mlp,
        "projection": 2 * d_v * d_v + (2 * d_u + 2) * d_v + d_u,
    }


def count_parameters(config: FnoConfig) -> int:
    d, d_a, d_u, d_v = config.d, config.d_a, config.d_u, config.d_v
    return (
        (d + d_a + 1) * d_v
        + config.layers * ((config.k_max + 3) * d_v * d_v + 3 * d_v)
        + (2 * d_v * d_v + (2 * d_u + 2) * d_v + d_u)
    )


def parameter_shapes(config: FnoConfig) -> list[tuple[str, tuple[int, ...], bool]]:
    """The stable enumeration order: ``(name, shape, is_complex)``."""
    d_v = config.d_v
    shapes = [
        ("lift.A_x", (config.d, d_v), False),
        ("lift.A_a", (config.d_a, d_v), False),
        ("lift.b", (d_v,), False),
    ]
    for t in range(config.layers):
        p = f"layer{t}."
        shapes += [
            (p + "A_w", (d_v, d_v), False),
            (p + "b_w", (d_v,), False),
            (p + "R", (config.k_max, d_v, d_v), True),
            (p + "A_1", (d_v, d_v), False),
            (p + "b_1", (d_v,), False),
            (p + "A_2", (d_v, d_v), False),
            (p + "b_2", (d_v,), False),
        ]
    shapes += [
        ("proj.A_m", (d_v, 2 * d_v), False),
        ("proj.b_m", (2 * d_v,), False),
        ("proj.A_q", (2 * d_v, config.d_u), False),
        ("proj.b_q", (config.d_u,), False),
    ]
    return shapes


class FnoParams:
    """All trainable arrays of one FNO, keyed by name in enumeration order."""

    def __init__(self, config: FnoConfig, tensors: dict[str, Tensor], seed: int | None = None):
        expected = parameter_shapes(config)
        if list(tensors) != [name for name, _, _ in expected]:
            raise ValueError("FnoParams: parameter names do not match the config enumeration")
        for name, shape, is_complex in expected:
            t = tensors[name]
            if t.shape != shape or t.is_complex != is_complex:
                raise ShapeError(f"FnoParams: {name} has shape {t.shape}, expected {shape}")
            t.requires_grad = True
        self.config = config
        self.tensors = tensors
        self.seed = seed

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.tensors.items())

    def parameters(self) -> list[Tensor]:
        return list(self.tensors.values())

    def num_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def copy(self) -> "FnoParams":
        return FnoParams(
            self.config, {k: Tensor(v.data.copy()) for k, v in self.tensors.items()}, self.seed
        )

    def forward(self, x_grid, a_vals) -> Tensor:
        return fno_forward(self, x_grid, a_vals)

    __call__ = forward


def init_params(config: FnoConfig, seed: int) -> FnoParams:
    """Uniform fan-in weights, zero biases, complex spectral weights in ``[-1/d_v, 1/d_v]``."""
    rng = np.random.default_rng(seed)
    lift_bound = 1.0 / np.sqrt(config.d + config.d_a)
    spec_bound = 1.0 / config.d_v
    tensors: dict[str, Tensor] = {}
    for name, shape, is_complex in parameter_shapes(config):
        short = name.split(".")[-1]
        if is_complex:
            re = rng.uniform(-spec_bound, spec_bound, size=shape)
            im = rng.uniform(-spec_bound, spec_bound, size=shape)
            data = re + 1j * im
        elif short.startswith("b"):
            data = np.zeros(shape)
        elif name.startswith("lift."):
            data = rng.uniform(-lift_bound, lift_bound, size=shape)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            data = rng.uniform(-bound, bound, size=shape)
        tensors[name] = Tensor(data, requires_grad=True)
    return FnoParams(config, tensors, seed)


def _as_input(value, name: str) -> Tensor:
    t = value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))
    if t.ndim == 1:
        raise ShapeError(f"{name}: expected [..., n, channels], got {t.shape}")
    return t


def fno_forward(params: FnoParams, x_grid, a_vals) -> Tensor:
    """Evaluate the FNO at grid points ``x_grid[..., n, d]`` with input ``a_vals[..., n, d_a]``.

    A plain-array grid without the batch axes of ``a_vals`` is broadcast over them.
    """
    cfg = params.config
    a = _as_input(a_vals, "a_vals")
    if not isinstance(x_grid, Tensor):
        x_arr = np.asarray(x_grid, dtype=np.float64)
        if x_arr.ndim >= 2 and x_arr.ndim < a.ndim:
            x_arr = np.broadcast_to(x_arr, a.shape[:-1] + x_arr.shape[-1:]).copy()
        x_grid = x_arr
    x = _as_input(x_grid, "x_grid")
    if x.shape[:-1] != a.shape[:-1]:
        raise ShapeError(f"fno_forward: grid {x.shape} and input {a.shape} disagree")
    if x.shape[-1] != cfg.d or a.shape[-1] != cfg.d_a:
        raise ShapeError(
            f"fno_forward: channel mismatch, got d={x.shape[-1]}, d_a={a.shape[-1]}; "
            f"config expects d={cfg.d}, d_a={cfg.d_a}"
        )
    n = x.shape[-2]
    if cfg.k_max > max_modes(n):
        raise ValueError(f"fno_forward: k_max={cfg.k_max} exceeds n//2+1={max_modes(n)}")

    p = params.tensors
    act = ACTIVATIONS[cfg.activation]
    v = ad.affine(x, p["lift.A_x"], p["lift.b"]) + ad.matmul(a, p["lift.A_a"])
    for t in range(cfg.layers):
        pre = f"layer{t}."
        spectral = irdft(spectral_mix(rdft(v, cfg.k_max), p[pre + "R"]), n)
        hidden = ad.gelu(ad.affine(spectral, p[pre + "A_1"], p[pre + "b_1"]))
        mlp = ad.affine(hidden, p[pre + "A_2"], p[pre + "b_2"])
        v = act(ad.affine(v, p[pre + "A_w"], p[pre + "b_w"]) + mlp)
    w = ad.gelu(ad.affine(v, p["proj.A_m"], p["proj.b_m"]))
    return ad.affine(w, p["proj.A_q"], p["proj.b_q"])
