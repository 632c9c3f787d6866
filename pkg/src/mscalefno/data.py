"""Synthetic datasets: random Fourier-series inputs, pointwise maps, 1-D Helmholtz solves."""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import lapack

DATASET_MAGIC = b"MSFNODS\x00"
DATASET_VERSION = 1

# Streams keep independent draws from colliding when they share a user seed.
_STREAM_INPUT = 0
_STREAM_MAP = 1
_STREAM_OOD = 2


class SingularSystemError(ArithmeticError):
    def __init__(self, message: str, rcond: float):
        super().__init__(message)
        self.rcond = rcond


def derived_rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Generator for sample ``index`` of ``stream``; independent of generation order."""
    return np.random.default_rng(np.random.SeedSequence([seed, stream, index]))


def uniform_grid(n: int, half_length: float = 1.0) -> np.ndarray:
    if n < 2:
        raise ValueError(f"grid needs at least 2 points, got {n}")
    return np.linspace(-half_length, half_length, n)


# -- input functions -----------------------------------------------------------------


@dataclass(frozen=True)
class FourierSeriesSpec:
    """``sum_{k=0}^{n_max} a_k sin(k pi x) + b_k cos(k pi x)``, normalized to sup-norm 1.

    Coefficients are drawn from ``rand(-1, 1)`` unless given explicitly.
    """

    n_max: int
    use_sin: bool = True
    use_cos: bool = False
    seed: int = 0
    sin_coeffs: tuple[float, ...] | None = None
    cos_coeffs: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {self.n_max}")
        if not (self.use_sin or self.use_cos):
            raise ValueError("FourierSeriesSpec: at least one of use_sin/use_cos must be set")


def _draw_series(spec: FourierSeriesSpec, rng: np.random.Generator):
    k = spec.n_max + 1
    a = b = None
    if spec.use_sin:
        a = np.asarray(spec.sin_coeffs, float) if spec.sin_coeffs is not None else rng.uniform(-1, 1, k)
    if spec.use_cos:
        b = np.asarray(spec.cos_coeffs, float) if spec.cos_coeffs is not None else rng.uniform(-1, 1, k)
    return a, b


def eval_fourier_series(sin_coeffs, cos_coeffs, x: np.ndarray) -> np.ndarray:
    """Evaluate the raw series, summing terms in ascending order."""
    out = np.zeros_like(x, dtype=np.float64)
    count = max(len(c) for c in (sin_coeffs, cos_coeffs) if c is not None)
    for k in range(count):
        if sin_coeffs is not None and k < len(sin_coeffs):
            out += sin_coeffs[k] * np.sin(k * np.pi * x)
        if cos_coeffs is not None and k < len(cos_coeffs):
            out += cos_coeffs[k] * np.cos(k * np.pi * x)
    return out


def normalize_sup(raw: np.ndarray, reference: np.ndarray | None = None) -> np.ndarray:
    """Divide by ``max |reference|`` (defaults to ``raw`` itself)."""
    ref = raw if reference is None else reference
    peak = float(np.max(np.abs(ref)))
    if peak == 0.0 or not math.isfinite(peak):
        raise ValueError("cannot normalize an identically zero function")
    return raw / peak


def _sample_series(spec, rng, x, ref_stride):
    for _ in range(2):
        raw = eval_fourier_series(*_draw_series(spec, rng), x)
        ref = raw[::ref_stride]
        if np.max(np.abs(ref)) > 0.0:
            return normalize_sup(raw, ref)
        if spec.sin_coeffs is not None or spec.cos_coeffs is not None:
            break
    raise ValueError("random Fourier series vanished identically on the grid")


def gen_input_function(spec: FourierSeriesSpec, grid: np.ndarray, rng=None) -> np.ndarray:
    """One random input function on ``grid`` with ``max_j |a_j| == 1``."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("gen_input_function: empty grid")
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    return _sample_series(spec, rng, grid, 1)


def gen_ood_input(seed: int, grid: np.ndarray, rng=None, ref_stride: int = 1) -> np.ndarray:
    """``sum_{n=1}^{50} a_n sin(k_n x^3) + b_n cos(l_n x^2)``, normalized to sup-norm 1.

    ``k_n ~ rand(0, 30)``, ``l_n ~ rand(40, 60)``, ``a_n, b_n ~ rand(-1, 1)``.
    """
    x = np.asarray(grid, dtype=np.float64)
    rng = np.random.default_rng(seed) if rng is None else rng
    x2, x3 = x * x, x * x * x
    for _ in range(2):
        a = rng.uniform(-1, 1, 50)
        b = rng.uniform(-1, 1, 50)
        k = rng.uniform(0, 30, 50)
        l = rng.uniform(40, 60, 50)
        eta = np.zeros_like(x)
        for i in range(50):
            eta += a[i] * np.sin(k[i] * x3) + b[i] * np.cos(l[i] * x2)
        ref = eta[::ref_stride]
        if np.max(np.abs(ref)) > 0.0:
            return normalize_sup(eta, ref)
    raise ValueError("out-of-distribution input vanished identically on the grid")


# -- pointwise maps -------------------------------------------------------------------


@dataclass(frozen=True)
class PointwiseMapSpec:
    """``u = sum_m A_m sin(m a) + B_m cos(m a)``, or ``sin(m a)`` for a single frequency."""

    A: tuple[float, ...] = ()
    B: tuple[float, ...] = ()
    single_frequency: int | None = None

    @property
    def M(self) -> int:
        return self.single_frequency if self.single_frequency is not None else len(self.A)

    @classmethod
    def random(cls, M: int, seed: int) -> "PointwiseMapSpec":
        rng = derived_rng(seed, _STREAM_MAP)
        return cls(tuple(rng.uniform(-1, 1, M)), tuple(rng.uniform(-1, 1, M)))


def apply_pointwise_map(spec: PointwiseMapSpec, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if spec.single_frequency is not None:
        return np.sin(spec.single_frequency * a)
    if not spec.A or len(spec.A) != len(spec.B):
        raise ValueError("apply_pointwise_map: coefficient lists missing or of unequal length")
    u = np.zeros_like(a)
    for m, (am, bm) in enumerate(zip(spec.A, spec.B), start=1):
        u += am * np.sin(m * a) + bm * np.cos(m * a)
    return u


# -- Helmholtz ------------------------------------------------------------------------


def default_wavenumbers() -> tuple[float, ...]:
    return tuple(300.0 + 35.0 * k for k in range(11))


@dataclass(frozen=True)
class HelmholtzProblem:
    """``u'' + (lam^2 + c*omega) u = f`` on ``[-L, L]`` with ``u(-L) = u(L) = 0``.

    ``f = sum_k (lam^2 - mu_k^2) sin(mu_k x)``.
    """

    L: float = 1.0
    lam: float = 2.0
    c: float = 3.6
    mu: tuple[float, ...] = field(default_factory=default_wavenumbers)
    fine_n: int = 8001
    coarse_n: int = 1001

    def __post_init__(self):
        if self.fine_n < 3 or self.coarse_n < 2:
            raise ValueError("HelmholtzProblem: grids too small")
        if (self.fine_n - 1) % (self.coarse_n - 1) != 0:
            raise ValueError(
                f"HelmholtzProblem: fine_n-1={self.fine_n - 1} not divisible by "
                f"coarse_n-1={self.coarse_n - 1}"
            )
        mu_max = max(self.mu) if self.mu else 0.0
        needed = 10.0 * mu_max * self.L / math.pi
        if self.fine_n < needed:
            raise ValueError(
                f"HelmholtzProblem: fine_n={self.fine_n} under-resolves mu={mu_max} "
                f"(need >= {needed:.0f} points)"
            )

    @property
    def stride(self) -> int:
        return (self.fine_n - 1) // (self.coarse_n - 1)

    def fine_grid(self) -> np.ndarray:
        return uniform_grid(self.fine_n, self.L)

    def coarse_grid(self) -> np.ndarray:
        return uniform_grid(self.coarse_n, self.L)

    def forcing(self, x: np.ndarray) -> np.ndarray:
        f = np.zeros_like(x, dtype=np.float64)
        for mu in self.mu:
            f += (self.lam**2 - mu**2) * np.sin(mu * x)
        return f


def _helmholtz_bands(prob: HelmholtzProblem, omega: np.ndarray):
    h = 2.0 * prob.L / (prob.fine_n - 1)
    inv_h2 = 1.0 / (h * h)
    m = prob.fine_n - 2
    diag = -2.0 * inv_h2 + (prob.lam**2 + prob.c * omega[1:-1])
    off = np.full(m - 1, inv_h2)
    return diag, off


def helmholtz_solve(
    prob: HelmholtzProblem,
    omega: np.ndarray,
    forcing: np.ndarray | None = None,
    rcond_min: float = 1e-13,
) -> np.ndarray:
    """Second-order finite-difference solve on the fine grid.

    The interior tridiagonal system is factored by LU with partial pivoting;
    a reciprocal condition estimate below ``rcond_min`` raises
    :class:`SingularSystemError`.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (prob.fine_n,):
        raise ValueError(f"helmholtz_solve: omega has shape {omega.shape}, expected ({prob.fine_n},)")
    f = prob.forcing(prob.fine_grid()) if forcing is None else np.asarray(forcing, dtype=np.float64)
    diag, off = _helmholtz_bands(prob, omega)
    anorm = float(np.max(np.abs(diag) + 2.0 * off[0])) if off.size else float(abs(diag[0]))
    dl, d, du, du2, ipiv, info = lapack.dgttrf(off, diag, off)
    if info > 0:
        raise SingularSystemError(f"helmholtz_solve: exactly singular pivot at row {info}", 0.0)
    rcond, _ = lapack.dgtcon(dl, d, du, du2, ipiv, anorm)
    if rcond < rcond_min:
        raise SingularSystemError(
            f"helmholtz_solve: near-singular system (condition estimate {1.0 / max(rcond, 1e-300):.3e})",
            rcond,
        )
    x, info = lapack.dgttrs(dl, d, du, du2, ipiv, f[1:-1].reshape(-1, 1))
    if info != 0:
        raise SingularSystemError(f"helmholtz_solve: dgttrs failed with info={info}", rcond)
    u = np.zeros(prob.fine_n)
    u[1:-1] = x[:, 0]
    return u


def helmholtz_residual(prob: HelmholtzProblem, omega: np.ndarray, u: np.ndarray, forcing=None) -> float:
    """``||A u - f|| / ||f||`` over interior points for the discrete stencil."""
    f = prob.forcing(prob.fine_grid()) if forcing is None else np.asarray(forcing, dtype=np.float64)
    h = 2.0 * prob.L / (prob.fine_n - 1)
    lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    r = lap + (prob.lam**2 + prob.c * omega[1:-1]) * u[1:-1] - f[1:-1]
    return float(np.linalg.norm(r) / np.linalg.norm(f[1:-1]))


def downsample(u: np.ndarray, coarse_n: int) -> np.ndarray:
    u = np.asarray(u)
    fine_n = u.shape[-1]
    if coarse_n < 2 or (fine_n - 1) % (coarse_n - 1) != 0:
        raise ValueError(f"downsample: {fine_n} points cannot be restricted to {coarse_n}")
    return u[..., :: (fine_n - 1) // (coarse_n - 1)].copy()


# -- datasets -------------------------------------------------------------------------


@dataclass
class SampleSet:
    """Paired discretized functions on one uniform grid, with split indices."""

    grid: np.ndarray
    inputs: np.ndarray  # [samples, n]
    targets: np.ndarray  # [samples, n]
    splits: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        s, n = self.inputs.shape
        if self.targets.shape != (s, n) or self.grid.shape != (n,):
            raise ValueError("SampleSet: grid/inputs/targets shapes disagree")
        seen = np.concatenate([np.asarray(v, dtype=np.int64) for v in self.splits.values()])
        if np.unique(seen).size != seen.size or seen.size != s:
            raise ValueError("SampleSet: splits must be disjoint and cover every sample")

    @property
    def n_points(self) -> int:
        return self.grid.shape[0]

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def split(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        if name not in self.splits:
            raise KeyError(f"unknown split {name!r}; available: {sorted(self.splits)}")
        idx = self.splits[name]
        return self.inputs[idx], self.targets[idx]

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        arrays = [("grid", self.grid), ("inputs", self.inputs), ("targets", self.targets)]
        blob, table, offset = [], [], 0
        for name, arr in arrays:
            raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            table.append({"name": name, "shape": list(arr.shape), "dtype": "f64le", "offset": offset})
            blob.append(raw)
            offset += len(raw)
        body = b"".join(blob)
        header = DATASET_MAGIC + struct.pack("<I", DATASET_VERSION)
        (directory / "dataset.bin").write_bytes(header + body)
        manifest = {
            "format": "mscalefno-dataset",
            "version": DATASET_VERSION,
            "header_bytes": len(header),
            "arrays": table,
            "splits": {k: [int(i) for i in v] for k, v in self.splits.items()},
            "metadata": self.metadata,
            "sha256": hashlib.sha256(body).hexdigest(),
        }
        (directory / "dataset.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "SampleSet":
        directory = Path(directory)
        manifest = json.loads((directory / "dataset.json").read_text())
        raw = (directory / "dataset.bin").read_bytes()
        hb = manifest["header_bytes"]
        if raw[: len(DATASET_MAGIC)] != DATASET_MAGIC:
            raise ValueError(f"{directory}: not a dataset file (bad magic)")
        (version,) = struct.unpack("<I", raw[len(DATASET_MAGIC) : hb])
        if version != DATASET_VERSION:
            raise ValueError(f"{directory}: unsupported dataset version {version}")
        body = raw[hb:]
        arrays = {}
        for entry in manifest["arrays"]:
            count = int(np.prod(entry["shape"]))
            arr = np.frombuffer(body, dtype="<f8", count=count, offset=entry["offset"])
            arrays[entry["name"]] = arr.astype(np.float64).reshape(entry["shape"])
        splits = {k: np.asarray(v, dtype=np.int64) for k, v in manifest["splits"].items()}
        return cls(arrays["grid"], arrays["inputs"], arrays["targets"], splits, manifest["metadata"])


PRESETS = ("ex4.1", "ex4.2", "ex4.3", "ex4.4", "ex4.5", "desk")

_DEFAULT_COUNTS = {
    "ex4.1": (1000, 500, 500),
    "ex4.2": (1000, 500, 500),
    "ex4.3": (800, 100, 100),
    "ex4.4": (800, 100, 100),
    "ex4.5": (800, 100, 100),
    "desk": (400, 100, 100),
}


def _contiguous_splits(counts: Sequence[int]) -> dict[str, np.ndarray]:
    n_train, n_val, n_test = counts
    idx = np.arange(n_train + n_val + n_test)
    return {
        "train": idx[:n_train],
        "val": idx[n_train : n_train + n_val],
        "test": idx[n_train + n_val :],
    }


def helmholtz_problem_for(L: float) -> HelmholtzProblem:
    """Fine mesh ``h = 1/4000`` and training mesh ``h = 1/500`` at any half-length."""
    scale = int(round(L))
    if scale < 1 or abs(scale - L) > 1e-12:
        raise ValueError(f"domain half-length must be a positive integer, got {L}")
    return HelmholtzProblem(L=float(scale), fine_n=8000 * scale + 1, coarse_n=1000 * scale + 1)


def build_dataset(
    preset: str,
    seed: int,
    counts: Sequence[int] | None = None,
    M: int | None = None,
    L: float | None = None,
) -> SampleSet:
    """Generate one of the experiment datasets.

    ``M`` selects the number of frequency terms for ``ex4.2`` (default 10) and
    ``L`` the domain half-length for ``ex4.4`` (default 2); ``ex4.5`` is fixed
    at ``L = 10`` with an out-of-distribution test split.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; valid presets: {', '.join(PRESETS)}")
    counts = tuple(_DEFAULT_COUNTS[preset] if counts is None else counts)
    if len(counts) != 3 or min(counts) < 0 or counts[0] < 1:
        raise ValueError(f"counts must be (train>=1, val>=0, test>=0), got {counts}")
    total = sum(counts)
    meta: dict = {"preset": preset, "seed": int(seed), "counts": list(counts)}

    if preset in ("ex4.1", "ex4.2", "desk"):
        if preset == "ex4.2":
            M = 10 if M is None else int(M)
            series = FourierSeriesSpec(n_max=10, use_sin=True, use_cos=True)
            mapping = PointwiseMapSpec.random(M, seed)
            meta["map"] = {"M": M, "A": list(mapping.A), "B": list(mapping.B)}
        else:
            series = FourierSeriesSpec(n_max=50 if preset == "ex4.1" else 20)
            mapping = PointwiseMapSpec(single_frequency=20)
            meta["map"] = {"single_frequency": 20}
        n = 1001 if preset != "desk" else 257
        grid = uniform_grid(n)
        inputs = np.empty((total, n))
        for i in range(total):
            inputs[i] = gen_input_function(series, grid, rng=derived_rng(seed, _STREAM_INPUT, i))
        targets = apply_pointwise_map(mapping, inputs)
        meta["input_series"] = {"n_max": series.n_max, "sin": series.use_sin, "cos": series.use_cos}
        meta["grid"] = {"n": n, "L": 1.0}
        return SampleSet(grid, inputs, targets, _contiguous_splits(counts), meta)

    if preset == "ex4.3":
        prob, n_max = helmholtz_problem_for(1.0), 500
    elif preset == "ex4.4":
        prob, n_max = helmholtz_problem_for(2.0 if L is None else L), 50
    else:
        prob, n_max = helmholtz_problem_for(10.0), 50
    series = FourierSeriesSpec(n_max=n_max, use_sin=True, use_cos=True)
    fine = prob.fine_grid()
    forcing = prob.forcing(fine)
    grid = prob.coarse_grid()
    inputs = np.empty((total, prob.coarse_n))
    targets = np.empty((total, prob.coarse_n))
    ood_from = counts[0] + counts[1] if preset == "ex4.5" else total
    for i in range(total):
        if i < ood_from:
            omega = _sample_series(series, derived_rng(seed, _STREAM_INPUT, i), fine, prob.stride)
        else:
            omega = gen_ood_input(seed, fine, rng=derived_rng(seed, _STREAM_OOD, i), ref_stride=prob.stride)
        u = helmholtz_solve(prob, omega, forcing)
        inputs[i] = downsample(omega, prob.coarse_n)
        targets[i] = downsample(u, prob.coarse_n)
    meta["input_series"] = {"n_max": n_max, "sin": True, "cos": True}
    meta["helmholtz"] = {
        "L": prob.L,
        "lambda": prob.lam,
        "c": prob.c,
        "mu": list(prob.mu),
        "fine_n": prob.fine_n,
        "coarse_n": prob.coarse_n,
    }
    meta["grid"] = {"n": prob.coarse_n, "L": prob.L}
    if preset == "ex4.5":
        meta["test_split"] = "out-of-distribution"
    return SampleSet(grid, inputs, targets, _contiguous_splits(counts), meta)
