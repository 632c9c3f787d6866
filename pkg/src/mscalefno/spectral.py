"""Truncated real DFT, per-mode channel mixing, and inverse, with gradients.

Conventions: the forward transform is unnormalized,
``X[k] = sum_j x[j] exp(-2 pi i k j / n)``, and keeps modes ``0..k_max-1``.
The inverse carries ``1/n``, treats every dropped mode as zero and rebuilds the
negative frequencies by Hermitian symmetry, so its output is exactly real.
All transforms act on the second-to-last axis (the grid axis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ShapeError, Tensor


@dataclass(frozen=True)
class Spectrum:
    modes: Tensor  # complex [..., k_max, channels]
    n_signal: int

    @property
    def k_max(self) -> int:
        return self.modes.shape[-2]


def max_modes(n: int) -> int:
    return n // 2 + 1


# pocketfft is markedly faster along a contiguous last axis, so the grid axis
# is moved there for each transform.
def _rfft_grid(x: np.ndarray, k_max: int) -> np.ndarray:
    xt = np.ascontiguousarray(np.swapaxes(x, -1, -2))
    return np.swapaxes(np.fft.rfft(xt, axis=-1)[..., :k_max], -1, -2)


def _irfft_grid(modes: np.ndarray, n: int) -> np.ndarray:
    shape = modes.shape[:-2] + (modes.shape[-1], max_modes(n))
    full = np.zeros(shape, dtype=np.complex128)
    full[..., : modes.shape[-2]] = np.swapaxes(modes, -1, -2)
    return np.ascontiguousarray(np.swapaxes(np.fft.irfft(full, n=n, axis=-1), -1, -2))


def rdft(signal: Tensor, k_max: int) -> Spectrum:
    if signal.is_complex:
        raise TypeError("rdft: real signal required")
    if signal.ndim < 2:
        raise ShapeError(f"rdft: expected [..., n, channels], got {signal.shape}")
    n = signal.shape[-2]
    if n < 2:
        raise ValueError(f"rdft: need n >= 2, got {n}")
    if not 1 <= k_max <= max_modes(n):
        raise ValueError(f"rdft: k_max={k_max} outside [1, {max_modes(n)}] for n={n}")
    modes = _rfft_grid(signal.data, k_max)

    # dL/dx_j = Re sum_k G_k exp(+2 pi i k j / n); irfft doubles every mode
    # except DC and Nyquist, so halve those it doubles.
    halve = np.full(k_max, 0.5)
    halve[0] = 1.0
    if n % 2 == 0 and k_max == max_modes(n):
        halve[-1] = 1.0

    def backward(g):
        return (n * _irfft_grid(g * halve[:, None], n),)

    return Spectrum(Tensor.from_op(np.ascontiguousarray(modes), (signal,), backward, "rdft"), n)


def spectral_mix(spec: Spectrum, weights: Tensor) -> Spectrum:
    """``out[..., k, l] = sum_i weights[k, l, i] * spec[..., k, i]``."""
    x = spec.modes
    if weights.ndim != 3 or weights.shape[0] != spec.k_max or weights.shape[2] != x.shape[-1]:
        raise ShapeError(
            f"spectral_mix: weights {weights.shape} incompatible with spectrum {x.shape}"
        )
    k, d_out, d_in = weights.shape
    lead = x.shape[:-2]
    xk = np.moveaxis(x.data, -2, 0).reshape(k, -1, d_in)  # [k, B, d_in]
    out = xk @ weights.data.transpose(0, 2, 1)  # [k, B, d_out]
    out = np.moveaxis(out.reshape((k,) + lead + (d_out,)), 0, -2)

    def backward(g):
        gk = np.moveaxis(g, -2, 0).reshape(k, -1, d_out)
        gx = gw = None
        if x.requires_grad:
            gx = gk @ np.conj(weights.data)
            gx = np.moveaxis(gx.reshape((k,) + lead + (d_in,)), 0, -2)
        if weights.requires_grad:
            gw = gk.transpose(0, 2, 1) @ np.conj(xk)
        return gx, gw

    mixed = Tensor.from_op(np.ascontiguousarray(out), (x, weights), backward, "spectral_mix")
    return Spectrum(mixed, spec.n_signal)


def irdft(spec: Spectrum, n: int | None = None) -> Tensor:
    n = spec.n_signal if n is None else n
    if n < 2:
        raise ValueError(f"irdft: need n >= 2, got {n}")
    k_max = spec.k_max
    if k_max > max_modes(n):
        raise ValueError(f"irdft: k_max={k_max} exceeds {max_modes(n)} for n={n}")
    x = spec.modes
    signal = _irfft_grid(x.data, n)

    # Hermitian weights: DC and (even n) Nyquist appear once, the rest twice.
    w = np.full(k_max, 2.0 / n)
    w[0] = 1.0 / n
    if n % 2 == 0 and k_max == max_modes(n):
        w[-1] = 1.0 / n

    def backward(g):
        return (_rfft_grid(g, k_max) * w[:, None],)

    return Tensor.from_op(signal, (x,), backward, "irdft")


def truncate(spec: Spectrum, k_max: int) -> Spectrum:
    """Keep the lowest ``k_max`` modes (a no-op when already that short)."""
    if k_max >= spec.k_max:
        return spec
    x = spec.modes

    def backward(g):
        full = np.zeros_like(x.data)
        full[..., :k_max, :] = g
        return (full,)

    out = Tensor.from_op(x.data[..., :k_max, :].copy(), (x,), backward, "truncate")
    return Spectrum(out, spec.n_signal)


def dft(values: np.ndarray) -> np.ndarray:
    """Unnormalized one-sided DFT of a real 1-D array (``n // 2 + 1`` modes)."""
    return np.fft.rfft(np.asarray(values, dtype=np.float64))
