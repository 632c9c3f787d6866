"""Slow, loop-based reference evaluations used as independent oracles.

Nothing here touches numpy.fft or the autodiff graph.
"""

import cmath
import math

import numpy as np


def naive_dft(x, k_max):
    """``X[k, c] = sum_j x[j, c] exp(-2 pi i k j / n)`` for ``k < k_max``."""
    x = np.asarray(x, dtype=float)
    n, channels = x.shape
    out = np.zeros((k_max, channels), dtype=complex)
    for k in range(k_max):
        for c in range(channels):
            acc = 0j
            for j in range(n):
                acc += x[j, c] * cmath.exp(-2j * math.pi * k * j / n)
            out[k, c] = acc
    return out


def naive_idft(modes, n):
    """Inverse with 1/n, Hermitian completion of the retained modes, real part."""
    k_max, channels = modes.shape
    full = np.zeros((n, channels), dtype=complex)
    for k in range(k_max):
        full[k] = modes[k]
        if 0 < k and n - k != k:
            full[n - k] = np.conj(modes[k])
    out = np.zeros((n, channels))
    for j in range(n):
        for c in range(channels):
            acc = 0j
            for k in range(n):
                acc += full[k, c] * cmath.exp(2j * math.pi * k * j / n)
            out[j, c] = (acc / n).real
    return out


def gelu(v):
    return v * 0.5 * (1.0 + math.erf(v / math.sqrt(2.0)))


def _dense(vec, weight, bias=None):
    d_in, d_out = weight.shape
    out = []
    for l in range(d_out):
        acc = 0.0 if bias is None else bias[l]
        for i in range(d_in):
            acc += vec[i] * weight[i, l]
        out.append(acc)
    return out


def naive_fno(tensors, config, x, a):
    """One sample: ``x[n, d]``, ``a[n, d_a]`` -> ``u[n, d_u]``."""
    p = {k: np.asarray(t.data) for k, t in tensors.items()}
    act = math.sin if config.activation == "sine" else gelu
    n = len(x)
    v = []
    for j in range(n):
        row = _dense(x[j], p["lift.A_x"], p["lift.b"])
        extra = _dense(a[j], p["lift.A_a"])
        v.append([r + e for r, e in zip(row, extra)])
    v = np.array(v)
    for t in range(config.layers):
        pre = f"layer{t}."
        spec = naive_dft(v, config.k_max)
        R = p[pre + "R"]
        mixed = np.zeros_like(spec)
        for k in range(config.k_max):
            for l in range(config.d_v):
                for i in range(config.d_v):
                    mixed[k, l] += R[k, l, i] * spec[k, i]
        s = naive_idft(mixed, n)
        new = []
        for j in range(n):
            hidden = [gelu(h) for h in _dense(s[j], p[pre + "A_1"], p[pre + "b_1"])]
            m = _dense(hidden, p[pre + "A_2"], p[pre + "b_2"])
            w = _dense(v[j], p[pre + "A_w"], p[pre + "b_w"])
            new.append([act(wi + mi) for wi, mi in zip(w, m)])
        v = np.array(new)
    out = []
    for j in range(n):
        hidden = [gelu(h) for h in _dense(v[j], p["proj.A_m"], p["proj.b_m"])]
        out.append(_dense(hidden, p["proj.A_q"], p["proj.b_q"]))
    return np.array(out)


def naive_mscale(params, x, a):
    total = None
    for i, branch in enumerate(params.branches):
        c = float(params.scales.data[i])
        g = float(params.weights.data[i])
        term = g * naive_fno(branch.tensors, params.config, c * np.asarray(x), c * np.asarray(a))
        total = term if total is None else total + term
    return total


def finite_difference_check(loss_fn, leaves, grads, rtol, atol=0.0, step=1e-5):
    """Worst ratio ``|fd - grad| / max(rtol * |fd|, atol)``; the check passes when <= 1.

    Complex leaves are perturbed in their real and imaginary parts separately.
    """
    worst = 0.0
    for leaf, grad in zip(leaves, grads):
        values = leaf.data.reshape(-1).view(np.float64)
        g = np.asarray(grad).reshape(-1).view(np.float64)
        for i in range(values.size):
            orig = values[i]
            values[i] = orig + step
            up = loss_fn()
            values[i] = orig - step
            down = loss_fn()
            values[i] = orig
            fd = (up - down) / (2 * step)
            worst = max(worst, abs(fd - g[i]) / max(rtol * abs(fd), atol, 1e-300))
    return worst
