import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mscalefno import autodiff as ad
from mscalefno.autodiff import ShapeError, Tensor
from mscalefno.spectral import Spectrum, irdft, max_modes, rdft, spectral_mix, truncate
from reference import finite_difference_check, naive_dft, naive_idft


def test_constant_signal_is_dc_only():
    spec = rdft(Tensor(np.full((8, 1), 5.0)), 5)
    modes = spec.modes.data[:, 0]
    assert abs(modes[0] - 40.0) < 1e-12
    assert np.max(np.abs(modes[1:])) < 1e-12


def test_pure_sine_hits_one_mode():
    n = 64
    j = np.arange(n)
    signal = np.sin(2 * np.pi * 3 * j / n)[:, None]
    oracle = naive_dft(signal, max_modes(n))[:, 0]
    got = rdft(Tensor(signal), max_modes(n)).modes.data[:, 0]
    np.testing.assert_allclose(got, oracle, atol=1e-10)
    assert abs(abs(got[3]) - n / 2) < 1e-10
    assert np.max(np.abs(np.delete(got, 3))) < 1e-10


@pytest.mark.parametrize("n", [2, 7, 16, 33, 257])
def test_full_round_trip(n, rng):
    x = rng.normal(size=(n, 3))
    back = irdft(rdft(Tensor(x), max_modes(n)))
    np.testing.assert_allclose(back.data, x, rtol=0, atol=1e-12)


def test_dc_mode_inverse_is_constant():
    n = 10
    modes = np.zeros((3, 1), dtype=complex)
    modes[0] = n
    out = irdft(Spectrum(Tensor(modes), n))
    np.testing.assert_allclose(out.data, np.ones((n, 1)), atol=1e-15)


@pytest.mark.parametrize("n", [15, 16])
def test_truncated_inverse_matches_naive(n, rng):
    x = rng.normal(size=(n, 2))
    got = irdft(rdft(Tensor(x), 4)).data
    expected = naive_idft(naive_dft(x, 4), n)
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_forward_matches_naive_odd_length(rng):
    x = rng.normal(size=(21, 2))
    np.testing.assert_allclose(rdft(Tensor(x), 7).modes.data, naive_dft(x, 7), atol=1e-11)


def test_batched_leading_axes(rng):
    x = rng.normal(size=(3, 12, 2))
    batched = rdft(Tensor(x), 5).modes.data
    for b in range(3):
        np.testing.assert_allclose(batched[b], naive_dft(x[b], 5), atol=1e-11)


def test_identity_mixing(rng):
    spec = rdft(Tensor(rng.normal(size=(12, 3))), 5)
    eye = np.broadcast_to(np.eye(3), (5, 3, 3)).astype(complex)
    np.testing.assert_array_equal(spectral_mix(spec, Tensor(eye)).modes.data, spec.modes.data)


def test_zero_mixing(rng):
    spec = rdft(Tensor(rng.normal(size=(12, 3))), 5)
    out = spectral_mix(spec, Tensor(np.zeros((5, 3, 3), dtype=complex)))
    assert not np.any(out.modes.data)


def test_mixing_matches_triple_loop(rng):
    modes = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    R = rng.normal(size=(2, 2, 2)) + 1j * rng.normal(size=(2, 2, 2))
    expected = np.zeros((2, 2), dtype=complex)
    for k in range(2):
        for l in range(2):
            for i in range(2):
                expected[k, l] += R[k, l, i] * modes[k, i]
    got = spectral_mix(Spectrum(Tensor(modes), 4), Tensor(R)).modes.data
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_mixing_shape_mismatch(rng):
    spec = rdft(Tensor(rng.normal(size=(12, 3))), 5)
    with pytest.raises(ShapeError):
        spectral_mix(spec, Tensor(np.zeros((4, 3, 3), dtype=complex)))


@pytest.mark.parametrize("k_max", [0, 7])
def test_k_max_out_of_range(k_max):
    with pytest.raises(ValueError):
        rdft(Tensor(np.ones((10, 1))), k_max)


def test_short_signals_rejected():
    with pytest.raises(ValueError):
        rdft(Tensor(np.ones((1, 1))), 1)
    with pytest.raises(ValueError):
        irdft(Spectrum(Tensor(np.ones((1, 1), dtype=complex)), 1))


def test_inverse_rejects_too_many_modes():
    with pytest.raises(ValueError):
        irdft(Spectrum(Tensor(np.ones((6, 1), dtype=complex)), 10), 8)


def test_truncation_is_idempotent(rng):
    spec = rdft(Tensor(rng.normal(size=(20, 2))), 11)
    once = truncate(spec, 4)
    assert truncate(once, 4) is once
    np.testing.assert_array_equal(once.modes.data, spec.modes.data[:4])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 64))
def test_parseval(seed, n):
    x = np.random.default_rng(seed).normal(size=(n, 1))
    half = rdft(Tensor(x), max_modes(n)).modes.data[:, 0]
    full = np.concatenate([half, np.conj(half[1 : n - max_modes(n) + 1][::-1])])
    assert full.size == n
    energy = np.sum(x**2)
    assert abs(energy - np.sum(np.abs(full) ** 2) / n) <= 1e-10 * energy


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(2, 64),
    alpha=st.floats(-3, 3),
    beta=st.floats(-3, 3),
)
def test_linearity(seed, n, alpha, beta):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, n, 2))
    k = max_modes(n)
    lhs = rdft(Tensor(alpha * x + beta * y), k).modes.data
    rhs = alpha * rdft(Tensor(x), k).modes.data + beta * rdft(Tensor(y), k).modes.data
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * max(1.0, n))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(4, 18), full=st.booleans())
def test_transform_chain_gradients(seed, n, full):
    rng = np.random.default_rng(seed)
    k_max = max_modes(n) if full else int(rng.integers(1, max_modes(n) + 1))
    x = Tensor(rng.normal(size=(2, n, 2)), requires_grad=True)
    R = Tensor(rng.normal(size=(k_max, 2, 2)) + 1j * rng.normal(size=(k_max, 2, 2)), requires_grad=True)
    weights = Tensor(rng.normal(size=(2, n, 2)))

    def loss():
        out = irdft(spectral_mix(rdft(x, k_max), R), n)
        return ad.total(ad.mul(ad.sin(out), weights))

    grads = ad.gradients(loss(), [x, R])
    assert finite_difference_check(lambda: loss().item(), [x, R], grads, rtol=1e-5, atol=1e-9) <= 1.0


def test_truncate_gradient(rng):
    x = Tensor(rng.normal(size=(9, 1)), requires_grad=True)
    weights = Tensor(rng.normal(size=(9, 1)))

    def loss():
        return ad.total(ad.mul(irdft(truncate(rdft(x, 5), 2), 9), weights))

    grads = ad.gradients(loss(), [x])
    assert finite_difference_check(lambda: loss().item(), [x], grads, rtol=1e-5, atol=1e-9) <= 1.0
