import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mscalefno import autodiff as ad
from mscalefno.autodiff import ShapeError, Tensor
from mscalefno.checkpoint import load_checkpoint, read_manifest, save_checkpoint
from mscalefno.fno import (
    FnoConfig,
    count_parameters,
    fno_forward,
    init_params,
    parameter_breakdown,
    parameter_shapes,
)
from builders import random_config, random_fno, sample_input
from reference import finite_difference_check, naive_fno


@pytest.mark.parametrize(
    "d_v, k_max, layers, expected",
    [(48, 500, 1, 1_164_001), (48, 500, 4, 4_641_169), (1, 1, 1, 17)],
)
def test_published_counts(d_v, k_max, layers, expected):
    config = FnoConfig(d_v=d_v, k_max=k_max, layers=layers)
    assert count_parameters(config) == expected
    assert sum(parameter_breakdown(config).values()) == expected


@settings(max_examples=20, deadline=None)
@given(
    d_v=st.integers(1, 6),
    k_max=st.integers(1, 9),
    layers=st.integers(1, 3),
    d=st.integers(1, 2),
    d_a=st.integers(1, 3),
    d_u=st.integers(1, 2),
)
def test_count_matches_enumeration(d_v, k_max, layers, d, d_a, d_u):
    config = FnoConfig(d_v=d_v, k_max=k_max, layers=layers, d=d, d_a=d_a, d_u=d_u)
    params = init_params(config, 0)
    assert params.num_parameters() == count_parameters(config)
    assert sum(parameter_breakdown(config).values()) == count_parameters(config)


def test_zero_network_outputs_projection_bias():
    config = FnoConfig(d_v=3, k_max=2)
    params = init_params(config, 0)
    for t in params.parameters():
        t.data[...] = 0
    params["proj.b_q"].data[...] = 0.75
    x, a = sample_input(np.random.default_rng(0), 8)
    out = fno_forward(params, x, a)
    np.testing.assert_array_equal(out.data, np.full((8, 1), 0.75))


def test_tiny_forward_matches_reference(rng):
    config = FnoConfig(d_v=2, k_max=2)
    params = random_fno(config, rng)
    x, a = sample_input(rng, 8)
    np.testing.assert_allclose(
        fno_forward(params, x, a).data, naive_fno(params.tensors, config, x, a), rtol=0, atol=1e-10
    )


@pytest.mark.parametrize("seed", range(6))
def test_random_configs_match_reference(seed):
    rng = np.random.default_rng(seed)
    config, n = random_config(rng)
    params = random_fno(config, rng)
    x, a = sample_input(rng, n)
    np.testing.assert_allclose(
        fno_forward(params, x, a).data, naive_fno(params.tensors, config, x, a), rtol=0, atol=1e-10
    )


def test_batched_forward_matches_per_sample(rng):
    config = FnoConfig(d_v=3, k_max=4, layers=2, activation="sine")
    params = random_fno(config, rng)
    x, a = sample_input(rng, 10, (4,))
    batched = fno_forward(params, x, a).data
    for b in range(4):
        np.testing.assert_allclose(batched[b], fno_forward(params, x, a[b]).data, rtol=0, atol=1e-13)


def test_tiny_gradients_match_finite_differences(rng):
    config = FnoConfig(d_v=2, k_max=2)
    params = random_fno(config, rng)
    x, a = sample_input(rng, 8, (2,))
    target = rng.normal(size=(2, 8, 1))

    def loss():
        return ad.relative_l2_loss(fno_forward(params, x, a), target)

    leaves = params.parameters()
    grads = ad.gradients(loss(), leaves)
    assert finite_difference_check(lambda: loss().item(), leaves, grads, rtol=1e-4, atol=1e-6) <= 1.0


def test_same_params_any_resolution(rng):
    config = FnoConfig(d_v=2, k_max=3)
    params = random_fno(config, rng)
    for n in (5, 9, 40):
        x, a = sample_input(rng, n)
        assert fno_forward(params, x, a).shape == (n, 1)


def test_grid_and_input_mismatch(rng):
    params = init_params(FnoConfig(d_v=2, k_max=2), 0)
    with pytest.raises(ShapeError):
        fno_forward(params, np.zeros((8, 1)), np.zeros((9, 1)))
    with pytest.raises(ShapeError):
        fno_forward(params, np.zeros((8, 1)), np.zeros((8, 2)))


def test_k_max_too_large_for_grid():
    params = init_params(FnoConfig(d_v=2, k_max=6), 0)
    with pytest.raises(ValueError):
        fno_forward(params, np.zeros((8, 1)), np.zeros((8, 1)))


def test_invalid_config():
    with pytest.raises(ValueError):
        FnoConfig(d_v=0, k_max=1)
    with pytest.raises(ValueError):
        FnoConfig(d_v=1, k_max=1, activation="relu")


def test_init_is_deterministic():
    config = FnoConfig(d_v=4, k_max=3, layers=2)
    a, b = init_params(config, 11), init_params(config, 11)
    for (na, ta), (nb, tb) in zip(a.named_parameters(), b.named_parameters()):
        assert na == nb
        assert ta.data.tobytes() == tb.data.tobytes()


def test_init_differs_across_seeds():
    config = FnoConfig(d_v=4, k_max=3)
    a, b = init_params(config, 1), init_params(config, 2)
    assert any(not np.array_equal(x.data, y.data) for x, y in zip(a.parameters(), b.parameters()))


def test_init_bounds():
    config = FnoConfig(d_v=8, k_max=5)
    params = init_params(config, 3)
    for name, t in params.named_parameters():
        short = name.split(".")[-1]
        if short.startswith("b"):
            assert not np.any(t.data)
        elif t.is_complex:
            assert np.max(np.abs(t.data.real)) <= 1 / 8 and np.max(np.abs(t.data.imag)) <= 1 / 8
        elif name.startswith("lift."):
            assert np.max(np.abs(t.data)) <= 1 / np.sqrt(2)
        else:
            assert np.max(np.abs(t.data)) <= 1 / np.sqrt(t.shape[0])


def test_enumeration_order_is_stable():
    names = [n for n, _, _ in parameter_shapes(FnoConfig(d_v=2, k_max=2))]
    assert names[:3] == ["lift.A_x", "lift.A_a", "lift.b"]
    assert names[3:10] == [f"layer0.{k}" for k in ("A_w", "b_w", "R", "A_1", "b_1", "A_2", "b_2")]
    assert names[-4:] == ["proj.A_m", "proj.b_m", "proj.A_q", "proj.b_q"]


def test_checkpoint_round_trip_is_bitwise(tmp_path, rng):
    config = FnoConfig(d_v=3, k_max=4, layers=2, activation="sine")
    params = random_fno(config, rng)
    params.seed = 5
    save_checkpoint(params, tmp_path / "model")
    loaded = load_checkpoint(tmp_path / "model")
    assert loaded.config == config and loaded.seed == 5
    for (na, ta), (nb, tb) in zip(params.named_parameters(), loaded.named_parameters()):
        assert na == nb and ta.data.dtype == tb.data.dtype
        assert ta.data.tobytes() == tb.data.tobytes()
    manifest = read_manifest(tmp_path / "model.json")
    assert manifest["num_parameters"] == count_parameters(config)
    offsets = [s["offset"] for s in manifest["sections"]]
    assert offsets == sorted(offsets) and offsets[0] == 0


def test_checkpoint_rejects_corrupt_magic(tmp_path):
    params = init_params(FnoConfig(d_v=1, k_max=1), 0)
    save_checkpoint(params, tmp_path / "m")
    blob = tmp_path / "m.bin"
    blob.write_bytes(b"XXXXXXXX" + blob.read_bytes()[8:])
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(tmp_path / "m")


def test_params_reject_wrong_shape():
    params = init_params(FnoConfig(d_v=2, k_max=2), 0)
    tensors = dict(params.tensors)
    tensors["lift.b"] = Tensor(np.zeros(3))
    with pytest.raises(ShapeError):
        type(params)(params.config, tensors)
