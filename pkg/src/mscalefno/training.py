"""Relative-L2 objective, Adam, and the epoch loop with best-validation retention."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import SampleSet

CSV_HEADER = ("epoch", "train_loss", "val_err", "test_err", "seconds")


class NonFiniteGradientError(FloatingPointError):
    pass


def relative_l2(pred, target) -> float:
    """``||pred - target|| / ||target||`` over all grid points of one sample."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"relative_l2: shapes {pred.shape} and {target.shape} differ")
    tnorm = np.sqrt(np.sum(target * target))
    if tnorm == 0.0:
        raise ValueError("relative_l2: target has zero norm")
    diff = pred - target
    return float(np.sqrt(np.sum(diff * diff)) / tnorm)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 20
    epochs: int = 100
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        # Moments live on the real view, so complex entries are two independent reals.
        m = [np.zeros(p.data.size * (2 if p.is_complex else 1)) for _, p in params]
        return cls(m, [x.copy() for x in m], 0)


def _real_view(arr: np.ndarray) -> np.ndarray:
    return arr.reshape(-1).view(np.float64)


def adam_step(params, grads, state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``.

    ``params`` is a list of ``(name, Tensor)``; ``grads`` the matching arrays.
    """
    if len(params) != len(grads):
        raise ValueError("adam_step: params and grads differ in length")
    for (name, _), g in zip(params, grads):
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in parameter {name}")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    step = cfg.learning_rate / (1.0 - b1**state.t)
    bc2 = 1.0 - b2**state.t
    for (_, p), g, m, v in zip(params, grads, state.m, state.v):
        gv = _real_view(np.ascontiguousarray(g, dtype=p.data.dtype))
        m *= b1
        m += (1.0 - b1) * gv
        v *= b2
        v += (1.0 - b2) * (gv * gv)
        _real_view(p.data)[:] -= step * m / (np.sqrt(v / bc2) + cfg.eps)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_err: float
    test_err: float
    seconds: float

    def row(self) -> list[str]:
        return [
            str(self.epoch),
            repr(self.train_loss),
            repr(self.val_err),
            repr(self.test_err),
            f"{self.seconds:.3f}",
        ]


def _model_inputs(data: SampleSet, idx: np.ndarray):
    return data.grid[:, None], data.inputs[idx][..., None], data.targets[idx][..., None]


def predict(model, data: SampleSet, idx, chunk: int = 50) -> np.ndarray:
    """Model output ``[len(idx), n]`` evaluated without a graph, in fixed chunks."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.empty((idx.size, data.n_points))
    with ad.no_grad():
        for start in range(0, idx.size, chunk):
            sel = idx[start : start + chunk]
            x, a, _ = _model_inputs(data, sel)
            out[start : start + sel.size] = model(x, a).data[..., 0]
    return out


def sample_errors(model, data: SampleSet, split: str, chunk: int = 50) -> np.ndarray:
    idx = data.splits[split]
    preds = predict(model, data, idx, chunk)
    return np.array([relative_l2(p, data.targets[i]) for p, i in zip(preds, idx)])


def _mean_error(model, data: SampleSet, split: str) -> float:
    if split not in data.splits or len(data.splits[split]) == 0:
        return float("nan")
    return float(np.mean(sample_errors(model, data, split)))


@dataclass
class TrainState:
    best_epoch: int = -1
    best_val: float = float("inf")
    records: list[EpochRecord] = field(default_factory=list)


def train(model, data: SampleSet, cfg: TrainConfig, on_epoch=None):
    """Train ``model`` in place; return ``(best-validation copy, records)``.

    Each epoch shuffles the training split with a seeded generator, takes one
    Adam step per batch on the batch-mean relative error, then evaluates the
    validation and test splits. ``on_epoch(record)`` is called after each epoch.
    """
    train_idx = np.asarray(data.splits.get("train", ()), dtype=np.int64)
    if train_idx.size == 0:
        raise ValueError("train: empty training split")
    named = model.named_parameters()
    leaves = [p for _, p in named]
    state = AdamState.zeros_like(named)
    rng = np.random.default_rng(cfg.seed)
    best = model.copy()
    progress = TrainState()
    x_grid = data.grid[:, None]

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(train_idx)
        weighted = 0.0
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            a = data.inputs[batch][..., None]
            u = data.targets[batch][..., None]
            loss = ad.relative_l2_loss(model(x_grid, a), u)
            grads = ad.gradients(loss, leaves)
            adam_step(named, grads, state, cfg)
            weighted += loss.item() * batch.size
        val = _mean_error(model, data, "val")
        test = _mean_error(model, data, "test")
        record = EpochRecord(epoch + 1, weighted / order.size, val, test, time.perf_counter() - t0)
        progress.records.append(record)
        # NaN validation (no val split) keeps the latest model.
        if not val >= progress.best_val:
            progress.best_val, progress.best_epoch = val, epoch + 1
            best = model.copy()
        if on_epoch is not None:
            on_epoch(record)
    for leaf in leaves:
        leaf.grad = None
    return best, progress.records
