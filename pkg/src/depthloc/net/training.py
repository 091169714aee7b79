"""Mini-batch training loop with seeded shuffling and loss history.

The epoch-e shuffle derives its generator from (seed, e), so a run resumed
from a checkpoint at any epoch boundary continues bit-identically to an
uninterrupted run (the optimizer state travels with the checkpoint).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..synth import Scene
from .model import LossWeights, NetworkParams, backward_batch, batch_loss, normalize_input


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    # Adam is the default: on this loss plain momentum SGD either rings on
    # small fixed sets or plateaus, and misses the overfit contract.
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # adam or sgd (momentum 0.9)
    momentum: float = 0.9
    seed: int = 0
    loss_weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")  # 0 = no-op pass
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class OptState:
    """Per-tensor optimizer buffers; serialized into resume files."""

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def _apply_update(
    params: NetworkParams, grads: dict[str, np.ndarray], cfg: TrainConfig, st: OptState
) -> None:
    st.step += 1
    if cfg.optimizer == "sgd":
        for k, g in grads.items():
            buf = st.m.get(k)
            if buf is None:
                buf = st.m[k] = np.zeros_like(params.tensors[k])
            buf *= cfg.momentum
            buf -= cfg.learning_rate * g
            params.tensors[k] += buf
    else:  # adam
        b1, b2, eps = 0.9, 0.999, 1e-8
        for k, g in grads.items():
            m = st.m.setdefault(k, np.zeros_like(params.tensors[k]))
            v = st.v.setdefault(k, np.zeros_like(params.tensors[k]))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            mhat = m / (1 - b1 ** st.step)
            vhat = v / (1 - b2 ** st.step)
            params.tensors[k] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)


def prepare_arrays(
    scenes: Sequence[Scene], dtype=np.float32
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack scenes into network-ready arrays (x, spatial targets, p targets)."""
    x = np.stack([normalize_input(s.image) for s in scenes])[..., None].astype(dtype)
    t_sp = np.stack([s.truth.to_arrays()[0] for s in scenes]).astype(dtype)
    t_p = np.stack([s.truth.to_arrays()[1] for s in scenes]).astype(dtype)
    return x, t_sp, t_p


def evaluate_loss(
    params: NetworkParams,
    data: tuple[np.ndarray, np.ndarray, np.ndarray],
    w: LossWeights,
    batch_size: int = 64,
) -> float:
    x, t_sp, t_p = data
    n = x.shape[0]
    total = 0.0
    for i in range(0, n, batch_size):
        j = min(i + batch_size, n)
        total += batch_loss(params, x[i:j], t_sp[i:j], t_p[i:j], w) * (j - i)
    return total / n


def train(
    params: NetworkParams,
    scenes: Sequence[Scene],
    cfg: TrainConfig,
    val_scenes: Sequence[Scene] | None = None,
    start_epoch: int = 0,
    opt_state: OptState | None = None,
    history: list[dict] | None = None,
    on_epoch: Callable[[int, NetworkParams, OptState, list[dict]], None] | None = None,
) -> tuple[NetworkParams, list[dict]]:
    """Train in place on a copy of ``params``; returns the trained params and
    the per-epoch loss history. Deterministic for a fixed seed and dataset.

    ``start_epoch``/``opt_state``/``history`` resume an interrupted run:
    passing the values captured at an epoch boundary reproduces the
    uninterrupted result exactly.
    """
    if not scenes:
        raise ValueError("training dataset is empty")
    params = params.copy()
    data = prepare_arrays(scenes)
    val_data = prepare_arrays(val_scenes) if val_scenes else None
    x, t_sp, t_p = data
    n = x.shape[0]
    st = opt_state if opt_state is not None else OptState()
    history = list(history) if history else []
    w = cfg.loss_weights

    for epoch in range(start_epoch, cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        epoch_loss = 0.0
        for i in range(0, n, cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            loss, grads = backward_batch(params, x[idx], t_sp[idx], t_p[idx], w)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            _apply_update(params, grads, cfg, st)
            epoch_loss += loss * len(idx)
        row = {"epoch": epoch, "train_loss": epoch_loss / n}
        if val_data is not None:
            row["val_loss"] = evaluate_loss(params, val_data, w, cfg.batch_size)
        history.append(row)
        if on_epoch is not None:
            on_epoch(epoch, params, st, history)
    return params, history


def history_to_csv(history: list[dict]) -> str:
    lines = ["epoch,train_loss,val_loss"]
    for row in history:
        val = row.get("val_loss")
        lines.append(
            f"{row['epoch']},{row['train_loss']!r},{'' if val is None else repr(val)}"
        )
    return "\n".join(lines) + "\n"
