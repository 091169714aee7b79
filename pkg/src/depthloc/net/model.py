"""The grid detector network: architecture, forward pass, loss, exact gradients.

Two VGG-style blocks (two 3x3 convolutions plus a 2x2 max pool each) feed a
dense stack whose final layer emits, per grid cell, four linear box values
(x, y, w, h) and a two-way softmax over (n, p). The loss combines per-cell
categorical cross-entropy on (n, p) with a squared-distance term on the box
values that is switched off for cells with no object in the ground truth.

The network consumes height above the floor, normalized by the floor depth,
so the empty background sits at exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..depthmap import DepthMap
from ..synth import GroundTruthGrid
from . import layers


@dataclass(frozen=True)
class NetArch:
    input_w: int = 160
    input_h: int = 120
    conv_channels: tuple[int, int] = (16, 32)
    dense_widths: tuple[int, ...] = (256,)
    s: int = 5

    def __post_init__(self):
        if self.input_w % 4 or self.input_h % 4:
            raise ValueError("input dimensions must be divisible by 4 (two pools)")
        if len(self.conv_channels) != 2:
            raise ValueError("expected channel counts for exactly two conv blocks")
        if not self.dense_widths:
            raise ValueError("at least one dense layer is required")
        if self.s < 1:
            raise ValueError("s must be >= 1")

    @property
    def head_width(self) -> int:
        return 6 * self.s * self.s

    @property
    def flat_width(self) -> int:
        return (self.input_w // 4) * (self.input_h // 4) * self.conv_channels[1]

    def param_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        """Parameter tensors in declaration order (the checkpoint order)."""
        c1, c2 = self.conv_channels
        shapes = [
            ("conv1_w", (3, 3, 1, c1)),
            ("conv1_b", (c1,)),
            ("conv2_w", (3, 3, c1, c1)),
            ("conv2_b", (c1,)),
            ("conv3_w", (3, 3, c1, c2)),
            ("conv3_b", (c2,)),
            ("conv4_w", (3, 3, c2, c2)),
            ("conv4_b", (c2,)),
        ]
        fan = self.flat_width
        for i, width in enumerate(self.dense_widths, start=1):
            shapes += [(f"dense{i}_w", (fan, width)), (f"dense{i}_b", (width,))]
            fan = width
        shapes += [("head_w", (fan, self.head_width)), ("head_b", (self.head_width,))]
        return shapes

    def to_dict(self) -> dict:
        return {
            "input_w": self.input_w,
            "input_h": self.input_h,
            "conv_channels": list(self.conv_channels),
            "dense_widths": list(self.dense_widths),
            "s": self.s,
        }

    @staticmethod
    def from_dict(d: dict) -> "NetArch":
        return NetArch(
            input_w=d["input_w"],
            input_h=d["input_h"],
            conv_channels=tuple(d["conv_channels"]),
            dense_widths=tuple(d["dense_widths"]),
            s=d["s"],
        )


@dataclass
class NetworkParams:
    arch: NetArch
    tensors: dict[str, np.ndarray]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.arch, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "NetworkParams":
        return NetworkParams(
            self.arch, {k: v.astype(dtype) for k, v in self.tensors.items()}
        )

    def allclose(self, other: "NetworkParams") -> bool:
        return self.arch == other.arch and all(
            np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors
        )


@dataclass(frozen=True)
class LossWeights:
    lambda_h: float = 1.0
    lambda_l2: float = 5.0

    def __post_init__(self):
        if self.lambda_h < 0 or self.lambda_l2 < 0:
            raise ValueError("loss weights must be >= 0")
        if self.lambda_h == 0 and self.lambda_l2 == 0:
            raise ValueError("loss weights must not both be zero")


@dataclass(frozen=True)
class GridPrediction:
    """Per-cell network output: raw box values and the (n, p) softmax pair."""

    s: int
    spatial: np.ndarray = field(repr=False)  # (s^2, 4): x, y, w, h
    probs: np.ndarray = field(repr=False)  # (s^2, 2): n, p

    @property
    def p(self) -> np.ndarray:
        return self.probs[:, 1]


def init(arch: NetArch, seed: int) -> NetworkParams:
    """Fan-in-scaled uniform weights (|w| <= sqrt(6/fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in arch.param_shapes():
        if name.endswith("_b"):
            tensors[name] = np.zeros(shape, dtype=np.float32)
        else:
            fan_in = int(np.prod(shape[:-1]))
            bound = np.sqrt(6.0 / fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return NetworkParams(arch, tensors)


def normalize_input(image: DepthMap) -> np.ndarray:
    """(floor_depth - d) / floor_depth: height above floor in [0, 1)."""
    return ((image.floor_depth - image.depths) / image.floor_depth).astype(np.float32)


def forward_batch(params: NetworkParams, x: np.ndarray, want_cache: bool = False):
    """x: (n, h, w, 1) normalized input -> (spatial (n, s^2, 4),
    logits (n, s^2, 2)[, cache])."""
    a = params.arch
    t = params.tensors
    n = x.shape[0]

    a1 = layers.conv2d_same(x, t["conv1_w"], t["conv1_b"], relu=True)
    a2 = layers.conv2d_same(a1, t["conv2_w"], t["conv2_b"], relu=True)
    p1, p1_idx = layers.maxpool2(a2)
    a3 = layers.conv2d_same(p1, t["conv3_w"], t["conv3_b"], relu=True)
    a4 = layers.conv2d_same(a3, t["conv4_w"], t["conv4_b"], relu=True)
    p2, p2_idx = layers.maxpool2(a4)
    flat = p2.reshape(n, -1)

    h = flat
    dense_act: list[np.ndarray] = [flat]
    for i in range(1, len(a.dense_widths) + 1):
        h = np.maximum(layers.dense(h, t[f"dense{i}_w"], t[f"dense{i}_b"]), 0)
        dense_act.append(h)
    out = layers.dense(h, t["head_w"], t["head_b"]).reshape(n, a.s * a.s, 6)
    spatial = out[:, :, :4]
    logits = out[:, :, 4:]

    if not want_cache:
        return spatial, logits
    cache = {
        "x": x, "a1": a1, "a2": a2, "p1": p1, "p1_idx": p1_idx,
        "a3": a3, "a4": a4, "p2": p2, "p2_idx": p2_idx,
        "dense_act": dense_act,
    }
    return spatial, logits, cache


def forward(params: NetworkParams, image: DepthMap) -> GridPrediction:
    """Single-image forward pass producing per-cell probabilities."""
    a = params.arch
    if image.shape != (a.input_h, a.input_w):
        raise ValueError(
            f"image is {image.width}x{image.height}, "
            f"network expects {a.input_w}x{a.input_h}"
        )
    x = normalize_input(image)[None, :, :, None].astype(
        next(iter(params.tensors.values())).dtype
    )
    spatial, logits = forward_batch(params, x)
    return GridPrediction(
        s=a.s, spatial=spatial[0], probs=layers.softmax(logits)[0]
    )


def loss(pred: GridPrediction, truth: GroundTruthGrid, w: LossWeights) -> float:
    """Eq.-style loss on probabilities: sum over cells of weighted
    cross-entropy on (n, p) plus the occupancy-switched squared box distance.

    Terms whose ground-truth weight is zero contribute exactly zero, so a
    prediction matching a hard-label truth scores exactly 0.
    """
    if pred.s != truth.grid.s:
        raise ValueError("prediction and truth grids differ in size")
    if not (np.isfinite(pred.spatial).all() and np.isfinite(pred.probs).all()):
        raise ValueError("non-finite prediction")
    t_sp = np.array([[c.x, c.y, c.w, c.h] for c in truth.cells], dtype=np.float64)
    t_p = np.array([c.p for c in truth.cells], dtype=np.float64)
    gt = np.stack([1.0 - t_p, t_p], axis=-1)
    probs = pred.probs.astype(np.float64)
    logp = np.where(gt > 0, np.log(np.maximum(probs, 1e-300)), 0.0)
    ce = -(gt * logp).sum(axis=-1)
    sq = ((pred.spatial.astype(np.float64) - t_sp) ** 2).sum(axis=-1)
    return float((w.lambda_h * ce + w.lambda_l2 * t_p * sq).sum())


def loss_and_grads_from_logits(
    spatial: np.ndarray,
    logits: np.ndarray,
    t_sp: np.ndarray,
    t_p: np.ndarray,
    w: LossWeights,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean per-image loss over the batch and its gradients w.r.t. the raw
    head outputs. Shapes: spatial/t_sp (n, s^2, 4), logits (n, s^2, 2),
    t_p (n, s^2)."""
    n = spatial.shape[0]
    gt = np.stack([1.0 - t_p, t_p], axis=-1)
    logp = layers.log_softmax(logits)
    ce = -(gt * logp).sum(axis=-1)
    diff = spatial - t_sp
    sq = (diff * diff).sum(axis=-1)
    per_image = (w.lambda_h * ce + w.lambda_l2 * t_p * sq).sum(axis=-1)
    total = float(per_image.mean())
    dlogits = (layers.softmax(logits) - gt) * (w.lambda_h / n)
    dspatial = diff * (2.0 * w.lambda_l2 / n) * t_p[..., None]
    return total, dspatial.astype(spatial.dtype), dlogits.astype(logits.dtype)


def backward_batch(
    params: NetworkParams,
    x: np.ndarray,
    t_sp: np.ndarray,
    t_p: np.ndarray,
    w: LossWeights,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch loss and exact gradients for every parameter tensor."""
    a = params.arch
    t = params.tensors
    n = x.shape[0]
    spatial, logits, cache = forward_batch(params, x, want_cache=True)
    total, dspatial, dlogits = loss_and_grads_from_logits(
        spatial, logits, t_sp, t_p, w
    )
    grads: dict[str, np.ndarray] = {}

    dout = np.concatenate([dspatial, dlogits], axis=-1).reshape(n, a.head_width)
    dh, grads["head_w"], grads["head_b"] = layers.dense_backward(
        cache["dense_act"][-1], t["head_w"], dout
    )
    for i in range(len(a.dense_widths), 0, -1):
        dzd = layers.relu_backward_from_output(cache["dense_act"][i], dh)
        dh, grads[f"dense{i}_w"], grads[f"dense{i}_b"] = layers.dense_backward(
            cache["dense_act"][i - 1], t[f"dense{i}_w"], dzd
        )
    dp2 = dh.reshape(cache["p2"].shape)
    da4 = layers.maxpool2_backward(cache["p2_idx"], cache["a4"].shape, dp2)
    dz4 = layers.relu_backward_from_output(cache["a4"], da4)
    da3, grads["conv4_w"], grads["conv4_b"] = layers.conv2d_same_backward(
        cache["a3"], t["conv4_w"], dz4
    )
    dz3 = layers.relu_backward_from_output(cache["a3"], da3)
    dp1, grads["conv3_w"], grads["conv3_b"] = layers.conv2d_same_backward(
        cache["p1"], t["conv3_w"], dz3
    )
    da2 = layers.maxpool2_backward(cache["p1_idx"], cache["a2"].shape, dp1)
    dz2 = layers.relu_backward_from_output(cache["a2"], da2)
    da1, grads["conv2_w"], grads["conv2_b"] = layers.conv2d_same_backward(
        cache["a1"], t["conv2_w"], dz2
    )
    dz1 = layers.relu_backward_from_output(cache["a1"], da1)
    _, grads["conv1_w"], grads["conv1_b"] = layers.conv2d_same_backward(
        cache["x"], t["conv1_w"], dz1, need_dx=False
    )
    return total, grads


def batch_loss(
    params: NetworkParams,
    x: np.ndarray,
    t_sp: np.ndarray,
    t_p: np.ndarray,
    w: LossWeights,
) -> float:
    """Loss only (no gradients); the finite-difference harness calls this."""
    spatial, logits = forward_batch(params, x)
    total, _, _ = loss_and_grads_from_logits(spatial, logits, t_sp, t_p, w)
    return total


def backward(
    params: NetworkParams, image: DepthMap, truth: GroundTruthGrid, w: LossWeights
) -> dict[str, np.ndarray]:
    """Single-image gradients of the loss w.r.t. every parameter."""
    dtype = next(iter(params.tensors.values())).dtype
    x = normalize_input(image)[None, :, :, None].astype(dtype)
    t_sp, t_p = truth.to_arrays()
    _, grads = backward_batch(
        params, x, t_sp[None].astype(dtype), t_p[None].astype(dtype), w
    )
    return grads
