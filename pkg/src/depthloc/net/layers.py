"""Dense, convolution and pooling primitives with exact backward passes.

Everything is a pure function and follows the dtype of its inputs, so the
same code path runs in float32 for training and float64 for the
finite-difference gradient harness.

Convolutions are 'same'-padded, stride 1, and are evaluated image by image
as im2col matrix products: the per-image column buffer stays cache-resident
across the batch, which on memory-starved hosts is several times faster
than batching the im2col. Internal scratch buffers are recycled between
calls (keyed by shape and dtype, per thread) because training hits the same
shapes thousands of times and fresh large allocations cost more in page
faults than the arithmetic they serve.
"""

from __future__ import annotations

import threading

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_scratch_store = threading.local()


def _scratch(name: str, shape: tuple, dtype) -> np.ndarray:
    pool = getattr(_scratch_store, "pool", None)
    if pool is None:
        pool = _scratch_store.pool = {}
    key = (name, shape, np.dtype(dtype).str)
    buf = pool.get(key)
    if buf is None:
        buf = pool[key] = np.empty(shape, dtype=dtype)
    return buf


def clear_scratch() -> None:
    """Drop this thread's recycled buffers (frees a few hundred MB after
    large-batch training)."""
    if hasattr(_scratch_store, "pool"):
        _scratch_store.pool = {}


def _padded(x: np.ndarray, ph: int, pw: int, key: str) -> np.ndarray:
    n, h, w, c = x.shape
    xp = _scratch(key, (n, h + 2 * ph, w + 2 * pw, c), x.dtype)
    xp[:, :ph, :, :] = 0
    xp[:, ph + h :, :, :] = 0
    xp[:, :, :pw, :] = 0
    xp[:, :, pw + w :, :] = 0
    xp[:, ph : ph + h, pw : pw + w, :] = x
    return xp


def conv2d_same(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, relu: bool = False
) -> np.ndarray:
    """x: (n, h, w, cin), w: (kh, kw, cin, cout), b: (cout,) -> (n, h, w, cout)."""
    n, h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    xp = _padded(x, kh // 2, kw // 2, "conv_xp")
    wmat = w.reshape(kh * kw * cin, cout)
    cols = _scratch("conv_cols", (h * wd, kh * kw * cin), x.dtype)
    colsr = cols.reshape(h, wd, kh, kw, cin)
    y = np.empty((n, h, wd, cout), dtype=x.dtype)
    for ni in range(n):
        v = sliding_window_view(xp[ni], (kh, kw), axis=(0, 1))
        np.copyto(colsr, v.transpose(0, 1, 3, 4, 2))
        np.matmul(cols, wmat, out=y[ni].reshape(h * wd, cout))
    y += b
    if relu:
        np.maximum(y, 0, out=y)
    return y


def conv2d_same_backward(
    x: np.ndarray, w: np.ndarray, dy: np.ndarray, need_dx: bool = True
) -> tuple[np.ndarray | None, np.ndarray, np.ndarray]:
    """Gradients (dx, dw, db) of conv2d_same (pre-activation) for upstream
    gradient dy. Set need_dx=False for the first layer to skip the unused
    input gradient."""
    n, h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    xp = _padded(x, kh // 2, kw // 2, "convb_xp")
    db = dy.sum(axis=(0, 1, 2))
    dwmat = np.zeros((kh * kw * cin, cout), dtype=x.dtype)
    cols = _scratch("convb_cols", (h * wd, kh * kw * cin), x.dtype)
    colsr = cols.reshape(h, wd, kh, kw, cin)
    for ni in range(n):
        v = sliding_window_view(xp[ni], (kh, kw), axis=(0, 1))
        np.copyto(colsr, v.transpose(0, 1, 3, 4, 2))
        dwmat += cols.T @ dy[ni].reshape(h * wd, cout)
    dx = None
    if need_dx:
        # For stride-1 same padding, dx is itself a same-padded convolution
        # of dy with the kernel flipped spatially and transposed in channels.
        w_t = np.ascontiguousarray(w[::-1, ::-1].transpose(0, 1, 3, 2))
        dx = conv2d_same(dy, w_t, np.zeros(cin, dtype=x.dtype))
    return dx, dwmat.reshape(w.shape), db


def maxpool2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 max pool, stride 2. Returns (y, selector) where the uint8 selector
    encodes which of the four window positions (row-major order) won; ties go
    to the earliest position so forward and backward stay consistent."""
    n, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError("maxpool2 requires even spatial dimensions")
    x00 = x[:, 0::2, 0::2, :]
    x01 = x[:, 0::2, 1::2, :]
    x10 = x[:, 1::2, 0::2, :]
    x11 = x[:, 1::2, 1::2, :]
    top_sel = x01 > x00
    top = np.where(top_sel, x01, x00)
    bot_sel = x11 > x10
    bot = np.where(bot_sel, x11, x10)
    bot_wins = bot > top
    y = np.where(bot_wins, bot, top)
    sel = np.where(
        bot_wins, bot_sel.astype(np.uint8) + 2, top_sel.astype(np.uint8)
    )
    return y, sel


def maxpool2_backward(sel: np.ndarray, x_shape: tuple, dy: np.ndarray) -> np.ndarray:
    n, h, w, c = x_shape
    dx = np.zeros(x_shape, dtype=dy.dtype)
    views = (
        dx[:, 0::2, 0::2, :],
        dx[:, 0::2, 1::2, :],
        dx[:, 1::2, 0::2, :],
        dx[:, 1::2, 1::2, :],
    )
    for k, view in enumerate(views):
        np.copyto(view, dy, where=(sel == k))
    return dx


def relu_backward_from_output(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Gradient through ReLU given the post-activation output."""
    return dy * (y > 0)


def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def dense_backward(
    x: np.ndarray, w: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


def softmax(z: np.ndarray) -> np.ndarray:
    """Softmax over the last axis."""
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))
