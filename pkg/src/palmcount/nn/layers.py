"""Layers of the crop classifier with explicit forward/backward passes.

Each layer is a plain object holding its parameters.  ``forward`` is pure,
``forward_train`` additionally returns the cache ``backward`` needs, and
``backward`` maps the upstream gradient to the input gradient plus the
per-parameter gradients (same order as ``params()``).

Parameters are stored in float32 by the public model API; all matrix
products accumulate in float64 and the result is cast back to the storage
dtype.  This keeps a window's output independent of how it was batched,
which the sliding-window sweep relies on.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _matmul(a: np.ndarray, b: np.ndarray, out_dtype) -> np.ndarray:
    prod = a.astype(np.float64, copy=False) @ b.astype(np.float64, copy=False)
    return prod.astype(out_dtype, copy=False)


class Conv2d:
    """Valid (no padding) 2D correlation, stride 1.

    weight: (filters, in_channels, k, k), bias: (filters,).
    Input/output layout is NCHW.
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
            raise ValueError(f"conv weight must be (F, C, k, k), got {weight.shape}")
        if bias.shape != (weight.shape[0],):
            raise ValueError(f"conv bias shape {bias.shape} does not match {weight.shape[0]} filters")
        self.weight = weight
        self.bias = bias

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    def params(self):
        return [self.weight, self.bias]

    def output_shape(self, in_shape):
        c, h, w = in_shape
        f, wc, k, _ = self.weight.shape
        if wc != c:
            raise ValueError(f"conv expects {wc} input channels, got {c}")
        if h < k or w < k:
            raise ValueError(f"conv kernel {k} exceeds input {h}x{w}")
        return (f, h - k + 1, w - k + 1)

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        # (N, C, H, W) -> (N * H' * W', C * k * k), gathered in float64
        k = self.kernel
        x64 = x.astype(np.float64, copy=False)
        win = sliding_window_view(x64, (k, k), axis=(2, 3))      # (N, C, H', W', k, k)
        win = win.transpose(0, 2, 3, 1, 4, 5)                    # (N, H', W', C, k, k)
        n, ho, wo = win.shape[:3]
        return win.reshape(n * ho * wo, -1), (n, ho, wo)

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_train(x)
        return y

    def forward_train(self, x: np.ndarray):
        f = self.weight.shape[0]
        cols, (n, ho, wo) = self._im2col(x)
        out = cols @ self.weight.reshape(f, -1).T.astype(np.float64)
        out += self.bias.astype(np.float64)
        y = out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2)
        return y.astype(x.dtype), (x, cols)

    def backward(self, dy: np.ndarray, cache):
        x, cols = cache
        n, f, ho, wo = dy.shape
        k, c = self.kernel, x.shape[1]
        dy_flat = dy.transpose(0, 2, 3, 1).reshape(-1, f)        # (N*H'*W', F)
        dw = _matmul(dy_flat.T, cols, self.weight.dtype).reshape(self.weight.shape)
        db = dy.sum(axis=(0, 2, 3)).astype(self.bias.dtype)
        # dx = full correlation of dy with the spatially flipped, transposed kernel
        pad = k - 1
        dy_padded = np.pad(dy.astype(np.float64, copy=False),
                           ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        w_flip = self.weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)   # (C, F, k, k)
        win = sliding_window_view(dy_padded, (k, k), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5)
        cols_b = win.reshape(n * x.shape[2] * x.shape[3], f * k * k)
        dx = cols_b @ w_flip.reshape(c, -1).T.astype(np.float64)
        dx = dx.reshape(n, x.shape[2], x.shape[3], c).transpose(0, 3, 1, 2)
        return dx.astype(x.dtype), [dw, db]


class MaxPool2d:
    """Non-overlapping max pooling; input sides must divide by ``size``."""

    def __init__(self, size: int = 2):
        if size < 1:
            raise ValueError(f"pool size must be >= 1, got {size}")
        self.size = size

    def params(self):
        return []

    def output_shape(self, in_shape):
        c, h, w = in_shape
        if h % self.size or w % self.size:
            raise ValueError(f"pool size {self.size} does not divide input {h}x{w}")
        return (c, h // self.size, w // self.size)

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_train(x)
        return y

    def forward_train(self, x: np.ndarray):
        s = self.size
        n, c, h, w = x.shape
        if h % s or w % s:
            raise ValueError(f"pool size {s} does not divide input {h}x{w}")
        blocks = x.reshape(n, c, h // s, s, w // s, s)
        y = blocks.max(axis=5).max(axis=3)
        return y, (x, y)

    def backward(self, dy: np.ndarray, cache):
        x, y = cache
        s = self.size
        n, c, h, w = x.shape
        up = np.repeat(np.repeat(y, s, axis=2), s, axis=3)
        mask = (x == up)
        # on ties inside a block, route the gradient to the first max only
        blocks = mask.reshape(n, c, h // s, s, w // s, s).transpose(0, 1, 2, 4, 3, 5)
        flat = blocks.reshape(n, c, h // s, w // s, s * s)
        first = flat.argmax(axis=-1)
        sel = np.zeros_like(flat)
        np.put_along_axis(sel, first[..., None], 1, axis=-1)
        sel = sel.reshape(n, c, h // s, w // s, s, s).transpose(0, 1, 2, 4, 3, 5).reshape(x.shape)
        dup = np.repeat(np.repeat(dy, s, axis=2), s, axis=3)
        dx = (sel * dup).astype(x.dtype)
        return dx, []


class Dense:
    """Affine layer y = x W^T + b with weight (out, in)."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        if weight.ndim != 2:
            raise ValueError(f"dense weight must be 2D, got {weight.shape}")
        if bias.shape != (weight.shape[0],):
            raise ValueError(f"dense bias shape {bias.shape} does not match {weight.shape[0]} units")
        self.weight = weight
        self.bias = bias

    def params(self):
        return [self.weight, self.bias]

    def output_shape(self, in_shape):
        (n_in,) = in_shape
        if n_in != self.weight.shape[1]:
            raise ValueError(f"dense expects {self.weight.shape[1]} inputs, got {n_in}")
        return (self.weight.shape[0],)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return _matmul(x, self.weight.T, x.dtype) + self.bias.astype(x.dtype)

    def forward_train(self, x: np.ndarray):
        return self.forward(x), x

    def backward(self, dy: np.ndarray, cache):
        x = cache
        dw = _matmul(dy.T, x, self.weight.dtype)
        db = dy.sum(axis=0).astype(self.bias.dtype)
        dx = _matmul(dy, self.weight, x.dtype)
        return dx, [dw, db]


class ReLU:
    def params(self):
        return []

    def output_shape(self, in_shape):
        return in_shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0)

    def forward_train(self, x: np.ndarray):
        return np.maximum(x, 0), x

    def backward(self, dy: np.ndarray, cache):
        x = cache
        return (dy * (x > 0)).astype(x.dtype), []


class Flatten:
    def params(self):
        return []

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(x.shape[0], -1)

    def forward_train(self, x: np.ndarray):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy: np.ndarray, cache):
        return dy.reshape(cache), []


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, numerically stable, accumulated in float64."""
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return p.astype(logits.dtype)
