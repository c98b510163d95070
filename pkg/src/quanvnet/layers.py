"""From-scratch network layers with explicit forward/backward passes.

All tensors are channel-last: (N, H, W, C) for spatial layers, (N, F) for
dense ones.  Layers cache what their backward pass needs; parameters and
gradients are exposed as aligned lists so the optimizer stays layer-agnostic.
Float32 is the training dtype; every layer also works in float64 so the
whole model can be checked against finite differences.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

KERNEL = 3
POOL = 2


def he_uniform(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator, dtype):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base layer: no parameters, identity bookkeeping."""

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def forward(self, x: np.ndarray, training: bool, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError


class Conv2D(Layer):
    """3x3 valid convolution, stride 1, ReLU activation."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 dtype=np.float32):
        fan_in = KERNEL * KERNEL * in_channels
        self.weights = he_uniform((KERNEL, KERNEL, in_channels, out_channels), fan_in,
                                  rng, dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self.d_weights = np.zeros_like(self.weights)
        self.d_bias = np.zeros_like(self.bias)
        self._windows = None
        self._active = None

    def params(self):
        return [self.weights, self.bias]

    def grads(self):
        return [self.d_weights, self.d_bias]

    def output_shape(self, input_shape):
        h, w, _ = input_shape
        if h < KERNEL or w < KERNEL:
            raise DimensionError(f"input {h}x{w} smaller than {KERNEL}x{KERNEL} kernel")
        return (h - KERNEL + 1, w - KERNEL + 1, self.weights.shape[3])

    def forward(self, x, training, rng=None):
        if x.ndim != 4 or x.shape[3] != self.weights.shape[2]:
            raise DimensionError(
                f"conv expects (N,H,W,{self.weights.shape[2]}), got {x.shape}"
            )
        # windows: (N, H-2, W-2, kh, kw, C); tensordot contracts the kernel axes.
        windows = sliding_window_view(x, (KERNEL, KERNEL), axis=(1, 2))
        windows = windows.transpose(0, 1, 2, 4, 5, 3)
        z = np.tensordot(windows, self.weights, axes=([3, 4, 5], [0, 1, 2])) + self.bias
        self._windows = windows
        self._active = z > 0
        return np.maximum(z, 0)

    def backward(self, dout, need_input_grad=True):
        dz = dout * self._active
        self.d_weights = np.tensordot(self._windows, dz, axes=([0, 1, 2], [0, 1, 2]))
        self.d_bias = dz.sum(axis=(0, 1, 2))
        if not need_input_grad:
            return None
        # dx is the full correlation of dz with the kernel transposed in
        # its channel axes and flipped spatially.
        pad = KERNEL - 1
        dz_pad = np.pad(dz, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
        dz_windows = sliding_window_view(dz_pad, (KERNEL, KERNEL), axis=(1, 2))
        dz_windows = dz_windows.transpose(0, 1, 2, 4, 5, 3)
        w_flip = self.weights[::-1, ::-1]
        return np.tensordot(dz_windows, w_flip, axes=([3, 4, 5], [0, 1, 3]))


class MaxPool2(Layer):
    """2x2 max pooling, stride 2; a trailing odd row/column is dropped.

    Ties go to the first element of the window in row-major order.
    """

    def __init__(self):
        self._mask = None
        self._input_shape = None

    def output_shape(self, input_shape):
        h, w, c = input_shape
        if h < POOL or w < POOL:
            raise DimensionError(f"input {h}x{w} smaller than {POOL}x{POOL} window")
        return (h // POOL, w // POOL, c)

    def forward(self, x, training, rng=None):
        n, h, w, c = x.shape
        if h < POOL or w < POOL:
            raise DimensionError(f"input {h}x{w} smaller than {POOL}x{POOL} window")
        oh, ow = h // POOL, w // POOL
        cropped = x[:, : oh * POOL, : ow * POOL, :]
        windows = cropped.reshape(n, oh, POOL, ow, POOL, c).transpose(0, 1, 3, 2, 4, 5)
        flat = windows.reshape(n, oh, ow, POOL * POOL, c)
        best = np.argmax(flat, axis=3)
        self._mask = best
        self._input_shape = x.shape
        return np.take_along_axis(flat, best[:, :, :, None, :], axis=3)[:, :, :, 0, :]

    def backward(self, dout):
        n, oh, ow, c = dout.shape
        flat = np.zeros((n, oh, ow, POOL * POOL, c), dtype=dout.dtype)
        np.put_along_axis(flat, self._mask[:, :, :, None, :], dout[:, :, :, None, :],
                          axis=3)
        windows = flat.reshape(n, oh, ow, POOL, POOL, c).transpose(0, 1, 3, 2, 4, 5)
        dx = np.zeros(self._input_shape, dtype=dout.dtype)
        dx[:, : oh * POOL, : ow * POOL, :] = windows.reshape(n, oh * POOL, ow * POOL, c)
        return dx


class Dropout(Layer):
    """Inverted dropout: zero with probability rate, scale survivors."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise DimensionError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def output_shape(self, input_shape):
        return input_shape

    def forward(self, x, training, rng=None):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        keep = (rng.random(x.shape) >= self.rate).astype(x.dtype)
        self._mask = keep / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask


class Flatten(Layer):
    def __init__(self):
        self._input_shape = None

    def output_shape(self, input_shape):
        size = 1
        for dim in input_shape:
            size *= dim
        return (size,)

    def forward(self, x, training, rng=None):
        self._input_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._input_shape)


class Dense(Layer):
    """Affine map with optional ReLU."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 relu: bool = True, dtype=np.float32):
        self.weights = he_uniform((in_features, out_features), in_features, rng, dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self.relu = relu
        self.d_weights = np.zeros_like(self.weights)
        self.d_bias = np.zeros_like(self.bias)
        self._x = None
        self._active = None

    def params(self):
        return [self.weights, self.bias]

    def grads(self):
        return [self.d_weights, self.d_bias]

    def output_shape(self, input_shape):
        if input_shape != (self.weights.shape[0],):
            raise DimensionError(
                f"dense expects ({self.weights.shape[0]},), got {input_shape}"
            )
        return (self.weights.shape[1],)

    def forward(self, x, training, rng=None):
        if x.ndim != 2 or x.shape[1] != self.weights.shape[0]:
            raise DimensionError(
                f"dense expects (N,{self.weights.shape[0]}), got {x.shape}"
            )
        z = x @ self.weights + self.bias
        self._x = x
        if self.relu:
            self._active = z > 0
            return np.maximum(z, 0)
        self._active = None
        return z

    def backward(self, dout):
        dz = dout * self._active if self._active is not None else dout
        self.d_weights = self._x.T @ dz
        self.d_bias = dz.sum(axis=0)
        return dz @ self.weights.T


def dropout(x: np.ndarray, rate: float, seed: int, active: bool) -> np.ndarray:
    """Functional inverted dropout, deterministic for a given seed."""
    layer = Dropout(rate)
    return layer.forward(np.asarray(x), active, np.random.default_rng(seed))
