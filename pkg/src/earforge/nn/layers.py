"""Layer forward/backward kernels on NHWC numpy arrays.

Each layer is a small stateless object: parameters live in an external dict
owned by the network, and ``forward`` returns a cache consumed by
``backward``.  Convolutions use TensorFlow-style SAME padding (extra pixel on
the bottom/right for even kernels) so the published table shapes reproduce
exactly.  Max pooling splits gradients equally among tied maxima.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ShapeMismatchError


def _same_pad(h, w, kh, kw, stride):
    oh = -(-h // stride)
    ow = -(-w // stride)
    ph = max((oh - 1) * stride + kh - h, 0)
    pw = max((ow - 1) * stride + kw - w, 0)
    return oh, ow, (ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)


class ConvRelu:
    """2-D convolution with SAME padding and optional fused ReLU."""

    def __init__(self, filters, kernel=(3, 3), stride=1, relu=True):
        self.filters = filters
        self.kernel = tuple(kernel)
        self.stride = stride
        self.relu = relu

    def out_shape(self, in_shapes):
        h, w, _ = in_shapes[0]
        oh, ow, _, _ = _same_pad(h, w, *self.kernel, self.stride)
        return (oh, ow, self.filters)

    def init_params(self, in_shapes, rng, dtype):
        cin = in_shapes[0][2]
        kh, kw = self.kernel
        fan_in = kh * kw * cin
        std = np.sqrt(2.0 / fan_in) if self.relu else np.sqrt(1.0 / fan_in)
        w = (rng.standard_normal((kh, kw, cin, self.filters)) * std).astype(dtype)
        b = np.zeros(self.filters, dtype=dtype)
        return {"w": w, "b": b}

    def forward(self, params, xs, train, rng):
        x = xs[0]
        if x.ndim != 4:
            raise ShapeMismatchError(f"conv expects NHWC input, got shape {x.shape}")
        n, h, wd, cin = x.shape
        kh, kw = self.kernel
        s = self.stride
        oh, ow, (pt, pb), (pl, pr) = _same_pad(h, wd, kh, kw, s)
        xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        w, b = params["w"], params["b"]
        y = np.broadcast_to(b, (n, oh, ow, self.filters)).copy()
        for i in range(kh):
            for j in range(kw):
                patch = xp[:, i : i + s * oh : s, j : j + s * ow : s, :]
                y += patch @ w[i, j]
        mask = None
        if self.relu:
            mask = y > 0
            y = np.where(mask, y, 0)
        return y, (xp, x.shape, mask)

    def backward(self, params, cache, dy):
        xp, x_shape, mask = cache
        if mask is not None:
            dy = dy * mask
        n, h, wd, cin = x_shape
        kh, kw = self.kernel
        s = self.stride
        oh, ow = dy.shape[1], dy.shape[2]
        _, _, (pt, _), (pl, _) = _same_pad(h, wd, kh, kw, s)
        w = params["w"]
        dw = np.empty_like(w)
        dxp = np.zeros_like(xp)
        dy_flat = dy.reshape(-1, self.filters)
        for i in range(kh):
            for j in range(kw):
                patch = xp[:, i : i + s * oh : s, j : j + s * ow : s, :]
                dw[i, j] = patch.reshape(-1, cin).T @ dy_flat
                dxp[:, i : i + s * oh : s, j : j + s * ow : s, :] += dy @ w[i, j].T
        db = dy_flat.sum(axis=0)
        dx = dxp[:, pt : pt + h, pl : pl + wd, :]
        return [dx], {"w": dw, "b": db}


class MaxPool:
    """Non-overlapping max pooling; trailing rows/cols that do not fill a
    window are dropped (table sizes always divide evenly)."""

    def __init__(self, pool=2, stride=None):
        self.pool = pool
        if stride is not None and stride != pool:
            raise ValueError("only stride == pool supported")

    def out_shape(self, in_shapes):
        h, w, c = in_shapes[0]
        return (h // self.pool, w // self.pool, c)

    def init_params(self, in_shapes, rng, dtype):
        return {}

    def forward(self, params, xs, train, rng):
        x = xs[0]
        p = self.pool
        n, h, w, c = x.shape
        oh, ow = h // p, w // p
        xr = x[:, : oh * p, : ow * p, :].reshape(n, oh, p, ow, p, c)
        y = xr.max(axis=(2, 4))
        mask = xr == y[:, :, None, :, None, :]
        return y, (mask, x.shape)

    def backward(self, params, cache, dy):
        mask, x_shape = cache
        p = self.pool
        n, h, w, c = x_shape
        oh, ow = h // p, w // p
        counts = mask.sum(axis=(2, 4), keepdims=True)
        dxr = mask / counts * dy[:, :, None, :, None, :]
        dx = np.zeros(x_shape, dtype=dy.dtype)
        dx[:, : oh * p, : ow * p, :] = dxr.reshape(n, oh * p, ow * p, c)
        return [dx], {}


class Dropout:
    """Inverted dropout: active only in train mode, identity in eval."""

    def __init__(self, rate):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate {rate} outside [0, 1)")
        self.rate = rate

    def out_shape(self, in_shapes):
        return in_shapes[0]

    def init_params(self, in_shapes, rng, dtype):
        return {}

    def forward(self, params, xs, train, rng):
        x = xs[0]
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) >= self.rate).astype(x.dtype) / keep
        return x * mask, mask

    def backward(self, params, cache, dy):
        if cache is None:
            return [dy], {}
        return [dy * cache], {}


class Flatten:
    def out_shape(self, in_shapes):
        return (int(np.prod(in_shapes[0])),)

    def init_params(self, in_shapes, rng, dtype):
        return {}

    def forward(self, params, xs, train, rng):
        x = xs[0]
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, params, cache, dy):
        return [dy.reshape(cache)], {}


class Concat:
    """Concatenate flat feature vectors from two or more nodes."""

    def out_shape(self, in_shapes):
        if any(len(s) != 1 for s in in_shapes):
            raise ShapeMismatchError(f"concat expects flat inputs, got {in_shapes}")
        return (sum(s[0] for s in in_shapes),)

    def init_params(self, in_shapes, rng, dtype):
        return {}

    def forward(self, params, xs, train, rng):
        return np.concatenate(xs, axis=1), [x.shape[1] for x in xs]

    def backward(self, params, cache, dy):
        splits = np.cumsum(cache)[:-1]
        return list(np.split(dy, splits, axis=1)), {}


class Dense:
    """Fully-connected layer with optional fused ReLU."""

    def __init__(self, width, relu=False):
        self.width = width
        self.relu = relu

    def out_shape(self, in_shapes):
        if len(in_shapes[0]) != 1:
            raise ShapeMismatchError(f"dense expects a flat input, got {in_shapes[0]}")
        return (self.width,)

    def init_params(self, in_shapes, rng, dtype):
        fan_in = in_shapes[0][0]
        std = np.sqrt(2.0 / fan_in) if self.relu else np.sqrt(1.0 / fan_in)
        w = (rng.standard_normal((fan_in, self.width)) * std).astype(dtype)
        b = np.zeros(self.width, dtype=dtype)
        return {"w": w, "b": b}

    def forward(self, params, xs, train, rng):
        x = xs[0]
        if x.ndim != 2 or x.shape[1] != params["w"].shape[0]:
            raise ShapeMismatchError(
                f"dense expects (n, {params['w'].shape[0]}), got {x.shape}")
        y = x @ params["w"] + params["b"]
        mask = None
        if self.relu:
            mask = y > 0
            y = np.where(mask, y, 0)
        return y, (x, mask)

    def backward(self, params, cache, dy):
        x, mask = cache
        if mask is not None:
            dy = dy * mask
        dw = x.T @ dy
        db = dy.sum(axis=0)
        dx = dy @ params["w"].T
        return [dx], {"w": dw, "b": db}
