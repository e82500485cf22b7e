"""Layers for the miniature network.

Every layer exposes three entry points:

* ``forward(x)``: pure inference, never mutates the layer, so a model can be
  shared between threads during attribution.
* ``forward_train(x)``: returns ``(y, cache)``. Batchnorm updates its running
  statistics here, which is the only mutation outside the optimizer.
* ``backward(cache, dy)``: returns ``(dx, grads)`` where ``grads`` maps
  parameter names to gradient arrays.

Tensors are float64 numpy arrays in NHWC layout with a leading batch axis.
Trainable parameters are kept on the float32 grid (see :func:`to_f32_grid`) so
that checkpoints written as f32 reload bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .. import kernels


class ShapeError(ValueError):
    """Input tensor does not fit a layer's declared shape."""

    def __init__(self, layer, dim, expected, got):
        self.layer = layer
        self.dim = dim
        self.expected = expected
        self.got = got
        super().__init__(f"{layer}: dimension {dim} expected {expected}, got {got}")


def to_f32_grid(a):
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def _he_uniform(rng, shape, fan_in):
    limit = np.sqrt(6.0 / fan_in)
    return to_f32_grid(rng.uniform(-limit, limit, size=shape))


class Layer:
    kind = "layer"

    def __init__(self):
        self.name = self.kind
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def check_input(self, x):
        pass

    def forward(self, x):
        raise NotImplementedError

    def forward_train(self, x):
        return self.forward(x), x

    def backward(self, cache, dy):
        raise NotImplementedError

    def tensors(self):
        """Parameters then buffers, in a fixed order (checkpoint layout)."""
        return [*self.params.values(), *self.buffers.values()]

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


def _require_ndim(layer, x, ndim):
    if x.ndim != ndim:
        raise ShapeError(layer.name, "ndim", ndim, x.ndim)


class Conv2D(Layer):
    kind = "conv2d"

    def __init__(self, in_channels, filters, kernel_size=3, stride=1, padding="same", rng=None):
        super().__init__()
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.stride = stride
        if padding == "same":
            self.pad = (kernel_size - 1) // 2, kernel_size // 2
        elif padding == "valid":
            self.pad = (0, 0)
        else:
            self.pad = (int(padding), int(padding))
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = kernel_size * kernel_size * in_channels
        self.params["w"] = _he_uniform(rng, (kernel_size, kernel_size, in_channels, filters), fan_in)
        self.params["b"] = np.zeros(filters)

    def check_input(self, x):
        _require_ndim(self, x, 4)
        if x.shape[-1] != self.in_channels:
            raise ShapeError(self.name, "channels", self.in_channels, x.shape[-1])
        lo, hi = self.pad
        for axis, label in ((1, "height"), (2, "width")):
            if x.shape[axis] + lo + hi < self.kernel_size:
                raise ShapeError(self.name, label, f">= {self.kernel_size - lo - hi}", x.shape[axis])

    def _padded(self, x):
        lo, hi = self.pad
        if lo == hi == 0:
            return x
        return np.pad(x, ((0, 0), (lo, hi), (lo, hi), (0, 0)))

    def forward(self, x):
        self.check_input(x)
        return kernels.conv2d_forward(self._padded(x), self.params["w"], self.params["b"], self.stride)

    def forward_train(self, x):
        self.check_input(x)
        xp = self._padded(x)
        return kernels.conv2d_forward(xp, self.params["w"], self.params["b"], self.stride), (xp, x.shape)

    def backward(self, cache, dy):
        xp, shape = cache
        dxp, dw, db = kernels.conv2d_backward(xp, self.params["w"], dy, self.stride)
        lo = self.pad[0]
        dx = dxp[:, lo:lo + shape[1], lo:lo + shape[2], :]
        return dx, {"w": dw, "b": db}


class MaxPool2D(Layer):
    """Non-overlapping max pooling; trailing rows/columns that do not fill a
    window are dropped."""

    kind = "maxpool2d"

    def __init__(self, size=2, stride=None):
        super().__init__()
        stride = size if stride is None else stride
        if stride != size:
            raise ValueError("only non-overlapping pooling (stride == size) is supported")
        self.size = size

    def check_input(self, x):
        _require_ndim(self, x, 4)
        for axis, label in ((1, "height"), (2, "width")):
            if x.shape[axis] < self.size:
                raise ShapeError(self.name, label, f">= {self.size}", x.shape[axis])

    def forward(self, x):
        self.check_input(x)
        return kernels.maxpool_forward(x, self.size)[0]

    def forward_train(self, x):
        self.check_input(x)
        y, idx = kernels.maxpool_forward(x, self.size)
        return y, (idx, x.shape)

    def backward(self, cache, dy):
        idx, shape = cache
        return kernels.maxpool_backward(dy, idx, shape, self.size), {}


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_features, units, rng=None):
        super().__init__()
        self.in_features = in_features
        self.units = units
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["w"] = _he_uniform(rng, (in_features, units), in_features)
        self.params["b"] = np.zeros(units)

    def check_input(self, x):
        _require_ndim(self, x, 2)
        if x.shape[1] != self.in_features:
            raise ShapeError(self.name, "features", self.in_features, x.shape[1])

    def forward(self, x):
        self.check_input(x)
        return x @ self.params["w"] + self.params["b"]

    def backward(self, x, dy):
        return dy @ self.params["w"].T, {"w": x.T @ dy, "b": dy.sum(axis=0)}


class BatchNorm(Layer):
    """Normalizes over every axis except the last (channels/features)."""

    kind = "batchnorm"

    def __init__(self, features, momentum=0.1, eps=1e-5):
        super().__init__()
        self.features = features
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(features)
        self.params["beta"] = np.zeros(features)
        self.buffers["running_mean"] = np.zeros(features)
        self.buffers["running_var"] = np.ones(features)

    def check_input(self, x):
        if x.ndim < 2:
            raise ShapeError(self.name, "ndim", ">= 2", x.ndim)
        if x.shape[-1] != self.features:
            raise ShapeError(self.name, "features", self.features, x.shape[-1])

    def forward(self, x):
        self.check_input(x)
        inv = 1.0 / np.sqrt(self.buffers["running_var"] + self.eps)
        return (x - self.buffers["running_mean"]) * (inv * self.params["gamma"]) + self.params["beta"]

    def forward_train(self, x):
        self.check_input(x)
        axes = tuple(range(x.ndim - 1))
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        m = self.momentum
        count = x.size // self.features
        unbiased = var * count / max(count - 1, 1)
        self.buffers["running_mean"] = to_f32_grid((1 - m) * self.buffers["running_mean"] + m * mean)
        self.buffers["running_var"] = to_f32_grid((1 - m) * self.buffers["running_var"] + m * unbiased)
        return xhat * self.params["gamma"] + self.params["beta"], (xhat, inv, axes)

    def backward(self, cache, dy):
        xhat, inv, axes = cache
        grads = {"gamma": (dy * xhat).sum(axis=axes), "beta": dy.sum(axis=axes)}
        dxhat = dy * self.params["gamma"]
        dx = inv * (dxhat - dxhat.mean(axis=axes) - xhat * (dxhat * xhat).mean(axis=axes))
        return dx, grads


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        return np.maximum(x, 0.0)

    def backward(self, x, dy):
        return dy * (x > 0), {}


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(y, dy, axis=-1):
    return y * (dy - (dy * y).sum(axis=axis, keepdims=True))


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x):
        return softmax(x)

    def forward_train(self, x):
        y = softmax(x)
        return y, y

    def backward(self, y, dy):
        return softmax_backward(y, dy), {}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x):
        return x.reshape(x.shape[0], -1)

    def forward_train(self, x):
        return self.forward(x), x.shape

    def backward(self, shape, dy):
        return dy.reshape(shape), {}


class Sequential:
    def __init__(self, layers, name="seq"):
        self.layers = list(layers)
        self.name = name
        for i, layer in enumerate(self.layers):
            layer.name = f"{name}.{i}.{layer.kind}"

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_train(self, x):
        caches = []
        for layer in self.layers:
            x, c = layer.forward_train(x)
            caches.append(c)
        return x, caches

    def backward(self, caches, dy):
        grads = {}
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            dy, g = layer.backward(c, dy)
            for k, v in g.items():
                grads[f"{layer.name}.{k}"] = v
        return dy, grads

    def named_parameters(self):
        for layer in self.layers:
            for k, v in layer.params.items():
                yield f"{layer.name}.{k}", layer, k


def output_shape(seq, in_shape):
    """Trace a zero batch through ``seq`` to find its per-sample output shape."""
    return seq.forward(np.zeros((1, *in_shape))).shape[1:]
