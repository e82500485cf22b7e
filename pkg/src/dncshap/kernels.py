"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled ``_ckernels`` extension is picked at import time when it was
built; set ``DNCSHAP_KERNELS=python`` to force the numpy path. Both backends
agree to floating-point rounding, not bit-for-bit, so determinism guarantees
hold per backend.
"""

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels


def available_backends():
    return sorted(_BACKENDS)


def _default_backend():
    forced = os.environ.get("DNCSHAP_KERNELS", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(f"DNCSHAP_KERNELS={forced!r} but available backends are {available_backends()}")
        return forced
    return "compiled" if "compiled" in _BACKENDS else "python"


_active_name = _default_backend()
_active = _BACKENDS[_active_name]


def backend():
    """Name of the backend currently in use."""
    return _active_name


def use_backend(name):
    """Switch backends process-wide; returns the previous backend name."""
    global _active, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {available_backends()}")
    previous = _active_name
    _active_name, _active = name, _BACKENDS[name]
    return previous


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv2d_forward(x, w, b, stride=1):
    return _active.conv2d_forward(_c(x), _c(w), _c(b), int(stride))


def conv2d_backward(x, w, dy, stride=1):
    return _active.conv2d_backward(_c(x), _c(w), _c(dy), int(stride))


def maxpool_forward(x, size):
    return _active.maxpool_forward(_c(x), int(size))


def maxpool_backward(dy, idx, x_shape, size):
    return _active.maxpool_backward(_c(dy), np.ascontiguousarray(idx, dtype=np.intp), tuple(x_shape), int(size))
