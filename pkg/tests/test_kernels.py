import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from dncshap import _pykernels, kernels

compiled_only = pytest.mark.skipif("compiled" not in kernels.available_backends(), reason="extension not built")


def test_identity_kernel_sums_window(each_backend):
    x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 2, 2, 1)
    w = np.ones((2, 2, 1, 1))
    y = kernels.conv2d_forward(x, w, np.zeros(1))
    assert y.shape == (1, 1, 1, 1) and y[0, 0, 0, 0] == 10.0
    w2 = np.array([[1.0, 0.0], [0.0, 1.0]]).reshape(2, 2, 1, 1)
    assert kernels.conv2d_forward(x, w2, np.zeros(1))[0, 0, 0, 0] == 5.0


def test_maxpool_example(each_backend):
    x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 2, 2, 1)
    y, idx = kernels.maxpool_forward(x, 2)
    assert y.ravel().tolist() == [4.0]
    dx = kernels.maxpool_backward(np.ones((1, 1, 1, 1)), idx, x.shape, 2)
    assert dx.ravel().tolist() == [0.0, 0.0, 0.0, 1.0]


def test_maxpool_tie_routes_to_first(each_backend):
    x = np.full((1, 2, 2, 1), 7.0)
    y, idx = kernels.maxpool_forward(x, 2)
    dx = kernels.maxpool_backward(np.ones((1, 1, 1, 1)), idx, x.shape, 2)
    assert dx.ravel().tolist() == [1.0, 0.0, 0.0, 0.0]


@compiled_only
@pytest.mark.parametrize("shape,stride", [((2, 9, 7, 3), 1), ((1, 10, 10, 2), 2), ((3, 5, 5, 1), 1)])
def test_backends_agree(shape, stride):
    from dncshap import _ckernels

    rng = np.random.default_rng(1)
    x = rng.standard_normal(shape)
    x[x < -1] = 0.0  # exercise the zero-skip path
    w = rng.standard_normal((3, 3, shape[3], 4))
    b = rng.standard_normal(4)
    y_py = _pykernels.conv2d_forward(x, w, b, stride)
    y_c = _ckernels.conv2d_forward(x, w, b, stride)
    np.testing.assert_allclose(y_c, y_py, rtol=0, atol=1e-12)
    dy = rng.standard_normal(y_py.shape)
    for a, c in zip(_pykernels.conv2d_backward(x, w, dy, stride), _ckernels.conv2d_backward(x, w, dy, stride)):
        np.testing.assert_allclose(c, a, rtol=0, atol=1e-12)
    xp = rng.standard_normal((2, 8, 6, 3))
    yp, ip = _pykernels.maxpool_forward(xp, 2)
    yc, ic = _ckernels.maxpool_forward(xp, 2)
    np.testing.assert_array_equal(yp, yc)
    dyp = rng.standard_normal(yp.shape)
    np.testing.assert_array_equal(
        _pykernels.maxpool_backward(dyp, ip, xp.shape, 2), _ckernels.maxpool_backward(dyp, ic, xp.shape, 2)
    )


def test_use_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.use_backend("gpu")


def test_env_forces_python_fallback():
    env = dict(os.environ, DNCSHAP_KERNELS="python")
    out = subprocess.run(
        [sys.executable, "-c", "from dncshap import kernels; print(kernels.backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_default_prefers_compiled():
    mod = importlib.reload(kernels)
    forced = os.environ.get("DNCSHAP_KERNELS") == "python"
    want = "compiled" if "compiled" in mod.available_backends() and not forced else "python"
    assert mod.backend() == want
