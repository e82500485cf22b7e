import numpy as np
import pytest

from dncshap import kernels
from dncshap.fusion import FusionConfig, FusionModel
from dncshap.nn.layers import softmax

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=kernels.available_backends())
def each_backend(request):
    previous = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


def tiny_config(seed=0, topology="proposed", size=8):
    return FusionConfig.mini(
        size=size, topology=topology, seed=seed,
        plain_filters=(2, 2, 2), backbone_filters=(2, 2, 2), embed_width=8, head_width=8,
    )


def tiny_model(seed=0, topology="proposed", size=8):
    return FusionModel(tiny_config(seed, topology, size))


class RandomMLP:
    """Seeded nonlinear stand-in model for arbitrary (tiny) input shapes."""

    def __init__(self, seed, h, w, hidden=6, k=4):
        rng = np.random.default_rng(seed)
        self.w1 = rng.normal(size=(h * w * 4, hidden))
        self.w2 = rng.normal(size=(hidden, k)) * 2
        self.img_shape, self.spc_shape = (h, w, 3), (h, w, 1)

    def __call__(self, image, speech):
        x = np.concatenate([np.ravel(image), np.ravel(speech)])
        return softmax(np.tanh(x @ self.w1) @ self.w2)


class AdditiveModel:
    """Class-0 probability is an affine function of pixel sums; exact Shapley is known."""

    def __init__(self, w_img, w_spc, bias=0.7):
        self.w_img, self.w_spc, self.bias = np.asarray(w_img, float), np.asarray(w_spc, float), bias

    def __call__(self, image, speech):
        p = self.bias + float(np.sum(self.w_img * image.sum(axis=2))) + float(np.sum(self.w_spc * speech[..., 0]))
        return np.array([p, 1.0 - p])
