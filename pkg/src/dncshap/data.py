"""Seeded synthetic (image, spectrogram, label) pairs.

With four classes the label is ``2 * bright + loud``: ``bright`` says whether
the image mean is high, ``loud`` whether a fixed band of spectrogram rows
carries energy. Neither modality alone can do better than 50%. With two
classes only the image brightness matters.
"""

import numpy as np

from .nn.train import PairDataset


def band_rows(height):
    return height // 4, height // 2


def make_synthetic(n, height=16, width=16, seed=0, n_classes=4, noise=0.08):
    if n_classes not in (2, 4):
        raise ValueError("synthetic data supports 2 or 4 classes")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % n_classes)
    if n_classes == 4:
        bright, loud = labels // 2, labels % 2
    else:
        bright, loud = labels, rng.integers(0, 2, n)
    level = 0.3 + 0.4 * bright
    images = np.clip(level[:, None, None, None] + noise * rng.standard_normal((n, height, width, 3)), 0, 1)
    speech = rng.uniform(0.0, 0.15, size=(n, height, width, 1))
    lo, hi = band_rows(height)
    band = 0.25 + 0.5 * loud
    speech[:, lo:hi] = np.clip(band[:, None, None, None] + noise * rng.standard_normal((n, hi - lo, width, 1)), 0, 1)
    return PairDataset(images, speech, labels)
