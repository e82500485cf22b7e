"""Training loss: cross entropy plus a down-weighted focal term."""

from __future__ import annotations

import numpy as np

EPS = 1e-12


def _check(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    if not np.all(np.abs(pred.sum(axis=-1) - 1.0) <= 1e-6):
        raise ValueError("prediction rows must sum to 1 within 1e-6")
    if not (np.all((target == 0) | (target == 1)) and np.all(target.sum(axis=-1) == 1)):
        raise ValueError("target must be one-hot")
    return pred, target


def combined_loss(pred, target, gamma=2.0, ce_weight=1.0, focal_weight=0.5):
    """``ce_weight * CE + focal_weight * Focal``, averaged over the batch.

    ``pred`` and ``target`` are probability / one-hot vectors of shape (K,) or
    (N, K). The target-class probability is clamped at 1e-12.
    """
    pred, target = _check(pred, target)
    p = np.clip((pred * target).sum(axis=-1), EPS, 1.0)
    ce = -np.log(p)
    focal = (1.0 - p) ** gamma * ce
    return float(np.mean(ce_weight * ce + focal_weight * focal))


def combined_loss_grad(pred, target, gamma=2.0, ce_weight=1.0, focal_weight=0.5):
    """Gradient of :func:`combined_loss` with respect to ``pred``."""
    pred, target = _check(pred, target)
    p_raw = (pred * target).sum(axis=-1)
    p = np.clip(p_raw, EPS, 1.0)
    one_minus = 1.0 - p
    d_ce = -1.0 / p
    # d/dp of -(1-p)^g log p
    d_focal = -(one_minus ** gamma) / p
    if gamma != 0:
        d_focal = d_focal + gamma * one_minus ** (gamma - 1) * np.log(p)
    dp = (ce_weight * d_ce + focal_weight * d_focal) * (p_raw > EPS)
    n = pred.shape[0] if pred.ndim == 2 else 1
    return target * (dp / n)[..., None] if pred.ndim == 2 else target * dp
