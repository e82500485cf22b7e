"""Classification metrics computed from a confusion matrix
(rows = ground truth, columns = prediction)."""

from __future__ import annotations

import numpy as np


class MetricsError(ValueError):
    pass


def confusion_matrix(y_true, y_pred, n_classes=None):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise MetricsError(f"{y_true.size} labels vs {y_pred.size} predictions")
    if n_classes is None:
        n_classes = int(max(y_true.max(initial=-1), y_pred.max(initial=-1))) + 1
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise MetricsError(f"labels must lie in 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _cm(cm):
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] == 0:
        raise MetricsError(f"confusion matrix must be square and non-empty, got {cm.shape}")
    if np.any(cm < 0):
        raise MetricsError("confusion matrix has negative counts")
    total = cm.sum()
    if total == 0:
        raise MetricsError("confusion matrix has no samples")
    return cm.astype(np.float64), float(total)


def accuracy(cm):
    cm, total = _cm(cm)
    return float(np.trace(cm) / total)


def per_class_f1(cm):
    """F1 per class; a class with no support and no predictions scores 0."""
    cm, _ = _cm(cm)
    tp = np.diag(cm)
    denom = cm.sum(axis=0) + cm.sum(axis=1)  # 2TP + FP + FN
    return np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def macro_f1(cm):
    return float(per_class_f1(cm).mean())


def cohen_kappa(cm):
    """Chance-corrected agreement; defined as 0 when chance agreement is 1."""
    cm, total = _cm(cm)
    p_o = np.trace(cm) / total
    p_e = float(np.dot(cm.sum(axis=0), cm.sum(axis=1))) / total ** 2
    if p_e >= 1.0:
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


def report(cm):
    cm = np.asarray(cm)
    return {
        "accuracy": accuracy(cm),
        "macro_f1": macro_f1(cm),
        "cohen_kappa": cohen_kappa(cm),
        "confusion": cm.astype(int).tolist(),
    }
