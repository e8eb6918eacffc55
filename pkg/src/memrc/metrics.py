"""Classification and regression scores."""

from __future__ import annotations

import numpy as np

from .errors import InputError


def _labels(values) -> np.ndarray:
    a = np.asarray(values)
    if a.ndim == 2:
        return a.argmax(axis=1)
    return a.astype(int)


def _check(a, b):
    if len(a) == 0 or len(b) == 0:
        raise InputError("empty inputs")
    if len(a) != len(b):
        raise InputError(f"length mismatch: {len(a)} vs {len(b)}")


def accuracy(preds, labels) -> float:
    """Fraction of matches; 2-D inputs (probabilities, one-hot) are argmaxed."""
    p, y = _labels(preds), _labels(labels)
    _check(p, y)
    return float(np.mean(p == y))


def confusion(preds, labels, n_classes: int | None = None) -> np.ndarray:
    """counts[i, j] = number of samples of true class i predicted as j."""
    p, y = _labels(preds), _labels(labels)
    _check(p, y)
    n = n_classes or int(max(p.max(), y.max())) + 1
    out = np.zeros((n, n), dtype=int)
    np.add.at(out, (y, p), 1)
    return out


def nrmse(pred, target, normalization: str = "std") -> float:
    """RMSE divided by the target's std (or its max - min range)."""
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(target, dtype=float).ravel()
    _check(p, t)
    rmse = np.sqrt(np.mean((p - t) ** 2))
    if normalization == "std":
        scale = t.std()
    elif normalization == "range":
        scale = t.max() - t.min()
    else:
        raise InputError("normalization must be 'std' or 'range'")
    if scale == 0:
        raise InputError("target has zero spread")
    return float(rmse / scale)
