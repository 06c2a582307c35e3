"""Client feature masks and the server-side interactive update."""
from __future__ import annotations

import numpy as np

from .color_frequency import ShapeError, resize_bilinear


def compute_mask(feature: np.ndarray) -> np.ndarray:
    """Channel mean, min-max normalised to [0, 1]; a flat map gives zeros."""
    f = np.asarray(feature, dtype=np.float64)
    if f.ndim != 3 or f.size == 0:
        raise ShapeError(f"expected a nonempty (C, H, W) feature, got {f.shape}")
    m = f.mean(axis=0)
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def resize_mask(mask: np.ndarray, height: int, width: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape == (height, width):
        return mask.copy()
    return np.clip(resize_bilinear(mask, height, width), 0.0, 1.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split on sign so exp never overflows
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _check(feature, mask):
    f = np.asarray(feature, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    if f.ndim != 3 or m.shape != f.shape[1:]:
        raise ShapeError(f"mask {m.shape} does not match feature {f.shape}")
    return f, m


def interactive_update(feature: np.ndarray, mask: np.ndarray, w: float) -> np.ndarray:
    """``F' = w * (sigmoid(F) * R) + F`` with ``R`` broadcast over channels.

    ``w == 0`` and an all-zero mask both return ``F`` unchanged.
    """
    f, m = _check(feature, mask)
    if w == 0 or not m.any():
        return f.copy()
    return w * (sigmoid(f) * m) + f


def update_gradients(feature: np.ndarray, mask: np.ndarray, w: float) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise partials of :func:`interactive_update` w.r.t. ``F`` and ``w``."""
    f, m = _check(feature, mask)
    s = sigmoid(f)
    return w * m * s * (1.0 - s) + 1.0, s * m
