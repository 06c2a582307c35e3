"""Facial region of interest from landmark points.

Landmarks live in 112x112 image coordinates, ``x`` to the right and ``y``
down.  Orientation tests use the usual ``cross > 0`` convention, so
"counterclockwise" below means positive signed area in ``(x, y)``.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .color_frequency import ShapeError

REFERENCE_SIZE = 112


class DegenerateGeometryError(ValueError):
    """Fewer than three points, or all points collinear."""


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Monotone-chain hull as an ``(M, 2)`` counterclockwise vertex array.

    Collinear boundary points are dropped.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError(f"expected (N, 2) points, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("landmark coordinates must be finite")
    if len(pts) < 3:
        raise DegenerateGeometryError(f"need at least 3 points, got {len(pts)}")

    uniq = sorted(set(map(tuple, pts.tolist())))

    def chain(seq):
        out: list = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(uniq)
    upper = chain(reversed(uniq))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateGeometryError("all landmark points are collinear")
    return np.array(hull)


def point_in_polygon(poly: np.ndarray, x, y, eps: float = 1e-9):
    """Boundary-inclusive containment test for a counterclockwise convex polygon.

    ``x`` and ``y`` may be arrays; the result broadcasts over them.
    """
    poly = np.asarray(poly, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = np.ones(np.broadcast(x, y).shape, dtype=bool)
    for (x0, y0), (x1, y1) in zip(poly, np.roll(poly, -1, axis=0)):
        inside &= (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) >= -eps
    return inside


def rasterize_hull(
    poly: np.ndarray, height: int, width: int, reference: tuple[int, int] = (REFERENCE_SIZE, REFERENCE_SIZE)
) -> np.ndarray:
    """Boolean ROI: pixel ``(r, c)`` is set when its centre lies in the scaled polygon.

    ``reference`` is the ``(height, width)`` of the image the polygon was
    drawn on.
    """
    if height <= 0 or width <= 0:
        raise ShapeError(f"ROI size must be positive, got {height}x{width}")
    poly = np.asarray(poly, dtype=np.float64)
    scaled = poly * np.array([width / reference[1], height / reference[0]])
    yy, xx = np.mgrid[0:height, 0:width]
    return point_in_polygon(scaled, xx + 0.5, yy + 0.5)


def refine_mask(mask: np.ndarray, roi: np.ndarray) -> np.ndarray:
    """Zero the mask outside the ROI and stretch the values inside it back to [0, 1].

    The min-max range is taken over ROI pixels, so the weakest in-face
    response maps to 0 like the background.  An empty ROI or a flat in-face
    response gives an all-zero mask.
    """
    mask = np.asarray(mask, dtype=np.float64)
    roi = np.asarray(roi, dtype=bool)
    if mask.shape != roi.shape:
        raise ShapeError(f"mask {mask.shape} and ROI {roi.shape} differ")
    out = np.zeros_like(mask)
    if not roi.any():
        return out
    inside = mask[roi]
    lo, hi = inside.min(), inside.max()
    if hi > lo:
        out[roi] = (inside - lo) / (hi - lo)
    return out


def synthetic_landmarks(n: int = 32, center=(56.0, 58.0), radii=(38.0, 48.0)) -> np.ndarray:
    """Points on an ellipse roughly framing an aligned 112x112 face."""
    t = 2 * np.pi * np.arange(n) / n
    return np.stack([center[0] + radii[0] * np.cos(t), center[1] + radii[1] * np.sin(t)], axis=1)


def read_landmarks(path: str | Path) -> np.ndarray:
    """Parse a flat ``x0 y0 x1 y1 ...`` list (whitespace or comma separated)."""
    tokens = [t for t in re.split(r"[\s,]+", Path(path).read_text()) if t]
    values = np.array([float(t) for t in tokens])
    if values.size % 2:
        raise ValueError(f"{path}: odd number of coordinates ({values.size})")
    return values.reshape(-1, 2)


def write_landmarks(path: str | Path, points) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    Path(path).write_text("\n".join(f"{x:.6f} {y:.6f}" for x, y in pts) + "\n")
