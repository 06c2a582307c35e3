"""PSNR / SSIM and the visual-privacy report for a channel split."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .channel_split import SplitPair, zero_pad_reconstruct
from .color_frequency import ShapeError, luma, rgb_to_ycbcr, upsample_image, ycbcr_to_rgb

DEFAULT_SSIM_THRESHOLD = 0.7

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 255.0


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB over all samples; ``inf`` for identical images."""
    a, b = _same_shape(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(DATA_RANGE**2 / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    """Mean SSIM over every full 11x11 window position of two planes."""
    x, y = _same_shape(x, y)
    if x.ndim != 2:
        raise ShapeError(f"expected 2-D planes, got {x.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise ShapeError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}")
    w = gaussian_window()

    def filt(p):
        return np.einsum("ijkl,kl->ij", sliding_window_view(p, w.shape), w)

    mx, my = filt(x), filt(y)
    vx = filt(x * x) - mx * mx
    vy = filt(y * y) - my * my
    cxy = filt(x * y) - mx * my
    c1 = (SSIM_K1 * DATA_RANGE) ** 2
    c2 = (SSIM_K2 * DATA_RANGE) ** 2
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Single-scale SSIM on the JFIF luma of two RGB images."""
    a, b = _same_shape(a, b)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ShapeError(f"expected (H, W, 3) images, got {a.shape}")
    return ssim_plane(luma(a), luma(b))


@dataclass(frozen=True)
class PrivacyReport:
    k: int
    ssim_xs: float
    ssim_xc: float
    psnr_xs: float
    psnr_xc: float
    threshold: float
    passed: bool

    def to_text(self) -> str:
        return "".join(f"{key}={_fmt(value)}\n" for key, value in asdict(self).items())

    def to_json(self) -> str:
        d = {key: (_fmt(v) if isinstance(v, float) and math.isinf(v) else v) for key, v in asdict(self).items()}
        return json.dumps(d, sort_keys=True)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "inf" if math.isinf(value) else f"{value:.6f}"
    return str(value)


def reference_image(raw: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Raw image at the geometry of a reconstruction.

    A split of the upsampled tensor reconstructs at 8x the raw size; the raw
    image is then compared through the same 8x bilinear upsampling.
    """
    raw = np.asarray(raw)
    if raw.shape == tuple(shape):
        return raw
    if (raw.shape[0] * 8, raw.shape[1] * 8, 3) == tuple(shape):
        return ycbcr_to_rgb(upsample_image(rgb_to_ycbcr(raw)))
    raise ShapeError(f"reconstruction {shape} does not match raw image {raw.shape}")


def privacy_report(
    raw: np.ndarray, pair: SplitPair, threshold: float = DEFAULT_SSIM_THRESHOLD
) -> PrivacyReport:
    rec_s = zero_pad_reconstruct(pair.x_s, pair.spec, "s")
    rec_c = zero_pad_reconstruct(pair.x_c, pair.spec, "c")
    ref = reference_image(raw, rec_s.shape)
    s_xs, s_xc = ssim(rec_s, ref), ssim(rec_c, ref)
    return PrivacyReport(
        k=pair.spec.k,
        ssim_xs=s_xs,
        ssim_xc=s_xc,
        psnr_xs=psnr(rec_s, ref),
        psnr_xc=psnr(rec_c, ref),
        threshold=threshold,
        passed=bool(s_xs < threshold and s_xs < s_xc),
    )
