"""Colour conversion, bilinear resampling and the block DCT channel layout.

A frequency tensor is a ``(192, H, W)`` float array.  Channels are grouped by
component (Y: 0-63, Cb: 64-127, Cr: 128-191) and, inside a component, ordered
by the JPEG zigzag scan so that channel ``64 * comp + 0`` is always DC.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

BLOCK = 8
FREQS = BLOCK * BLOCK
NUM_CHANNELS = 3 * FREQS
COMPONENTS = ("Y", "Cb", "Cr")

RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
YCBCR_OFFSET = np.array([0.0, 128.0, 128.0])
YCBCR_TO_RGB = np.linalg.inv(RGB_TO_YCBCR)


class ShapeError(ValueError):
    """Array geometry does not satisfy an operation's precondition."""


def _zigzag_order(n: int = BLOCK) -> list[tuple[int, int]]:
    order = []
    for s in range(2 * n - 1):
        diag = [(u, s - u) for u in range(n) if 0 <= s - u < n]
        # even anti-diagonals run bottom-left to top-right
        if s % 2 == 0:
            diag.reverse()
        order.extend(diag)
    return order


ZIGZAG: tuple[tuple[int, int], ...] = tuple(_zigzag_order())
ZIGZAG_INDEX = {uv: k for k, uv in enumerate(ZIGZAG)}
_ZZ_U = np.array([u for u, _ in ZIGZAG])
_ZZ_V = np.array([v for _, v in ZIGZAG])


def channel_info(channel: int) -> tuple[str, tuple[int, int]]:
    """Map a channel index to ``(component, (u, v))``."""
    if not 0 <= channel < NUM_CHANNELS:
        raise IndexError(f"channel {channel} outside [0, {NUM_CHANNELS})")
    comp, pos = divmod(channel, FREQS)
    return COMPONENTS[comp], ZIGZAG[pos]


def channel_index(component: str, uv: tuple[int, int]) -> int:
    return COMPONENTS.index(component) * FREQS + ZIGZAG_INDEX[tuple(uv)]


def dct_matrix(n: int = BLOCK) -> np.ndarray:
    """Orthonormal DCT-II matrix ``C`` with ``coeffs = C @ x``."""
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * x + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    c[0] /= np.sqrt(2.0)
    return c


_C = dct_matrix()


# -- images -----------------------------------------------------------------

def read_ppm(path: str | Path) -> np.ndarray:
    """Load an 8-bit PPM as an ``(H, W, 3)`` uint8 array."""
    with Image.open(path) as im:
        if im.format != "PPM":
            raise ValueError(f"{path}: not a PPM file (got {im.format})")
        if im.mode != "RGB":
            raise ValueError(f"{path}: expected 8-bit RGB, got mode {im.mode}")
        return np.asarray(im, dtype=np.uint8).copy()


def write_ppm(path: str | Path, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"expected (H, W, 3) uint8 image, got {img.dtype} {img.shape}")
    Image.fromarray(img, mode="RGB").save(path, format="PPM")


def rgb_to_ycbcr(img: np.ndarray) -> np.ndarray:
    """Full-range JFIF conversion; returns unclamped ``(H, W, 3)`` floats."""
    rgb = np.asarray(img, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"expected (H, W, 3) image, got {rgb.shape}")
    return rgb @ RGB_TO_YCBCR.T + YCBCR_OFFSET


def ycbcr_to_rgb(img: np.ndarray) -> np.ndarray:
    """Inverse JFIF conversion, rounded half-up and clamped to uint8."""
    ycc = np.asarray(img, dtype=np.float64)
    if ycc.ndim != 3 or ycc.shape[2] != 3:
        raise ShapeError(f"expected (H, W, 3) planes, got {ycc.shape}")
    rgb = (ycc - YCBCR_OFFSET) @ YCBCR_TO_RGB.T
    return np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)


def luma(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=np.float64) @ RGB_TO_YCBCR[0]


# -- resampling -------------------------------------------------------------

def _axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(plane: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize with half-pixel centres and clamped edges."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or plane.size == 0:
        raise ShapeError(f"expected a nonempty 2-D plane, got {plane.shape}")
    if height <= 0 or width <= 0:
        raise ShapeError(f"target size must be positive, got {height}x{width}")
    r0, r1, fr = _axis_weights(plane.shape[0], height)
    c0, c1, fc = _axis_weights(plane.shape[1], width)
    fr = fr[:, None]
    top = plane[r0][:, c0] * (1 - fc) + plane[r0][:, c1] * fc
    bot = plane[r1][:, c0] * (1 - fc) + plane[r1][:, c1] * fc
    return top * (1 - fr) + bot * fr


def bilinear_upsample(plane: np.ndarray, factor: int = 8) -> np.ndarray:
    if factor != BLOCK:
        raise ValueError("only 8x upsampling is supported")
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise ShapeError(f"expected a 2-D plane, got {plane.shape}")
    return resize_bilinear(plane, plane.shape[0] * factor, plane.shape[1] * factor)


def upsample_image(ycc: np.ndarray, factor: int = 8) -> np.ndarray:
    """Apply :func:`bilinear_upsample` to each plane of an ``(H, W, 3)`` image."""
    return np.stack([bilinear_upsample(ycc[..., k], factor) for k in range(3)], axis=-1)


# -- block DCT --------------------------------------------------------------

def bdct(ycc: np.ndarray) -> np.ndarray:
    """Block DCT of an ``(8H, 8W, 3)`` YCbCr image into a ``(192, H, W)`` tensor."""
    ycc = np.asarray(ycc, dtype=np.float64)
    if ycc.ndim != 3 or ycc.shape[2] != 3:
        raise ShapeError(f"expected (8H, 8W, 3) planes, got {ycc.shape}")
    h8, w8, _ = ycc.shape
    if h8 % BLOCK or w8 % BLOCK or h8 == 0 or w8 == 0:
        raise ShapeError(f"image size {h8}x{w8} is not a positive multiple of 8")
    h, w = h8 // BLOCK, w8 // BLOCK
    blocks = (ycc - 128.0).reshape(h, BLOCK, w, BLOCK, 3)
    # (comp, u, v, H, W)
    coeffs = np.einsum("ux,vy,rxcyk->kuvrc", _C, _C, blocks, optimize=True)
    return coeffs[:, _ZZ_U, _ZZ_V].reshape(NUM_CHANNELS, h, w)


def ibdct(ft: np.ndarray) -> np.ndarray:
    """Inverse of :func:`bdct`, including the +128 level unshift."""
    ft = np.asarray(ft, dtype=np.float64)
    if ft.ndim != 3 or ft.shape[0] != NUM_CHANNELS:
        raise ShapeError(f"expected (192, H, W) tensor, got {ft.shape}")
    _, h, w = ft.shape
    coeffs = np.zeros((3, BLOCK, BLOCK, h, w))
    coeffs[:, _ZZ_U, _ZZ_V] = ft.reshape(3, FREQS, h, w)
    blocks = np.einsum("ux,vy,kuvrc->rxcyk", _C, _C, coeffs, optimize=True)
    return blocks.reshape(h * BLOCK, w * BLOCK, 3) + 128.0


def image_to_frequency(img: np.ndarray, upsample: bool = True) -> np.ndarray:
    """RGB image to frequency tensor; with ``upsample`` the output keeps the image's H x W."""
    ycc = rgb_to_ycbcr(img)
    if upsample:
        ycc = upsample_image(ycc)
    return bdct(ycc)


# -- energy -----------------------------------------------------------------

@dataclass(frozen=True)
class EnergyReport:
    energy: np.ndarray
    ranking: tuple[np.ndarray, np.ndarray, np.ndarray]

    def component_energy(self, component: int = 0) -> np.ndarray:
        return self.energy[component * FREQS:(component + 1) * FREQS]

    def cumulative_fraction(self, component: int = 0) -> np.ndarray:
        """Share of the component's energy held by its top-k channels, k = 1..64."""
        e = self.energy[self.ranking[component]]
        total = e.sum()
        if total == 0:
            return np.zeros(FREQS)
        return np.cumsum(e) / total


def channel_energy(ft: np.ndarray) -> EnergyReport:
    """Mean absolute value per channel, plus per-component descending rankings."""
    ft = np.asarray(ft, dtype=np.float64)
    if ft.ndim != 3 or ft.shape[0] != NUM_CHANNELS:
        raise ShapeError(f"expected (192, H, W) tensor, got {ft.shape}")
    energy = np.abs(ft).mean(axis=(1, 2))
    ranking = []
    for comp in range(3):
        idx = np.arange(comp * FREQS, (comp + 1) * FREQS)
        # lexsort is stable on the last key: descending energy, then ascending index
        ranking.append(idx[np.lexsort((idx, -energy[idx]))])
    return EnergyReport(energy=energy, ranking=tuple(ranking))
