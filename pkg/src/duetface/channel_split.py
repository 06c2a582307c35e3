"""Crucial/non-crucial split of a frequency tensor by luma channel energy."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .color_frequency import (
    FREQS,
    NUM_CHANNELS,
    EnergyReport,
    ShapeError,
    channel_energy,
    ibdct,
    image_to_frequency,
    ycbcr_to_rgb,
)


@dataclass(frozen=True)
class SplitSpec:
    k: int
    crucial: tuple[int, ...]
    noncrucial: tuple[int, ...]

    def __post_init__(self):
        if not 0 <= self.k <= FREQS:
            raise ValueError(f"K={self.k} outside [0, {FREQS}]")
        if len(self.crucial) != 3 * self.k:
            raise ValueError(f"expected {3 * self.k} crucial channels, got {len(self.crucial)}")
        if sorted(self.crucial + self.noncrucial) != list(range(NUM_CHANNELS)):
            raise ValueError("crucial and non-crucial channels must partition [0, 192)")
        positions = [set(c - comp * FREQS for c in self.crucial if c // FREQS == comp) for comp in range(3)]
        if not positions[0] == positions[1] == positions[2]:
            raise ValueError("crucial frequency positions differ between components")

    @classmethod
    def from_crucial(cls, crucial) -> "SplitSpec":
        crucial = tuple(sorted(int(c) for c in crucial))
        if len(crucial) % 3:
            raise ValueError(f"crucial channel count {len(crucial)} is not a multiple of 3")
        if len(set(crucial)) != len(crucial):
            raise ValueError("duplicate crucial channel")
        chosen = set(crucial)
        rest = tuple(c for c in range(NUM_CHANNELS) if c not in chosen)
        return cls(len(crucial) // 3, crucial, rest)

    def to_text(self) -> str:
        return "\n".join(str(v) for v in (self.k, *self.crucial)) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SplitSpec":
        values = [int(tok) for tok in text.split()]
        if not values:
            raise ValueError("empty split spec record")
        spec = cls.from_crucial(values[1:])
        if spec.k != values[0]:
            raise ValueError(f"record declares K={values[0]} but lists {len(values) - 1} channels")
        return spec

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "SplitSpec":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class SplitPair:
    x_c: np.ndarray
    x_s: np.ndarray
    spec: SplitSpec


def make_split_spec(report: EnergyReport, k: int) -> SplitSpec:
    """Pick the K highest-energy luma frequencies and mirror them onto Cb and Cr."""
    if not isinstance(k, (int, np.integer)) or not 0 <= k <= FREQS:
        raise ValueError(f"K must be an integer in [0, {FREQS}], got {k!r}")
    positions = report.ranking[0][:k]
    crucial = [comp * FREQS + p for comp in range(3) for p in positions]
    return SplitSpec.from_crucial(crucial)


def spec_for_image(img: np.ndarray, k: int) -> SplitSpec:
    return make_split_spec(channel_energy(image_to_frequency(img)), k)


def _check(ft: np.ndarray) -> np.ndarray:
    ft = np.asarray(ft)
    if ft.ndim != 3 or ft.shape[0] != NUM_CHANNELS:
        raise ShapeError(f"expected (192, H, W) tensor, got {ft.shape}")
    return ft


def split(ft: np.ndarray, spec: SplitSpec) -> SplitPair:
    ft = _check(ft)
    return SplitPair(
        x_c=ft[list(spec.crucial)].copy(),
        x_s=ft[list(spec.noncrucial)].copy(),
        spec=spec,
    )


def merge(pair: SplitPair) -> np.ndarray:
    spec = pair.spec
    if pair.x_c.shape[0] != len(spec.crucial) or pair.x_s.shape[0] != len(spec.noncrucial):
        raise ShapeError(
            f"channel counts {pair.x_c.shape[0]}/{pair.x_s.shape[0]} do not match "
            f"spec {len(spec.crucial)}/{len(spec.noncrucial)}"
        )
    if pair.x_c.shape[1:] != pair.x_s.shape[1:] and pair.x_c.size and pair.x_s.size:
        raise ShapeError(f"spatial mismatch {pair.x_c.shape[1:]} vs {pair.x_s.shape[1:]}")
    spatial = pair.x_s.shape[1:] if pair.x_s.shape[0] else pair.x_c.shape[1:]
    dtype = np.result_type(pair.x_c, pair.x_s)
    out = np.zeros((NUM_CHANNELS, *spatial), dtype=dtype)
    out[list(spec.crucial)] = pair.x_c
    out[list(spec.noncrucial)] = pair.x_s
    return out


def zero_pad(part: np.ndarray, channels) -> np.ndarray:
    """Scatter ``part`` into a 192-channel tensor, zero elsewhere."""
    part = np.asarray(part, dtype=np.float64)
    channels = list(channels)
    if part.ndim != 3 or part.shape[0] != len(channels):
        raise ShapeError(f"part has shape {part.shape} but {len(channels)} channels were named")
    out = np.zeros((NUM_CHANNELS, *part.shape[1:]))
    out[channels] = part
    return out


def zero_pad_reconstruct(part: np.ndarray, spec: SplitSpec, side: str) -> np.ndarray:
    """Visualise one side of a split: zero the missing channels, invert the DCT, go to RGB.

    ``side`` is ``"s"`` for the server part or ``"c"`` for the client part.
    """
    if side not in ("s", "c"):
        raise ValueError(f"side must be 's' or 'c', got {side!r}")
    channels = spec.noncrucial if side == "s" else spec.crucial
    return ycbcr_to_rgb(ibdct(zero_pad(part, channels)))
