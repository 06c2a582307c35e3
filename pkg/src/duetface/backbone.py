"""Four-stage strided-convolution stand-in for the client and server recognisers.

Each stage is a 3x3 convolution (stride 2, zero padding 1, no bias) followed
by ReLU, so a 112x112 input yields 56, 28, 14 and 7 pixel feature maps.
Tensors are ``(channels, height, width)`` float64 arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .color_frequency import ShapeError

NUM_STAGES = 4
CLIENT_WIDTHS = (16, 32, 64, 128)
SERVER_WIDTHS = (32, 64, 128, 256)
MANIFEST = "manifest.txt"


@dataclass(frozen=True)
class BackboneConfig:
    input_channels: int
    stage_widths: tuple[int, ...] = SERVER_WIDTHS
    seed: int = 0
    interaction_weights: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.stage_widths) != NUM_STAGES or len(self.interaction_weights) != NUM_STAGES:
            raise ValueError(f"backbone needs exactly {NUM_STAGES} stage widths and weights")
        if self.input_channels <= 0 or min(self.stage_widths) <= 0:
            raise ValueError("channel counts must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class Backbone:
    config: BackboneConfig
    weights: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        expected = self.config.input_channels
        for i, k in enumerate(self.weights):
            if k.ndim != 4 or k.shape[1] != expected or k.shape[2:] != (3, 3):
                raise ShapeError(f"stage {i} kernel has shape {k.shape}, expected (*, {expected}, 3, 3)")
            expected = k.shape[0]
            k.setflags(write=False)

    @property
    def input_channels(self) -> int:
        return self.weights[0].shape[1]

    @property
    def embedding_dim(self) -> int:
        return self.weights[-1].shape[0]


def init_backbone(cfg: BackboneConfig) -> Backbone:
    rng = np.random.default_rng(cfg.seed)
    weights = []
    fan_in = cfg.input_channels
    for width in cfg.stage_widths:
        s = np.sqrt(1.0 / (9 * fan_in))
        weights.append(rng.uniform(-s, s, size=(width, fan_in, 3, 3)))
        fan_in = width
    return Backbone(cfg, tuple(weights))


def conv3x3_stride2(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    oh, ow = (h + 1) // 2, (w + 1) // 2
    padded = np.zeros((c, 2 * oh + 2, 2 * ow + 2))
    padded[:, 1:h + 1, 1:w + 1] = x
    out = np.zeros((kernel.shape[0], oh, ow))
    for dy in range(3):
        for dx in range(3):
            tap = padded[:, dy:dy + 2 * oh:2, dx:dx + 2 * ow:2]
            out += np.tensordot(kernel[:, :, dy, dx], tap, axes=(1, 0))
    return out


def stage_forward(backbone: Backbone, i: int, x: np.ndarray) -> np.ndarray:
    kernel = backbone.weights[i]
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != kernel.shape[1]:
        raise ShapeError(f"stage {i} expects {kernel.shape[1]} input channels, got shape {x.shape}")
    return np.maximum(conv3x3_stride2(x, kernel), 0.0)


def forward_features(backbone: Backbone, x: np.ndarray) -> list[np.ndarray]:
    """Plain forward pass; returns the output of every stage."""
    feats = []
    for i in range(NUM_STAGES):
        x = stage_forward(backbone, i, x)
        feats.append(x)
    return feats


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray
    normalized: bool


def embed(final_feature: np.ndarray) -> Embedding:
    """Global average pool then L2-normalise; a zero vector stays zero."""
    v = np.asarray(final_feature, dtype=np.float64).mean(axis=(1, 2))
    n = np.linalg.norm(v)
    if n == 0:
        return Embedding(v, False)
    return Embedding(v / n, True)


def cosine_similarity(a: Embedding | np.ndarray, b: Embedding | np.ndarray) -> float:
    va = np.asarray(getattr(a, "vector", a), dtype=np.float64)
    vb = np.asarray(getattr(b, "vector", b), dtype=np.float64)
    if va.shape != vb.shape:
        raise ShapeError(f"embedding dimensions differ: {va.shape} vs {vb.shape}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(va @ vb / (na * nb), -1.0, 1.0))


def save_weights(backbone: Backbone, directory: str | Path) -> None:
    """One tensor record file per stage plus a manifest naming them in order."""
    from .protocol import encode_tensor

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, k in enumerate(backbone.weights):
        name = f"stage{i}.tensor"
        (directory / name).write_bytes(encode_tensor(k))
        names.append(name)
    (directory / MANIFEST).write_text("\n".join(names) + "\n")


def load_weights(directory: str | Path, interaction_weights=(1.0, 1.0, 1.0, 1.0)) -> Backbone:
    from .protocol import decode_tensor

    directory = Path(directory)
    names = [line.strip() for line in (directory / MANIFEST).read_text().splitlines() if line.strip()]
    if len(names) != NUM_STAGES:
        raise ValueError(f"{directory / MANIFEST}: expected {NUM_STAGES} layers, found {len(names)}")
    weights = tuple(decode_tensor((directory / n).read_bytes()).astype(np.float64) for n in names)
    cfg = BackboneConfig(
        input_channels=weights[0].shape[1],
        stage_widths=tuple(k.shape[0] for k in weights),
        interaction_weights=tuple(interaction_weights),
    )
    return Backbone(cfg, weights)
