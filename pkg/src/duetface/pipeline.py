"""Client and server halves of one recognition query."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .attention import compute_mask, interactive_update, resize_mask
from .backbone import (
    CLIENT_WIDTHS,
    NUM_STAGES,
    SERVER_WIDTHS,
    Backbone,
    BackboneConfig,
    embed,
    forward_features,
    init_backbone,
    stage_forward,
)
from .channel_split import SplitSpec, make_split_spec, zero_pad
from .color_frequency import (
    BLOCK,
    NUM_CHANNELS,
    ShapeError,
    bdct,
    channel_energy,
    ibdct,
    rgb_to_ycbcr,
    upsample_image,
)
from .facial_roi import DegenerateGeometryError, convex_hull, rasterize_hull, refine_mask
from .protocol import (
    MODE_COMPACT,
    MODE_FULL,
    MODE_NAMES,
    ProtocolError,
    QueryMessage,
    ResponseMessage,
    comm_cost,
)

log = logging.getLogger(__name__)


class ModelMismatchError(ProtocolError):
    """The query's channel count does not fit the loaded server model."""


@dataclass(frozen=True)
class ClientConfig:
    k: int = 10
    mode: str = "compact"
    seed: int = 0
    query_id: int = 0
    # fixed-spec mode: reuse one selection instead of ranking each query image
    spec: SplitSpec | None = None

    def __post_init__(self):
        if self.mode not in MODE_NAMES:
            raise ValueError(f"mode must be one of {sorted(MODE_NAMES)}, got {self.mode!r}")
        if not 0 <= self.k <= 64:
            raise ValueError(f"K must be in [0, 64], got {self.k}")
        if self.spec is not None and self.spec.k != self.k:
            raise ValueError(f"fixed spec has K={self.spec.k}, config has K={self.k}")


def client_backbone(k: int, seed: int = 0) -> Backbone:
    return init_backbone(BackboneConfig(input_channels=3 * k, stage_widths=CLIENT_WIDTHS, seed=seed))


def server_backbone(k: int, seed: int = 0, interaction_weights=(1.0, 1.0, 1.0, 1.0)) -> Backbone:
    return init_backbone(
        BackboneConfig(
            input_channels=NUM_CHANNELS - 3 * k,
            stage_widths=SERVER_WIDTHS,
            seed=seed,
            interaction_weights=tuple(interaction_weights),
        )
    )


def stage_sizes(height: int, width: int) -> list[tuple[int, int]]:
    sizes = []
    for _ in range(NUM_STAGES):
        height, width = (height + 1) // 2, (width + 1) // 2
        sizes.append((height, width))
    return sizes


def client_masks(
    x_c: np.ndarray, model: Backbone | None, landmarks=None, image_size: tuple[int, int] | None = None
) -> tuple[list[np.ndarray], bool]:
    """Per-stage feature masks from the crucial channels, ROI-refined when landmarks are given.

    Returns the masks and whether ROI refinement had to be skipped because
    the landmarks were degenerate.
    """
    h, w = x_c.shape[1:]
    if model is None or x_c.shape[0] == 0:
        masks = [np.zeros(s) for s in stage_sizes(h, w)]
    else:
        masks = [compute_mask(f) for f in forward_features(model, x_c)]
    if landmarks is None:
        return masks, False
    try:
        hull = convex_hull(landmarks)
    except DegenerateGeometryError as exc:
        log.warning("ROI refinement skipped: %s", exc)
        return masks, True
    reference = image_size or (h, w)
    refined = [refine_mask(m, rasterize_hull(hull, *m.shape, reference=reference)) for m in masks]
    return refined, False


def client_run(
    img: np.ndarray,
    landmarks=None,
    config: ClientConfig = ClientConfig(),
    model: Backbone | None = None,
) -> QueryMessage:
    """Build the query for one RGB image.  Neither the image nor ``x_c`` enters the message."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] % BLOCK or img.shape[1] % BLOCK:
        raise ShapeError(f"image must be (H, W, 3) with H, W multiples of 8, got {img.shape}")
    ycc = rgb_to_ycbcr(img)
    full = bdct(upsample_image(ycc))
    spec = config.spec or make_split_spec(channel_energy(full), config.k)
    if model is None and config.k > 0:
        model = client_backbone(config.k, config.seed)
    masks, fallback = client_masks(full[list(spec.crucial)], model, landmarks, img.shape[:2])

    if config.mode == "full":
        x_s = full[list(spec.noncrucial)]
    else:
        x_s = bdct(ycc)[list(spec.noncrucial)]
    return QueryMessage(
        mode=MODE_NAMES[config.mode],
        k=config.k,
        query_id=config.query_id,
        spec=spec,
        x_s=x_s,
        masks=masks,
        roi_fallback=fallback,
    )


def lift_compact(x_s: np.ndarray, spec: SplitSpec) -> np.ndarray:
    """Rebuild full-geometry non-crucial channels from a compact ``x_s``.

    zero-pad -> inverse BDCT -> 8x bilinear -> BDCT -> keep non-crucial.
    Approximate: crucial content leaks slightly into the re-selected channels.
    """
    ycc = ibdct(zero_pad(x_s, spec.noncrucial))
    return bdct(upsample_image(ycc))[list(spec.noncrucial)]


def server_features(msg: QueryMessage, model: Backbone) -> np.ndarray:
    """Run every stage, applying the interactive update with the received masks."""
    x = np.asarray(msg.x_s, dtype=np.float64)
    if msg.mode == MODE_COMPACT:
        x = lift_compact(x, msg.spec)
    elif msg.mode != MODE_FULL:
        raise ProtocolError(f"unknown mode {msg.mode}")
    if x.shape[0] != model.input_channels:
        raise ModelMismatchError(
            f"query carries {x.shape[0]} channels, server model expects {model.input_channels}"
        )
    weights = model.config.interaction_weights
    for i in range(NUM_STAGES):
        x = stage_forward(model, i, x)
        if i < len(msg.masks):
            mask = resize_mask(msg.masks[i], *x.shape[1:])
            x = interactive_update(x, mask, weights[i])
    return x


def server_run(msg: QueryMessage, model: Backbone) -> ResponseMessage:
    emb = embed(server_features(msg, model))
    cost = comm_cost(msg)
    return ResponseMessage(
        query_id=msg.query_id,
        embedding=emb.vector,
        xs_elements=cost.x_s,
        mask_elements=cost.masks,
        total=cost.total,
    )
