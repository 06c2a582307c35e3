"""Binary wire format for the client -> server query and the server's reply.

All integers are little-endian; reals are float32.  Query layout::

    "DUET" | u8 version | u8 mode | u8 K | u64 query_id
    | u8 n | n x u8 crucial channel
    | tensor x_s
    | u8 mask_count | mask_count x tensor

Bit 7 of the mode byte is the ROI-fallback flag (landmarks were degenerate,
masks went out unrefined); the low bits hold the mode.  A tensor record is
``u8 rank | rank x u32 dim | prod(dims) x f32``.

Response layout::

    u64 query_id | tensor embedding | u64 x_s elements | u64 mask elements | u64 total
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channel_split import SplitSpec
from .color_frequency import NUM_CHANNELS

MAGIC = b"DUET"
VERSION = 1
MODE_FULL = 0
MODE_COMPACT = 1
MODE_NAMES = {"full": MODE_FULL, "compact": MODE_COMPACT}
ROI_FALLBACK_FLAG = 0x80
MAX_RANK = 8
MAX_PAYLOAD = 1 << 30

PAPER_XS_CHANNELS = 160

_WIRE = np.dtype("<f4")


class ProtocolError(Exception):
    """Base class for every wire-format failure."""


class EncodeError(ProtocolError):
    pass


class HeaderError(ProtocolError):
    """Bad magic."""


class UnsupportedVersionError(ProtocolError):
    pass


class LengthError(ProtocolError):
    """Truncated input, trailing bytes, or a frame longer than allowed."""


class DimensionOverflowError(ProtocolError):
    """A tensor record declares more data than the 1 GiB cap."""


class MalformedMessageError(ProtocolError):
    """Well-framed bytes that violate a message invariant."""


# -- tensor records ---------------------------------------------------------

def encode_tensor(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim > MAX_RANK:
        raise EncodeError(f"rank {arr.ndim} exceeds {MAX_RANK}")
    if any(d >= 2**32 for d in arr.shape):
        raise EncodeError(f"dimension too large in {arr.shape}")
    if arr.size * 4 > MAX_PAYLOAD:
        raise EncodeError(f"tensor of shape {arr.shape} exceeds the 1 GiB cap")
    head = struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape)
    return head + np.ascontiguousarray(arr, dtype=_WIRE).tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.buf = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if n > len(self.buf) - self.pos:
            raise LengthError(f"need {n} bytes at offset {self.pos}, only {len(self.buf) - self.pos} left")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def tensor(self) -> np.ndarray:
        (rank,) = self.unpack("B")
        if rank > MAX_RANK:
            raise MalformedMessageError(f"tensor rank {rank} exceeds {MAX_RANK}")
        dims = self.unpack(f"{rank}I")
        count = 1
        for d in dims:
            count *= d
            if count * 4 > MAX_PAYLOAD:
                raise DimensionOverflowError(f"dims {dims} exceed the 1 GiB cap")
        raw = self.take(count * 4)
        return np.frombuffer(raw, dtype=_WIRE).reshape(dims).copy()

    def finish(self) -> None:
        if self.pos != len(self.buf):
            raise LengthError(f"{len(self.buf) - self.pos} trailing bytes")


def decode_tensor(data: bytes) -> np.ndarray:
    r = _Reader(data)
    t = r.tensor()
    r.finish()
    return t


# -- messages ---------------------------------------------------------------

@dataclass(eq=False)
class QueryMessage:
    mode: int
    k: int
    query_id: int
    spec: SplitSpec
    x_s: np.ndarray
    masks: list[np.ndarray] = field(default_factory=list)
    roi_fallback: bool = False
    version: int = VERSION

    def __post_init__(self):
        self.x_s = np.asarray(self.x_s, dtype=_WIRE)
        self.masks = [np.asarray(m, dtype=_WIRE) for m in self.masks]

    def __eq__(self, other):
        if not isinstance(other, QueryMessage):
            return NotImplemented
        return encode(self) == encode(other)


@dataclass(eq=False)
class ResponseMessage:
    query_id: int
    embedding: np.ndarray
    xs_elements: int
    mask_elements: int
    total: int

    def __post_init__(self):
        self.embedding = np.asarray(self.embedding, dtype=_WIRE)

    def __eq__(self, other):
        if not isinstance(other, ResponseMessage):
            return NotImplemented
        return encode_response(self) == encode_response(other)


def validate(msg: QueryMessage, error=MalformedMessageError) -> None:
    """Check every message invariant; raise ``error`` on the first violation."""
    if msg.version != VERSION:
        raise UnsupportedVersionError(f"version {msg.version}")
    if msg.mode not in (MODE_FULL, MODE_COMPACT):
        raise error(f"unknown mode {msg.mode}")
    if not 0 <= msg.k <= 64:
        raise error(f"K={msg.k} outside [0, 64]")
    if msg.spec.k != msg.k:
        raise error(f"header K={msg.k} but spec has K={msg.spec.k}")
    if not 0 <= msg.query_id < 2**64:
        raise error("query_id must fit in 64 bits")
    if msg.x_s.ndim != 3 or msg.x_s.shape[0] != NUM_CHANNELS - 3 * msg.k:
        raise error(f"x_s shape {msg.x_s.shape} does not carry {NUM_CHANNELS - 3 * msg.k} channels")
    if len(msg.masks) > 255:
        raise error("too many masks")
    prev = None
    for m in msg.masks:
        if m.ndim != 2 or 0 in m.shape:
            raise error(f"mask shape {m.shape} is not a nonempty plane")
        if prev is not None and not (m.shape[0] < prev[0] and m.shape[1] < prev[1]):
            raise error(f"mask sizes not strictly decreasing: {prev} then {m.shape}")
        prev = m.shape


def encode(msg: QueryMessage) -> bytes:
    try:
        validate(msg, EncodeError)
    except UnsupportedVersionError as exc:
        raise EncodeError(str(exc)) from exc
    mode_byte = msg.mode | (ROI_FALLBACK_FLAG if msg.roi_fallback else 0)
    parts = [
        MAGIC,
        struct.pack("<BBBQ", msg.version, mode_byte, msg.k, msg.query_id),
        struct.pack(f"<B{len(msg.spec.crucial)}B", len(msg.spec.crucial), *msg.spec.crucial),
        encode_tensor(msg.x_s),
        struct.pack("<B", len(msg.masks)),
    ]
    parts.extend(encode_tensor(m) for m in msg.masks)
    return b"".join(parts)


def decode(data: bytes) -> QueryMessage:
    r = _Reader(data)
    if bytes(r.take(len(MAGIC))) != MAGIC:
        raise HeaderError("bad magic")
    (version,) = r.unpack("B")
    if version != VERSION:
        raise UnsupportedVersionError(f"version {version}")
    mode_byte, k, query_id = r.unpack("BBQ")
    (n,) = r.unpack("B")
    crucial = r.unpack(f"{n}B")
    if n != 3 * k:
        raise MalformedMessageError(f"K={k} but {n} crucial channels listed")
    if list(crucial) != sorted(set(crucial)) or (crucial and crucial[-1] >= NUM_CHANNELS):
        raise MalformedMessageError("crucial channels must be ascending, unique and below 192")
    try:
        spec = SplitSpec.from_crucial(crucial)
    except ValueError as exc:
        raise MalformedMessageError(str(exc)) from exc
    x_s = r.tensor()
    (count,) = r.unpack("B")
    masks = [r.tensor() for _ in range(count)]
    r.finish()
    msg = QueryMessage(
        mode=mode_byte & ~ROI_FALLBACK_FLAG,
        k=k,
        query_id=query_id,
        spec=spec,
        x_s=x_s,
        masks=masks,
        roi_fallback=bool(mode_byte & ROI_FALLBACK_FLAG),
        version=version,
    )
    validate(msg)
    return msg


def encode_response(resp: ResponseMessage) -> bytes:
    if resp.embedding.ndim != 1:
        raise EncodeError(f"embedding must be rank 1, got shape {resp.embedding.shape}")
    try:
        return b"".join([
            struct.pack("<Q", resp.query_id),
            encode_tensor(resp.embedding),
            struct.pack("<3Q", resp.xs_elements, resp.mask_elements, resp.total),
        ])
    except struct.error as exc:
        raise EncodeError(str(exc)) from exc


def decode_response(data: bytes) -> ResponseMessage:
    r = _Reader(data)
    (query_id,) = r.unpack("Q")
    emb = r.tensor()
    if emb.ndim != 1:
        raise MalformedMessageError(f"embedding must be rank 1, got shape {emb.shape}")
    xs, masks, total = r.unpack("3Q")
    r.finish()
    if xs + masks != total:
        raise MalformedMessageError(f"element counts {xs} + {masks} != {total}")
    return ResponseMessage(query_id, emb, xs, masks, total)


# -- communication cost -----------------------------------------------------

class CommCost(NamedTuple):
    x_s: int
    masks: int
    total: int


def comm_cost(msg: QueryMessage, paper_accounting: bool = False) -> CommCost:
    """Real-valued elements on the wire, headers and split spec excluded.

    ``paper_accounting`` counts the compact K=10 payload with 160 server
    channels instead of 162, matching the published 35,525 figure.
    """
    c, h, w = msg.x_s.shape
    if paper_accounting:
        if msg.mode != MODE_COMPACT or msg.k != 10:
            raise ValueError("160-channel accounting is defined only for compact mode with K=10")
        c = PAPER_XS_CHANNELS
    xs = int(c * h * w)
    masks = int(sum(m.size for m in msg.masks))
    return CommCost(xs, masks, xs + masks)
