"""Simplified block video codec with corruption-mask generation.

Frames are tiled into 16x16 macroblocks. I-frames code every block INTRA
(quantized pixels around the block's own DC, no prediction from neighbours).
P-frames reference the previous reconstructed frame: a block is SKIP when the
co-located block already matches, otherwise INTER with the best full-search
motion vector. Each packet carries a run of whole macroblocks, so losing a
packet corrupts exactly those blocks. The decoder marks a block CORRUPT when
its packet is missing or its motion-compensated reference touches a corrupt
4x4 cell of the reference mask.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .pnm import read_pgm, write_pgm

MB = 16
SUB = 4
MAGIC = b"SCV1"
MID_GRAY = 128


class Mode(IntEnum):
    INTRA = 0
    INTER = 1
    SKIP = 2


class MacroblockTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class CodecConfig:
    gop: int = 30
    q: int = 8
    mtu: int = 1200
    search_range: int = 8
    skip_threshold: int = 64

    def __post_init__(self):
        if self.gop < 1:
            raise ValueError("gop must be >= 1")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.mtu < 64:
            raise ValueError("mtu must be >= 64")
        if self.search_range < 0:
            raise ValueError("search_range must be >= 0")


@dataclass
class Macroblock:
    position: tuple[int, int]
    mode: Mode
    motion_vector: tuple[int, int]
    residual: np.ndarray | None   # (16, 16, 3) int16, None for SKIP
    dc: tuple[int, int, int] = (0, 0, 0)


@dataclass
class EncodedFrame:
    """Block-coded frame stored as per-block arrays, indexed (block_row, block_col)."""

    frame_index: int
    kind: str                      # "I" or "P"
    width: int
    height: int
    modes: np.ndarray              # (nby, nbx) int8 Mode values
    motion: np.ndarray             # (nby, nbx, 2) int64 (dx, dy); reference = position - mv
    residual: np.ndarray           # (nby, nbx, 16, 16, 3) int16
    dc: np.ndarray                 # (nby, nbx, 3) int16, INTRA only
    q: int = 8
    packet_map: list[tuple[int, int, int]] = field(default_factory=list)  # (packet_id, start, stop)
    recon: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def blocks_x(self) -> int:
        return self.width // MB

    @property
    def blocks_y(self) -> int:
        return self.height // MB

    @property
    def num_macroblocks(self) -> int:
        return self.blocks_x * self.blocks_y

    @property
    def macroblocks(self) -> list[Macroblock]:
        out = []
        for i in range(self.blocks_y):
            for j in range(self.blocks_x):
                mode = Mode(int(self.modes[i, j]))
                out.append(Macroblock(
                    (j, i), mode, tuple(int(c) for c in self.motion[i, j]),
                    None if mode == Mode.SKIP else self.residual[i, j],
                    tuple(int(c) for c in self.dc[i, j])))
        return out

    def macroblock_costs(self) -> np.ndarray:
        """Modeled bytes per macroblock in raster order: 4 + 2*nonzero (+2 INTER).

        A residual position counts as nonzero when any of its channels is.
        """
        nz = (self.residual != 0).any(axis=-1).sum(axis=(2, 3))
        cost = 4 + 2 * nz + 2 * (self.modes == Mode.INTER)
        cost[self.modes == Mode.SKIP] = 4
        return cost.ravel().astype(np.int64)

    def modeled_bytes(self) -> int:
        return int(self.macroblock_costs().sum())


@dataclass
class Packet:
    packet_id: int
    frame_index: int
    payload_bytes: int
    mb_start: int
    mb_stop: int
    lost: bool = False


@dataclass
class CorruptionMask:
    """Per 4x4 sub-block validity; ``valid`` is (H/4, W/4) bool, True = decoded correctly."""

    valid: np.ndarray
    frame_index: int

    @classmethod
    def all_valid(cls, width: int, height: int, frame_index: int = 0) -> CorruptionMask:
        return cls(np.ones((height // SUB, width // SUB), dtype=bool), frame_index)

    @classmethod
    def all_corrupt(cls, width: int, height: int, frame_index: int = 0) -> CorruptionMask:
        return cls(np.zeros((height // SUB, width // SUB), dtype=bool), frame_index)

    @property
    def is_clean(self) -> bool:
        return bool(self.valid.all())

    def pixel_valid(self) -> np.ndarray:
        return np.repeat(np.repeat(self.valid, SUB, axis=0), SUB, axis=1)

    def to_pgm(self, path: str | Path) -> None:
        write_pgm(path, np.where(self.valid, 255, 0).astype(np.uint8))

    @classmethod
    def from_pgm(cls, path: str | Path, frame_index: int = 0) -> CorruptionMask:
        return cls(read_pgm(path) >= 128, frame_index)


class MaskCache:
    """Masks of the most recent ``capacity`` decoded frames, oldest first."""

    def __init__(self, capacity: int = 10):
        self._masks: deque[CorruptionMask] = deque(maxlen=capacity)

    def push(self, mask: CorruptionMask) -> None:
        self._masks.append(mask)

    def get(self, frame_index: int) -> CorruptionMask | None:
        for m in self._masks:
            if m.frame_index == frame_index:
                return m
        return None

    def frames(self) -> list[int]:
        return [m.frame_index for m in self._masks]

    def __len__(self) -> int:
        return len(self._masks)


def pixel_loss_rate(mask: CorruptionMask) -> float:
    return float(1.0 - mask.valid.mean())


# --- encoder ------------------------------------------------------------------------

def _quantize(values: np.ndarray, q: int) -> np.ndarray:
    """Round values/q half away from zero."""
    return (np.sign(values) * np.floor(np.abs(values) / q + 0.5)).astype(np.int16)


def search_candidates(search_range: int) -> np.ndarray:
    """Motion vectors in preference order: smaller |dx|+|dy| first, then raster order."""
    r = range(-search_range, search_range + 1)
    cands = sorted(((dx, dy) for dy in r for dx in r), key=lambda c: (abs(c[0]) + abs(c[1]), c[1], c[0]))
    return np.ascontiguousarray(cands, dtype=np.int64)


def _blocks(image: np.ndarray) -> np.ndarray:
    """(H, W, 3) -> (nby, nbx, 16, 16, 3) view."""
    h, w = image.shape[:2]
    return image.reshape(h // MB, MB, w // MB, MB, 3).swapaxes(1, 2)


def _unblocks(blocks: np.ndarray) -> np.ndarray:
    nby, nbx = blocks.shape[:2]
    return blocks.swapaxes(1, 2).reshape(nby * MB, nbx * MB, 3)


def motion_compensate(ref: np.ndarray, motion: np.ndarray) -> np.ndarray:
    """Prediction blocks: block at (x, y) copies ``ref`` at (x - dx, y - dy)."""
    nby, nbx = motion.shape[:2]
    pred = np.empty((nby, nbx, MB, MB, 3), dtype=ref.dtype)
    for i in range(nby):
        for j in range(nbx):
            dx, dy = motion[i, j]
            y, x = i * MB - dy, j * MB - dx
            pred[i, j] = ref[y:y + MB, x:x + MB]
    return pred


def _encode_intra(frame: np.ndarray, index: int, q: int) -> EncodedFrame:
    blocks = _blocks(frame.astype(np.int32))
    dc = np.floor(blocks.mean(axis=(2, 3)) + 0.5).astype(np.int32)
    residual = _quantize(blocks - dc[:, :, None, None, :], q)
    nby, nbx = blocks.shape[:2]
    recon = np.clip(dc[:, :, None, None, :] + residual.astype(np.int32) * q, 0, 255).astype(np.uint8)
    return EncodedFrame(index, "I", frame.shape[1], frame.shape[0],
                        np.full((nby, nbx), Mode.INTRA, dtype=np.int8),
                        np.zeros((nby, nbx, 2), dtype=np.int64), residual,
                        dc.astype(np.int16), q, recon=_unblocks(recon))


def _encode_inter(frame: np.ndarray, ref: np.ndarray, index: int, cfg: CodecConfig, backend) -> EncodedFrame:
    cands = search_candidates(cfg.search_range)
    modes, motion, _ = backend.motion_search(np.ascontiguousarray(frame), np.ascontiguousarray(ref),
                                             cands, MB, cfg.skip_threshold)
    pred = motion_compensate(ref, motion).astype(np.int32)
    residual = _quantize(_blocks(frame.astype(np.int32)) - pred, cfg.q)
    residual[modes == Mode.SKIP] = 0
    recon = np.clip(pred + residual.astype(np.int32) * cfg.q, 0, 255).astype(np.uint8)
    nby, nbx = modes.shape
    return EncodedFrame(index, "P", frame.shape[1], frame.shape[0], modes.astype(np.int8),
                        motion, residual, np.zeros((nby, nbx, 3), dtype=np.int16), cfg.q,
                        recon=_unblocks(recon))


def encode(frames: Iterable[np.ndarray], cfg: CodecConfig | None = None, *, backend=None,
           first_index: int = 0) -> list[EncodedFrame]:
    """Encode a frame sequence; frame 0 and every ``gop``-th frame are I-frames."""
    cfg = cfg or CodecConfig()
    backend = backend or kernels
    out: list[EncodedFrame] = []
    ref = None
    shape = None
    for n, frame in enumerate(frames):
        frame = np.asarray(frame, dtype=np.uint8)
        h, w = frame.shape[:2]
        if h % MB or w % MB:
            raise ValueError(f"resolution {w}x{h} is not a multiple of {MB}")
        if shape is not None and frame.shape != shape:
            raise ValueError("all frames must share one resolution")
        shape = frame.shape
        if n % cfg.gop == 0:
            ef = _encode_intra(frame, first_index + n, cfg.q)
        else:
            ef = _encode_inter(frame, ref, first_index + n, cfg, backend)
        ef.packet_map = [(p.packet_id, p.mb_start, p.mb_stop) for p in packetize(ef, cfg.mtu)]
        ref = ef.recon
        out.append(ef)
    return out


def packetize(ef: EncodedFrame, mtu: int = 1200) -> list[Packet]:
    """Greedily pack consecutive macroblocks into packets of at most ``mtu`` modeled bytes."""
    if mtu < 64:
        raise ValueError("mtu must be >= 64")
    costs = ef.macroblock_costs()
    packets: list[Packet] = []
    start, size = 0, 0
    for i, c in enumerate(costs):
        if c > mtu:
            raise MacroblockTooLarge(f"macroblock too large: {int(c)} bytes > mtu {mtu}")
        if size + c > mtu:
            packets.append(Packet(len(packets), ef.frame_index, size, start, i))
            start, size = i, 0
        size += int(c)
    packets.append(Packet(len(packets), ef.frame_index, size, start, len(costs)))
    return packets


# --- decoder ------------------------------------------------------------------------

def reference_cells(i: int, j: int, dx: int, dy: int) -> tuple[slice, slice]:
    """4x4 cells of the reference mask touched by block (i, j) with motion (dx, dy)."""
    y, x = i * MB - dy, j * MB - dx
    return slice(y // SUB, (y + MB - 1) // SUB + 1), slice(x // SUB, (x + MB - 1) // SUB + 1)


def decode_with_mask(ef: EncodedFrame, packets: Sequence[Packet],
                     ref: tuple[np.ndarray, CorruptionMask] | None,
                     cache: MaskCache | None = None) -> tuple[np.ndarray, CorruptionMask]:
    nby, nbx = ef.blocks_y, ef.blocks_x
    received = np.zeros(nby * nbx, dtype=bool)
    for p in packets:
        if not p.lost:
            received[p.mb_start:p.mb_stop] = True
    received = received.reshape(nby, nbx)

    if ef.kind == "P":
        if ref is None:
            raise ValueError(f"P-frame {ef.frame_index} needs a reference frame")
        ref_img, ref_mask = ref
        if ref_mask.valid.shape != (ef.height // SUB, ef.width // SUB):
            raise ValueError("reference mask dimensions do not match the frame")
        ok = received.copy()
        for i in range(nby):
            for j in range(nbx):
                if ok[i, j] and not ref_mask.valid[reference_cells(i, j, *ef.motion[i, j])].all():
                    ok[i, j] = False
        pred = motion_compensate(ref_img, ef.motion).astype(np.int32)
        recon = np.clip(pred + ef.residual.astype(np.int32) * ef.q, 0, 255).astype(np.uint8)
        fallback = _blocks(ref_img)
    else:
        ok = received
        dc = ef.dc.astype(np.int32)[:, :, None, None, :]
        recon = np.clip(dc + ef.residual.astype(np.int32) * ef.q, 0, 255).astype(np.uint8)
        fallback = np.full_like(recon, MID_GRAY)
    out = np.where(ok[:, :, None, None, None], recon, fallback)
    valid = np.repeat(np.repeat(ok, MB // SUB, axis=0), MB // SUB, axis=1)
    mask = CorruptionMask(valid, ef.frame_index)
    if cache is not None:
        cache.push(mask)
    return _unblocks(out), mask


# --- bitstream ----------------------------------------------------------------------

_HEADER = struct.Struct("<4sIIII")
_FRAME = struct.Struct("<IcI")
_MBREC = struct.Struct("<Bbb3h")
_PKT = struct.Struct("<III")


def write_bitstream(path: str | Path, frames: Sequence[EncodedFrame], cfg: CodecConfig) -> None:
    if not frames:
        raise ValueError("no frames to write")
    w, h = frames[0].width, frames[0].height
    chunks = [_HEADER.pack(MAGIC, w, h, cfg.gop, cfg.q)]
    for ef in frames:
        chunks.append(_FRAME.pack(ef.frame_index, ef.kind.encode(), len(ef.packet_map)))
        for i in range(ef.blocks_y):
            for j in range(ef.blocks_x):
                dx, dy = (int(c) for c in ef.motion[i, j])
                chunks.append(_MBREC.pack(int(ef.modes[i, j]), dx, dy, *(int(c) for c in ef.dc[i, j])))
                flat = ef.residual[i, j].ravel()
                nz = np.flatnonzero(flat)
                chunks.append(struct.pack("<H", len(nz)))
                chunks.append(nz.astype("<u2").tobytes() + flat[nz].astype("<i2").tobytes())
        for pid, start, stop in ef.packet_map:
            chunks.append(_PKT.pack(pid, start, stop))
    Path(path).write_bytes(b"".join(chunks))


def read_bitstream(path: str | Path) -> tuple[list[EncodedFrame], CodecConfig, tuple[int, int]]:
    data = Path(path).read_bytes()
    magic, w, h, gop, q = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError("not a SCV1 bitstream")
    pos = _HEADER.size
    nby, nbx = h // MB, w // MB
    frames = []
    while pos < len(data):
        index, kind, npk = _FRAME.unpack_from(data, pos)
        pos += _FRAME.size
        modes = np.zeros((nby, nbx), dtype=np.int8)
        motion = np.zeros((nby, nbx, 2), dtype=np.int64)
        dc = np.zeros((nby, nbx, 3), dtype=np.int16)
        residual = np.zeros((nby, nbx, MB * MB * 3), dtype=np.int16)
        for i in range(nby):
            for j in range(nbx):
                mode, dx, dy, d0, d1, d2 = _MBREC.unpack_from(data, pos)
                pos += _MBREC.size
                modes[i, j], motion[i, j], dc[i, j] = mode, (dx, dy), (d0, d1, d2)
                (n,) = struct.unpack_from("<H", data, pos)
                pos += 2
                idx = np.frombuffer(data, dtype="<u2", count=n, offset=pos)
                pos += 2 * n
                residual[i, j, idx] = np.frombuffer(data, dtype="<i2", count=n, offset=pos)
                pos += 2 * n
        pmap = []
        for _ in range(npk):
            pmap.append(_PKT.unpack_from(data, pos))
            pos += _PKT.size
        ef = EncodedFrame(index, kind.decode(), w, h, modes, motion,
                          residual.reshape(nby, nbx, MB, MB, 3), dc, q, pmap)
        frames.append(ef)
    return frames, CodecConfig(gop=gop, q=q), (w, h)
