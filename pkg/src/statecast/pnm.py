"""Binary PPM (P6) and PGM (P5) reading and writing."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _read_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    if not data.startswith(magic):
        raise ValueError(f"not a {magic.decode()} file")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    return fields[0], fields[1], fields[2], pos + 1


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("PPM needs an HxWx3 array")
    h, w = image.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + image.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    w, h, maxval, offset = _read_header(data, b"P6")
    if maxval != 255:
        raise ValueError("only 8-bit PPM is supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=offset)
    return raster.reshape(h, w, 3).copy()


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise ValueError("PGM needs an HxW array")
    h, w = image.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + image.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    w, h, maxval, offset = _read_header(data, b"P5")
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset)
    return raster.reshape(h, w).copy()
