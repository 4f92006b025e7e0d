"""Plane currency and portable graymap / pixmap serialization.

A Plane is a plain 2-D float64 array; image-valued planes live in [0, 1].
Disk format is 16-bit binary PGM (P5, big-endian samples per the PGM
convention) with v stored as round(v * 65535).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError

Plane = np.ndarray

_U16_MAX = 65535


def as_plane(values) -> Plane:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidParameterError(f"plane must be a non-empty 2-D array, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


def write_pgm16(path, plane: Plane) -> None:
    plane = as_plane(plane)
    h, w = plane.shape
    samples = np.round(np.clip(plane, 0.0, 1.0) * _U16_MAX).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n{_U16_MAX}\n".encode("ascii"))
        f.write(samples.tobytes())


def read_pgm(path) -> Plane:
    """Read an 8- or 16-bit binary PGM into a [0, 1] plane."""
    with open(path, "rb") as f:
        data = f.read()
    magic, w, h, maxval, offset = _parse_pnm_header(data, b"P5")
    if maxval <= 255:
        raw = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset)
    else:
        raw = np.frombuffer(data, dtype=">u2", count=w * h, offset=offset)
    return raw.reshape(h, w).astype(np.float64) / maxval


def write_pgm8(path, plane: Plane) -> None:
    plane = as_plane(plane)
    h, w = plane.shape
    samples = np.round(np.clip(plane, 0.0, 1.0) * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(samples.tobytes())


def write_ppm8(path, rgb: np.ndarray) -> None:
    """8-bit binary PPM from an (h, w, 3) array in [0, 1]."""
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidParameterError(f"expected (h, w, 3) array, got shape {arr.shape}")
    h, w, _ = arr.shape
    samples = np.round(np.clip(arr, 0.0, 1.0) * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(samples.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    magic, w, h, maxval, offset = _parse_pnm_header(data, b"P6")
    if maxval <= 255:
        raw = np.frombuffer(data, dtype=np.uint8, count=3 * w * h, offset=offset)
    else:
        raw = np.frombuffer(data, dtype=">u2", count=3 * w * h, offset=offset)
    return raw.reshape(h, w, 3).astype(np.float64) / maxval


def _parse_pnm_header(data: bytes, magic: bytes):
    if not data.startswith(magic):
        raise InvalidParameterError(f"not a {magic.decode()} file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if w < 1 or h < 1 or maxval < 1:
        raise InvalidParameterError("corrupt PNM header")
    return magic, w, h, maxval, pos
