"""File formats: 8-bit binary PGM images and the raw float64 array dump.

The raw dump is little-endian float64, row-major, preceded by a 16-byte
header: magic "CSPT", u32 rows, u32 cols, u32 reserved (zero).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InputFileError

RAW_MAGIC = b"CSPT"
_HEADER = struct.Struct("<4sIII")


def write_pgm(path, values: np.ndarray) -> None:
    """Write a 2-D array as binary 8-bit PGM, mapping [min, max] -> [0, 255].

    The scale is recorded in a `<path>.json` sidecar so the mapping stays
    invertible.  Array axis 0 is x and axis 1 is y; rows of the PGM raster
    are y-indices, columns x-indices.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"PGM output needs a 2-D array, got shape {values.shape}")
    vmin = float(values.min())
    vmax = float(values.max())
    if vmax > vmin:
        scaled = np.round((values - vmin) / (vmax - vmin) * 255.0)
    else:
        scaled = np.zeros_like(values)
    raster = scaled.astype(np.uint8).T  # rows = y, cols = x
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{raster.shape[1]} {raster.shape[0]}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())
    sidecar = {"min": vmin, "max": vmax}
    with open(path.with_name(path.name + ".json"), "w") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")


def _read_pgm_token(fh) -> bytes:
    """Next whitespace-delimited token, skipping '#' comment lines."""
    token = b""
    while True:
        ch = fh.read(1)
        if ch == b"":
            raise InputFileError("unexpected end of PGM header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = fh.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM (P5) into a (rows, cols) uint8-valued array."""
    path = Path(path)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise InputFileError(f"cannot open image file {path}: {exc}") from exc
    with fh:
        magic = fh.read(2)
        if magic != b"P5":
            raise InputFileError(f"{path}: not a binary PGM (P5) file, magic {magic!r}")
        try:
            width = int(_read_pgm_token(fh))
            height = int(_read_pgm_token(fh))
            maxval = int(_read_pgm_token(fh))
        except ValueError as exc:
            raise InputFileError(f"{path}: malformed PGM header") from exc
        if maxval != 255:
            raise InputFileError(
                f"{path}: only 8-bit PGM supported (maxval 255, got {maxval})"
            )
        data = fh.read(width * height)
        if len(data) != width * height:
            raise InputFileError(f"{path}: truncated PGM pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width).astype(np.float64)


def write_raw(path, values: np.ndarray) -> None:
    """Dump a 2-D float array in the 16-byte-header raw format."""
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 2:
        raise ValueError(f"raw dump needs a 2-D array, got shape {values.shape}")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RAW_MAGIC, rows, cols, 0))
        fh.write(values.tobytes())


def read_raw(path) -> np.ndarray:
    path = Path(path)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise InputFileError(f"cannot open raw array file {path}: {exc}") from exc
    with fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise InputFileError(f"{path}: truncated raw array header")
        magic, rows, cols, _ = _HEADER.unpack(header)
        if magic != RAW_MAGIC:
            raise InputFileError(f"{path}: bad magic {magic!r}, expected {RAW_MAGIC!r}")
        payload = fh.read(rows * cols * 8)
        if len(payload) != rows * cols * 8:
            raise InputFileError(f"{path}: truncated raw array payload")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()
