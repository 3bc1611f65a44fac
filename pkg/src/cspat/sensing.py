"""Compressive measurements: matrix generation, application, and noise.

All randomness comes from numpy's PCG64 generator seeded explicitly, so a
(kind, m, n, seed) tuple regenerates a matrix bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DetectorGeometry, SensorData, SourceImage
from .fileio import read_raw, write_raw
from .wave import WaveConfig, adjoint_batch, forward_batch, wave_forward

MATRIX_KINDS = ("bernoulli", "gaussian", "subsample")


@dataclass(frozen=True)
class MeasurementMatrix:
    """Dense m x n measurement matrix with its generation metadata."""

    kind: str
    m: int
    n: int
    seed: int
    entries: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)


def make_matrix(kind: str, m: int, n: int, seed: int = 0) -> MeasurementMatrix:
    """Generate a measurement matrix.

    bernoulli: entries +-1/sqrt(m) with equal probability.
    gaussian:  i.i.d. N(0, 1/m).
    subsample: m rows each selecting one of m equispaced sensors.
    """
    if kind not in MATRIX_KINDS:
        raise ValueError(f"unknown matrix kind {kind!r}, expected one of {MATRIX_KINDS}")
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n (compression only), got m={m}, n={n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    if kind == "bernoulli":
        entries = (2.0 * rng.integers(0, 2, size=(m, n)) - 1.0) / np.sqrt(m)
    elif kind == "gaussian":
        entries = rng.standard_normal((m, n)) / np.sqrt(m)
    else:
        entries = np.zeros((m, n))
        cols = (np.arange(m) * n) // m
        entries[np.arange(m), cols] = 1.0
    entries.setflags(write=False)
    return MeasurementMatrix(kind, m, n, int(seed), entries)


def apply_matrix(A: MeasurementMatrix, data: SensorData) -> SensorData:
    """Mix sensor rows per time sample: (m x n) @ (n x T)."""
    if A.n != data.rows:
        raise ValueError(f"matrix has {A.n} columns but data has {data.rows} rows")
    return SensorData(A.entries @ data.values, data.time_axis)


def apply_matrix_transpose(A: MeasurementMatrix, data: SensorData) -> SensorData:
    """Transpose mixing: (n x m) @ (m x T)."""
    if A.m != data.rows:
        raise ValueError(f"matrix has {A.m} rows but data has {data.rows} rows")
    return SensorData(A.entries.T @ data.values, data.time_axis)


def cs_forward(f: SourceImage, A: MeasurementMatrix, cfg: WaveConfig,
               geometry: DetectorGeometry, check_support: bool = True) -> SensorData:
    """Compressive forward map: mixed pressure traces of the source f."""
    return apply_matrix(A, wave_forward(f, cfg, geometry, check_support=check_support))


def cs_adjoint(data: SensorData, A: MeasurementMatrix, cfg: WaveConfig,
               geometry: DetectorGeometry) -> SourceImage:
    """Adjoint of cs_forward: wave adjoint of the transpose-mixed data."""
    from .wave import wave_adjoint

    return wave_adjoint(apply_matrix_transpose(A, data), cfg, geometry)


def cs_forward_pair(f: np.ndarray, h: np.ndarray, A: MeasurementMatrix,
                    cfg: WaveConfig, geometry: DetectorGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Forward map applied to two images in one batched propagation."""
    traces = forward_batch(np.stack([f, h]), cfg, geometry)
    return A.entries @ traces[0], A.entries @ traces[1]


def cs_adjoint_pair(rf: np.ndarray, rh: np.ndarray, A: MeasurementMatrix,
                    cfg: WaveConfig, geometry: DetectorGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Adjoint applied to two residuals in one batched propagation."""
    mixed = np.einsum("nm,bmt->bnt", A.entries.T, np.stack([rf, rh]))
    imgs = adjoint_batch(mixed, cfg, geometry)
    return imgs[0], imgs[1]


def add_noise(data: SensorData, level: float, seed: int = 0) -> SensorData:
    """Add Gaussian noise rescaled so ||noise|| = level * ||data|| exactly."""
    if level < 0:
        raise ValueError(f"noise level must be >= 0, got {level}")
    if level == 0.0:
        return data.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    eps = rng.standard_normal(data.values.shape)
    scale = np.linalg.norm(data.values)
    if scale == 0.0:
        return data.copy()
    eps *= level * scale / np.linalg.norm(eps)
    return SensorData(data.values + eps, data.time_axis)


def save_matrix(path, A: MeasurementMatrix) -> None:
    """Write entries in the raw array format plus a JSON metadata sidecar."""
    path = Path(path)
    write_raw(path, A.entries)
    meta = {"kind": A.kind, "m": A.m, "n": A.n, "seed": A.seed}
    with open(path.with_name(path.name + ".json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_matrix(path) -> MeasurementMatrix:
    path = Path(path)
    entries = read_raw(path)
    with open(path.with_name(path.name + ".json")) as fh:
        meta = json.load(fh)
    entries.setflags(write=False)
    return MeasurementMatrix(meta["kind"], meta["m"], meta["n"], meta["seed"], entries)
