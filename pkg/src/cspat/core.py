"""Grids, images, detector geometry and shared numeric utilities.

All spatial quantities live on a regular 2-D grid of nodes.  By convention
``values[ix, iy]`` sits at physical position ``origin + spacing * (ix, iy)``,
so the first array axis is x.  Default units are grid units (spacing 1,
sound speed 1), which keeps solver parameters dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Grid2D:
    """Regular rectangular grid of nx * ny nodes."""

    nx: int
    ny: int
    spacing: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ConfigurationError(
                f"grid must be at least 3x3 (got {self.nx}x{self.ny}): "
                "the 5-point Laplacian stencil does not fit"
            )
        if not self.spacing > 0:
            raise ConfigurationError(f"grid spacing must be positive, got {self.spacing}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def extent(self) -> tuple[float, float]:
        """Physical side lengths (x, y)."""
        return ((self.nx - 1) * self.spacing, (self.ny - 1) * self.spacing)

    @property
    def center(self) -> tuple[float, float]:
        ex, ey = self.extent
        return (self.origin[0] + 0.5 * ex, self.origin[1] + 0.5 * ey)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays (X, Y), each of shape (nx, ny)."""
        x = self.origin[0] + self.spacing * np.arange(self.nx)
        y = self.origin[1] + self.spacing * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def contains(self, x: float, y: float) -> bool:
        ex, ey = self.extent
        return (
            self.origin[0] <= x <= self.origin[0] + ex
            and self.origin[1] <= y <= self.origin[1] + ey
        )


class SourceImage:
    """Scalar field sampled on a Grid2D (a source, a modified source, or a
    sound-speed map)."""

    def __init__(self, grid: Grid2D, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid {grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("image values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: Grid2D) -> "SourceImage":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def full(cls, grid: Grid2D, value: float) -> "SourceImage":
        return cls(grid, np.full(grid.shape, float(value)))

    def copy(self) -> "SourceImage":
        return SourceImage(self.grid, self.values.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __repr__(self):
        return f"SourceImage({self.grid.nx}x{self.grid.ny}, |v|={self.norm():.4g})"


@dataclass(frozen=True)
class TimeAxis:
    """Uniform output time sampling on [0, t_max]."""

    num_samples: int
    t_max: float

    def __post_init__(self):
        if self.num_samples < 3:
            raise ConfigurationError(
                f"need at least 3 time samples for a second time derivative, got {self.num_samples}"
            )
        if not self.t_max > 0:
            raise ConfigurationError(f"t_max must be positive, got {self.t_max}")

    @property
    def dt(self) -> float:
        return self.t_max / (self.num_samples - 1)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.num_samples)


@dataclass(frozen=True)
class DetectorGeometry:
    """Point sensors equispaced on a circular arc around the sample.

    A full circle (the default coverage of 2*pi) distributes n sensors with
    step coverage/n, endpoint excluded; a partial arc includes both endpoints
    and is centered on the +x axis.
    """

    center: tuple[float, float]
    radius: float
    num_sensors: int
    angular_coverage: float = 2.0 * np.pi

    def __post_init__(self):
        if self.num_sensors < 1:
            raise ConfigurationError(f"need at least one sensor, got {self.num_sensors}")
        if not self.radius > 0:
            raise ConfigurationError(f"detector radius must be positive, got {self.radius}")
        if not 0 < self.angular_coverage <= 2.0 * np.pi + 1e-12:
            raise ConfigurationError(
                f"angular coverage must be in (0, 2*pi], got {self.angular_coverage}"
            )

    @property
    def is_full_circle(self) -> bool:
        return self.angular_coverage >= 2.0 * np.pi - 1e-12

    def sensor_positions(self) -> np.ndarray:
        """(num_sensors, 2) array of physical sensor coordinates."""
        n = self.num_sensors
        if self.is_full_circle:
            theta = 2.0 * np.pi * np.arange(n) / n
        elif n == 1:
            theta = np.array([0.0])
        else:
            theta = np.linspace(-0.5 * self.angular_coverage, 0.5 * self.angular_coverage, n)
        return np.stack(
            [
                self.center[0] + self.radius * np.cos(theta),
                self.center[1] + self.radius * np.sin(theta),
            ],
            axis=1,
        )

    def validate_in(self, grid: Grid2D) -> None:
        """Raise unless every sensor lies inside the grid's physical extent."""
        for sx, sy in self.sensor_positions():
            if not grid.contains(sx, sy):
                raise ConfigurationError(
                    f"sensor at ({sx:.3g}, {sy:.3g}) lies outside the grid extent; "
                    "shrink the detection radius or enlarge the grid"
                )


class SensorData:
    """Time series recorded at detectors, or compressive combinations of them.

    values has shape (rows, num_samples): rows is the number of sensors for
    raw data, or the number of measurement channels after compression.
    """

    def __init__(self, values: np.ndarray, time_axis: TimeAxis):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"sensor data must be 2-D (rows x time), got shape {values.shape}")
        if values.shape[1] != time_axis.num_samples:
            raise ValueError(
                f"sensor data has {values.shape[1]} time samples, "
                f"time axis expects {time_axis.num_samples}"
            )
        if values.shape[0] < 1:
            raise ValueError("sensor data needs at least one row")
        if not np.all(np.isfinite(values)):
            raise ValueError("sensor data must be finite")
        self.values = values
        self.time_axis = time_axis

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, rows: int, time_axis: TimeAxis) -> "SensorData":
        return cls(np.zeros((rows, time_axis.num_samples)), time_axis)

    def copy(self) -> "SensorData":
        return SensorData(self.values.copy(), self.time_axis)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __repr__(self):
        return f"SensorData({self.rows}x{self.time_axis.num_samples})"


def discrete_laplacian(img: SourceImage) -> SourceImage:
    """5-point Laplacian with zero (Dirichlet) padding outside the grid."""
    return SourceImage(img.grid, laplacian_array(img.values, img.grid.spacing))


def laplacian_array(v: np.ndarray, spacing: float) -> np.ndarray:
    """5-point Dirichlet Laplacian on a raw array; nodes outside count as 0."""
    out = -4.0 * v.copy()
    out[1:, :] += v[:-1, :]
    out[:-1, :] += v[1:, :]
    out[:, 1:] += v[:, :-1]
    out[:, :-1] += v[:, 1:]
    out /= spacing * spacing
    return out


def relative_l2_error(a: SourceImage, b: SourceImage) -> float:
    """||a - b|| / ||b||; falls back to ||a|| when b is identically zero."""
    if a.grid.shape != b.grid.shape:
        raise ValueError(f"grid shapes differ: {a.grid.shape} vs {b.grid.shape}")
    nb = np.linalg.norm(b.values)
    if nb == 0.0:
        return float(np.linalg.norm(a.values))
    return float(np.linalg.norm(a.values - b.values) / nb)


def psnr(recon: SourceImage, truth: SourceImage) -> float:
    """Peak signal-to-noise ratio in dB, peak taken from the reference image."""
    if recon.grid.shape != truth.grid.shape:
        raise ValueError(f"grid shapes differ: {recon.grid.shape} vs {truth.grid.shape}")
    mse = float(np.mean((recon.values - truth.values) ** 2))
    peak = float(np.max(np.abs(truth.values)))
    if mse == 0.0:
        return float("inf")
    if peak == 0.0:
        return float("-inf")
    return float(10.0 * np.log10(peak * peak / mse))


def support_radius_check(img: SourceImage, geometry: DetectorGeometry,
                         rel_tol: float = 1e-12) -> None:
    """Raise unless the image support sits strictly inside the detection disc.

    Pixels with |value| <= rel_tol * max|value| count as zero.
    """
    vmax = float(np.max(np.abs(img.values)))
    if vmax == 0.0:
        return
    X, Y = img.grid.coords()
    r = np.hypot(X - geometry.center[0], Y - geometry.center[1])
    outside = r >= geometry.radius
    bad = np.abs(img.values[outside]) > rel_tol * vmax
    if np.any(bad):
        worst = float(np.max(np.abs(img.values[outside])))
        raise ConfigurationError(
            f"source support leaks outside the detection disc "
            f"(max outside amplitude {worst:.3g} vs peak {vmax:.3g})"
        )
