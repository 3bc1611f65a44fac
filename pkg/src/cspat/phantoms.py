"""Synthetic source phantoms and image-file loading."""

from __future__ import annotations

import numpy as np

from .core import DetectorGeometry, Grid2D, SourceImage
from .errors import ConfigurationError
from .fileio import read_pgm

# Fractions of the detection radius used by the built-in phantoms.  Support
# must stay strictly inside the disc, with margin for the wavefront to clear.
SUPPORT_FRACTION = 0.9


def _check_disc_inside_grid(grid: Grid2D, geometry: DetectorGeometry) -> None:
    cx, cy = geometry.center
    r = geometry.radius
    for x, y in ((cx - r, cy), (cx + r, cy), (cx, cy - r), (cx, cy + r)):
        if not grid.contains(x, y):
            raise ConfigurationError(
                f"detection disc (center ({cx:.3g},{cy:.3g}), radius {r:.3g}) "
                "does not fit inside the grid extent"
            )


def make_cross_phantom(grid: Grid2D, geometry: DetectorGeometry) -> SourceImage:
    """Piecewise-constant cross (two overlapping rectangles) over a smooth
    background bump, supported inside 0.9 of the detection radius.

    The cross carries exactly two positive levels: 0.75 on the arms and 1.0
    where the rectangles overlap.  The bump peaks at 0.3, below both levels,
    so it never introduces a third level on the cross itself.
    """
    _check_disc_inside_grid(grid, geometry)
    R = geometry.radius
    cx, cy = geometry.center
    X, Y = grid.coords()
    dx, dy = X - cx, Y - cy

    long_half, short_half = 0.55 * R, 0.18 * R
    horiz = (np.abs(dx) <= long_half) & (np.abs(dy) <= short_half)
    vert = (np.abs(dx) <= short_half) & (np.abs(dy) <= long_half)
    cross = np.where(horiz & vert, 1.0, np.where(horiz | vert, 0.75, 0.0))

    bx, by = 0.45 * R / np.sqrt(2.0), 0.45 * R / np.sqrt(2.0)
    sigma = 0.18 * R
    bump = 0.3 * np.exp(-((dx - bx) ** 2 + (dy - by) ** 2) / (2.0 * sigma * sigma))

    values = np.maximum(cross, bump)
    values[np.hypot(dx, dy) > SUPPORT_FRACTION * R] = 0.0
    return SourceImage(grid, values)


def gaussian_bump(grid: Grid2D, center: tuple[float, float], sigma: float,
                  cutoff_radius: float | None = None, amplitude: float = 1.0) -> SourceImage:
    """Gaussian bump, hard-truncated to zero outside cutoff_radius."""
    X, Y = grid.coords()
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    values = amplitude * np.exp(-r2 / (2.0 * sigma * sigma))
    if cutoff_radius is not None:
        values[r2 > cutoff_radius * cutoff_radius] = 0.0
    return SourceImage(grid, values)


# Classic head phantom: (intensity, x-center, y-center, x-halfaxis,
# y-halfaxis, rotation in degrees) on the unit square [-1, 1]^2.
_HEAD_ELLIPSES = (
    (1.0, 0.0, 0.0, 0.69, 0.92, 0.0),
    (-0.8, 0.0, -0.0184, 0.6624, 0.874, 0.0),
    (-0.2, 0.22, 0.0, 0.11, 0.31, -18.0),
    (-0.2, -0.22, 0.0, 0.16, 0.41, 18.0),
    (0.1, 0.0, 0.35, 0.21, 0.25, 0.0),
    (0.1, 0.0, 0.1, 0.046, 0.046, 0.0),
    (0.1, 0.0, -0.1, 0.046, 0.046, 0.0),
    (0.1, -0.08, -0.605, 0.046, 0.023, 0.0),
    (0.1, 0.0, -0.605, 0.023, 0.023, 0.0),
    (0.1, 0.06, -0.605, 0.023, 0.046, 0.0),
)


def head_phantom_array(n: int, fill_fraction: float = 0.58) -> np.ndarray:
    """MRI-style head phantom rasterized on an n x n array, values in [0, 1].

    fill_fraction scales the head so it occupies that fraction of the image
    width, leaving margin for the detection-disc support constraint.
    """
    u = np.linspace(-1.0, 1.0, n) / fill_fraction
    X, Y = np.meshgrid(u, u, indexing="ij")
    img = np.zeros((n, n))
    for a, x0, y0, ax, ay, deg in _HEAD_ELLIPSES:
        phi = np.deg2rad(deg)
        xr = (X - x0) * np.cos(phi) + (Y - y0) * np.sin(phi)
        yr = -(X - x0) * np.sin(phi) + (Y - y0) * np.cos(phi)
        img[(xr / ax) ** 2 + (yr / ay) ** 2 <= 1.0] += a
    return np.clip(img, 0.0, 1.0)


def _bilinear_resample(src: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Resample src (rows x cols) onto an nx x ny node grid, edge-aligned:
    node (0,0) maps to src[0,0] and node (nx-1, ny-1) to src[-1,-1].
    Output axis 0 follows src columns (x), axis 1 follows src rows (y)."""
    h, w = src.shape
    u = np.linspace(0.0, w - 1.0, nx)  # column coordinate per x-node
    v = np.linspace(0.0, h - 1.0, ny)  # row coordinate per y-node
    u0 = np.minimum(np.floor(u).astype(int), w - 2) if w > 1 else np.zeros(nx, int)
    v0 = np.minimum(np.floor(v).astype(int), h - 2) if h > 1 else np.zeros(ny, int)
    fu = u - u0
    fv = v - v0
    if w == 1:
        fu = np.zeros(nx)
        u1 = u0
    else:
        u1 = u0 + 1
    if h == 1:
        fv = np.zeros(ny)
        v1 = v0
    else:
        v1 = v0 + 1
    FU, FV = np.meshgrid(fu, fv, indexing="ij")
    c00 = src[np.ix_(v0, u0)].T
    c01 = src[np.ix_(v1, u0)].T
    c10 = src[np.ix_(v0, u1)].T
    c11 = src[np.ix_(v1, u1)].T
    return ((1 - FU) * (1 - FV) * c00 + (1 - FU) * FV * c01
            + FU * (1 - FV) * c10 + FU * FV * c11)


def load_image_phantom(path, grid: Grid2D,
                       geometry: DetectorGeometry | None = None) -> SourceImage:
    """Load an 8-bit PGM, rescale to [0, 1], resample onto the grid by
    bilinear interpolation, and (when a geometry is given) mask to the
    support disc of 0.9 * radius."""
    raw = read_pgm(path)
    values = _bilinear_resample(raw / 255.0, grid.nx, grid.ny)
    if geometry is not None:
        _check_disc_inside_grid(grid, geometry)
        X, Y = grid.coords()
        r = np.hypot(X - geometry.center[0], Y - geometry.center[1])
        values[r > SUPPORT_FRACTION * geometry.radius] = 0.0
    return SourceImage(grid, values)
