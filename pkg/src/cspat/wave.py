"""Time-domain wave propagation and its exact discrete adjoint.

The forward map takes an initial pressure f to pressure traces at the
detector positions: a second-order leapfrog scheme integrates
p_tt = c^2(r) * Lap(p) with p(., 0) = f and p_t(., 0) = 0, and each output
sample gathers the field at the sensors by bilinear interpolation.  A
damped sponge layer absorbs outgoing waves near the grid edges; the
damping enters the recurrence symmetrically,

    (1 + g*dt) p[k+1] = 2 p[k] - (1 - g*dt) p[k-1] + dt^2 c^2 Lap(p[k]),

so the adjoint is the mechanical transpose of the same loop and the
dot-product identity holds to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse
from numba import njit, prange

from .core import (
    DetectorGeometry,
    Grid2D,
    SensorData,
    SourceImage,
    TimeAxis,
    laplacian_array,
    support_radius_check,
)
from .errors import CFLError, ConfigurationError, InstabilityError, NonConvergenceError

MAX_COURANT = 0.5


@dataclass(frozen=True)
class WaveConfig:
    """Solver configuration: sound speed map, output time axis, substepping
    and sponge layer.

    cfl_substeps = 0 picks the substep count automatically as
    ceil(c_max * dt_out / (0.5 * spacing)).  boundary_width is the sponge
    thickness in nodes (0 disables absorption, leaving hard Dirichlet walls);
    boundary_damping scales the peak damping rate in units of c_max/spacing.
    """

    sound_speed: SourceImage
    time_axis: TimeAxis
    cfl_substeps: int = 0
    boundary_width: int = 16
    boundary_damping: float = 1.0

    def __post_init__(self):
        c = self.sound_speed.values
        if not np.all(c > 0):
            raise ConfigurationError("sound speed must be positive everywhere")
        if self.cfl_substeps < 0:
            raise ConfigurationError("cfl_substeps must be >= 0 (0 = automatic)")
        grid = self.sound_speed.grid
        if self.boundary_width < 0 or self.boundary_width >= min(grid.nx, grid.ny) // 2:
            raise ConfigurationError(
                f"boundary width {self.boundary_width} does not fit a "
                f"{grid.nx}x{grid.ny} grid"
            )
        if self.boundary_damping < 0:
            raise ConfigurationError("boundary damping must be >= 0")

    @property
    def grid(self) -> Grid2D:
        return self.sound_speed.grid

    def substeps(self) -> int:
        if self.cfl_substeps > 0:
            k = self.cfl_substeps
        else:
            c_max = float(np.max(self.sound_speed.values))
            k = max(1, int(np.ceil(c_max * self.time_axis.dt / (MAX_COURANT * self.grid.spacing))))
        return k

    def internal_dt(self) -> float:
        return self.time_axis.dt / self.substeps()

    def check_cfl(self) -> None:
        c_max = float(np.max(self.sound_speed.values))
        dt = self.internal_dt()
        h = self.grid.spacing
        courant = c_max * dt / h
        if courant > MAX_COURANT + 1e-12:
            raise CFLError(
                f"CFL violated: c_max={c_max:.6g}, dt={dt:.6g}, spacing={h:.6g} "
                f"gives Courant number {courant:.4g} > {MAX_COURANT}; "
                "increase cfl_substeps or coarsen the time axis"
            )


class PressureField:
    """Leapfrog state: a batch of prev/curr/next time-level buffers."""

    def __init__(self, grid: Grid2D, batch: int = 1):
        self.grid = grid
        shape = (batch, grid.nx, grid.ny)
        self.prev = np.zeros(shape)
        self.curr = np.zeros(shape)
        self.next = np.zeros(shape)
        self.time_index = 0

    def rotate(self) -> None:
        self.prev, self.curr, self.next = self.curr, self.next, self.prev
        self.time_index += 1

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.curr)) and np.all(np.isfinite(self.prev))):
            raise InstabilityError(
                f"non-finite pressure at internal step {self.time_index}; "
                "the scheme blew up (check CFL and damping settings)"
            )


@njit(cache=True, parallel=True)
def _step_forward(pc, pp, pn, csq, da, db, coef):
    """pn = da*(2*pc + coef*csq*lap5(pc)) - db*pp, Dirichlet outside."""
    nb, nx, ny = pc.shape
    for flat in prange(nb * nx):
        k = flat // nx
        i = flat % nx
        for j in range(ny):
            acc = -4.0 * pc[k, i, j]
            if i > 0:
                acc += pc[k, i - 1, j]
            if i < nx - 1:
                acc += pc[k, i + 1, j]
            if j > 0:
                acc += pc[k, i, j - 1]
            if j < ny - 1:
                acc += pc[k, i, j + 1]
            pn[k, i, j] = da[i, j] * (2.0 * pc[k, i, j] + coef * csq[i, j] * acc) \
                - db[i, j] * pp[k, i, j]


@njit(cache=True, parallel=True)
def _step_adjoint(qc, qp, qn, v, da, coef):
    """qn = qp + 2*da*qc + coef*lap5(v), with v = csq*da*qc precomputed."""
    nb, nx, ny = qc.shape
    for flat in prange(nb * nx):
        k = flat // nx
        i = flat % nx
        for j in range(ny):
            acc = -4.0 * v[k, i, j]
            if i > 0:
                acc += v[k, i - 1, j]
            if i < nx - 1:
                acc += v[k, i + 1, j]
            if j > 0:
                acc += v[k, i, j - 1]
            if j < ny - 1:
                acc += v[k, i, j + 1]
            qn[k, i, j] = qp[k, i, j] + 2.0 * da[i, j] * qc[k, i, j] + coef * acc


def build_sampler(grid: Grid2D, geometry: DetectorGeometry) -> scipy.sparse.csr_matrix:
    """Sparse (num_sensors, nx*ny) bilinear gather matrix."""
    geometry.validate_in(grid)
    pos = geometry.sensor_positions()
    n = pos.shape[0]
    gx = (pos[:, 0] - grid.origin[0]) / grid.spacing
    gy = (pos[:, 1] - grid.origin[1]) / grid.spacing
    i0 = np.clip(np.floor(gx).astype(int), 0, grid.nx - 2)
    j0 = np.clip(np.floor(gy).astype(int), 0, grid.ny - 2)
    fx = gx - i0
    fy = gy - j0
    rows = np.tile(np.arange(n), 4)
    cols = np.concatenate(
        [
            i0 * grid.ny + j0,
            (i0 + 1) * grid.ny + j0,
            i0 * grid.ny + (j0 + 1),
            (i0 + 1) * grid.ny + (j0 + 1),
        ]
    )
    weights = np.concatenate(
        [(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy]
    )
    mat = scipy.sparse.csr_matrix(
        (weights, (rows, cols)), shape=(n, grid.nx * grid.ny)
    )
    mat.sum_duplicates()
    return mat


class _Prepared:
    """Everything the stepping loops need, derived once per call."""

    def __init__(self, cfg: WaveConfig, geometry: DetectorGeometry):
        cfg.check_cfl()
        grid = cfg.grid
        self.grid = grid
        self.substeps = cfg.substeps()
        self.dt = cfg.internal_dt()
        self.coef = (self.dt / grid.spacing) ** 2
        self.csq = cfg.sound_speed.values ** 2
        self.gather = build_sampler(grid, geometry)
        self.scatter = self.gather.T.tocsr()
        self.num_samples = cfg.time_axis.num_samples

        gamma = self._damping_profile(cfg)
        gdt = np.minimum(gamma * self.dt, 0.9)
        self.da = 1.0 / (1.0 + gdt)
        self.db = (1.0 - gdt) / (1.0 + gdt)
        self.csq_da = self.csq * self.da

    @staticmethod
    def _damping_profile(cfg: WaveConfig) -> np.ndarray:
        grid = cfg.grid
        w = cfg.boundary_width
        gamma = np.zeros(grid.shape)
        if w == 0 or cfg.boundary_damping == 0.0:
            return gamma
        ix = np.arange(grid.nx)[:, None]
        jy = np.arange(grid.ny)[None, :]
        edge = np.minimum(
            np.minimum(ix, grid.nx - 1 - ix), np.minimum(jy, grid.ny - 1 - jy)
        ).astype(float)
        ramp = np.clip((w - edge) / w, 0.0, 1.0)
        # exponential taper: zero and flat at the inner sponge interface
        shape = (np.exp(4.0 * ramp ** 2) - 1.0) / (np.exp(4.0) - 1.0)
        c_max = float(np.max(cfg.sound_speed.values))
        return cfg.boundary_damping * (c_max / grid.spacing) * shape


def _sample(prep: _Prepared, fields: np.ndarray) -> np.ndarray:
    """(B, n) sensor values for a (B, nx, ny) field batch."""
    flat = fields.reshape(fields.shape[0], -1)
    return prep.gather.dot(flat.T).T


def _first_step(prep: _Prepared, p: np.ndarray) -> np.ndarray:
    """p^1 = p^0 + (dt^2/2) c^2 Lap(p^0): the even-in-time start."""
    out = np.empty_like(p)
    for k in range(p.shape[0]):
        out[k] = p[k] + 0.5 * prep.dt ** 2 * prep.csq * laplacian_array(
            p[k], prep.grid.spacing
        )
    return out


def forward_batch(fields: np.ndarray, cfg: WaveConfig, geometry: DetectorGeometry) -> np.ndarray:
    """Propagate a (B, nx, ny) batch of initial pressures; returns (B, n, T)."""
    prep = _Prepared(cfg, geometry)
    T, K = prep.num_samples, prep.substeps
    B = fields.shape[0]
    out = np.empty((B, prep.gather.shape[0], T))

    state = PressureField(prep.grid, batch=B)
    state.prev = np.array(fields, dtype=np.float64)
    out[:, :, 0] = _sample(prep, state.prev)
    state.curr = _first_step(prep, state.prev)
    state.time_index = 1
    m = 1
    for j in range(1, T):
        while m < j * K:
            _step_forward(state.curr, state.prev, state.next,
                          prep.csq, prep.da, prep.db, prep.coef)
            state.rotate()
            m += 1
        sampled = _sample(prep, state.curr)
        if not np.all(np.isfinite(sampled)):
            raise InstabilityError(
                f"non-finite sensor values at output sample {j}; "
                "the scheme blew up (check CFL and damping settings)"
            )
        out[:, :, j] = sampled
    state.check_finite()
    return out


def adjoint_batch(data: np.ndarray, cfg: WaveConfig, geometry: DetectorGeometry) -> np.ndarray:
    """Exact transpose of forward_batch: (B, n, T) -> (B, nx, ny)."""
    prep = _Prepared(cfg, geometry)
    T, K = prep.num_samples, prep.substeps
    B = data.shape[0]
    if data.shape[1] != prep.gather.shape[0] or data.shape[2] != T:
        raise ValueError(
            f"data shape {data.shape[1:]} does not match geometry/time axis "
            f"({prep.gather.shape[0]}, {T})"
        )

    def inject(j: int) -> np.ndarray:
        flat = prep.scatter.dot(data[:, :, j].T)  # (nx*ny, B)
        return flat.T.reshape(B, prep.grid.nx, prep.grid.ny)

    qc = np.zeros((B, prep.grid.nx, prep.grid.ny))
    qp = np.zeros_like(qc)
    qn = np.empty_like(qc)
    for j in range(T - 1, 0, -1):
        qc += inject(j)
        nsteps = K if j >= 2 else K - 1
        for _ in range(nsteps):
            v = prep.csq_da * qc
            _step_adjoint(qc, qp, qn, v, prep.da, prep.coef)
            qp = -prep.db * qc
            qc, qn = qn, qc
    # transpose of the even-in-time first step
    contrib = np.empty_like(qc)
    for k in range(B):
        contrib[k] = qc[k] + 0.5 * prep.dt ** 2 * laplacian_array(
            prep.csq * qc[k], prep.grid.spacing
        )
    result = qp + contrib + inject(0)
    if not np.all(np.isfinite(result)):
        raise InstabilityError("non-finite values in adjoint propagation")
    return result


def wave_forward(f: SourceImage, cfg: WaveConfig, geometry: DetectorGeometry,
                 check_support: bool = True) -> SensorData:
    """Pressure traces at the detectors for initial pressure f."""
    if f.grid != cfg.grid:
        raise ValueError("source image grid does not match wave config grid")
    if check_support:
        support_radius_check(f, geometry)
    traces = forward_batch(f.values[None, :, :], cfg, geometry)[0]
    return SensorData(traces, cfg.time_axis)


def wave_adjoint(data: SensorData, cfg: WaveConfig, geometry: DetectorGeometry) -> SourceImage:
    """Adjoint of wave_forward: time-reversed injection of sensor traces."""
    if data.time_axis.num_samples != cfg.time_axis.num_samples:
        raise ValueError("data time axis does not match wave config")
    img = adjoint_batch(data.values[None, :, :], cfg, geometry)[0]
    return SourceImage(cfg.grid, img)


def second_time_derivative(data: SensorData) -> SensorData:
    """Per-sensor second derivative in time: central differences inside,
    one-sided second-order stencils at the two endpoints."""
    y = data.values
    T = y.shape[1]
    dt = data.time_axis.dt
    out = np.empty_like(y)
    out[:, 1:-1] = (y[:, 2:] - 2.0 * y[:, 1:-1] + y[:, :-2]) / (dt * dt)
    if T >= 4:
        out[:, 0] = (2.0 * y[:, 0] - 5.0 * y[:, 1] + 4.0 * y[:, 2] - y[:, 3]) / (dt * dt)
        out[:, -1] = (2.0 * y[:, -1] - 5.0 * y[:, -2] + 4.0 * y[:, -3] - y[:, -4]) / (dt * dt)
    else:
        out[:, 0] = out[:, 1]
        out[:, -1] = out[:, 1]
    return SensorData(out, data.time_axis)


def poisson_solve(g: SourceImage, tol: float = 1e-10) -> SourceImage:
    """Solve Lap(f) = g with zero Dirichlet boundary (the same 5-point
    stencil as discrete_laplacian) by sine-transform diagonalization."""
    grid = g.grid
    h2 = grid.spacing * grid.spacing
    kx = np.arange(1, grid.nx + 1)
    ky = np.arange(1, grid.ny + 1)
    lam = (
        (2.0 * np.cos(np.pi * kx / (grid.nx + 1)) - 2.0)[:, None]
        + (2.0 * np.cos(np.pi * ky / (grid.ny + 1)) - 2.0)[None, :]
    ) / h2
    ghat = scipy.fft.dstn(g.values, type=1, norm="ortho")
    f = scipy.fft.idstn(ghat / lam, type=1, norm="ortho")
    residual = np.linalg.norm(laplacian_array(f, grid.spacing) - g.values)
    scale = np.linalg.norm(g.values)
    if scale > 0 and residual / scale > max(tol, 1e3 * np.finfo(float).eps * grid.nx):
        raise NonConvergenceError(
            f"Poisson solve residual {residual / scale:.3g} exceeds tolerance"
        )
    return SourceImage(grid, f)


def commutation_discrepancy(f: SourceImage, cfg: WaveConfig, geometry: DetectorGeometry,
                            check_support: bool = True) -> float:
    """Relative mismatch between the second time derivative of the traces of
    f and the traces of c^2 * Lap(f).  Near zero when the time axis resolves
    the field; decays at second order under refinement."""
    d1 = second_time_derivative(wave_forward(f, cfg, geometry, check_support=check_support))
    csq = cfg.sound_speed.values ** 2
    g = SourceImage(f.grid, csq * laplacian_array(f.values, f.grid.spacing))
    d2 = wave_forward(g, cfg, geometry, check_support=check_support)
    den = d2.norm()
    num = float(np.linalg.norm(d1.values - d2.values))
    if den == 0.0:
        return num
    return num / den
