"""
Conservative finite-volume solver for the regularized dynamics on [-L, L]^2.

Fluxes live on cell faces: an upwinded advective flux with the face velocity
U = K_eps * f and a central diffusive flux. Boundary faces carry no flux, so
mass is conserved up to rounding. The module also evaluates the residuals of
the two weak-form identities along a stored trajectory.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from .diagnostics import DiagnosticSettings
from .errors import BoundViolationError, CFLViolationError, ConfigError, NegativeDensityError
from .initial_data import InitialMeasure, project_to_grid
from .kernels import bound_checks_enabled, kernel_norm_bound, require_epsilon
from .measures import BaseMeasure, GridDensity, PairKernel, lattice_convolver
from .solvers import BaseSolver, Snapshot, SolverRun
from .utils import cumulative_trapezoid

# Configure logger
logger = logging.getLogger(__name__)

CONVOLUTION_METHODS = {'direct_sum': 'direct', 'fft_padded': 'fft'}
ADVECTION_SCHEMES = ('upwind', 'muscl')
NEGATIVITY_TOLERANCE = 1e-13
LEAK_FRACTION = 1e-6
UNDER_RESOLVED_FRACTION = 0.05


@dataclass(frozen=True)
class GridConfig:
    """
    Parameters of a grid run.

    Attributes:
        half_width (float): L, the box is [-L, L]^2
        cells (int): n cells per side
        epsilon (float): Regularization in (0, 1]
        T (float): Final time
        dt (float): Fixed step, 0 for the automatic CFL step
        cfl_safety (float): Fraction of the CFL bound used by the automatic step
        drift_enabled (bool): Test hook; without drift the scheme solves the heat equation
        convolution (str): 'direct_sum' or 'fft_padded'
        advection (str): 'upwind' or 'muscl'
        sample_every (int): Steps between diagnostic rows
        snapshot_every (int): Steps between stored snapshots, 0 for none
    """

    half_width: float
    cells: int
    epsilon: float
    T: float
    dt: float = 0.0
    cfl_safety: float = 0.4
    drift_enabled: bool = True
    convolution: str = 'fft_padded'
    advection: str = 'upwind'
    sample_every: int = 1
    snapshot_every: int = 0

    @property
    def cell_size(self) -> float:
        return 2.0 * self.half_width / self.cells

    def validate(self) -> None:
        """
        Raises:
            ConfigError: On the first invalid field
        """
        if not (math.isfinite(self.half_width) and self.half_width > 0.0):
            raise ConfigError('grid.L', f"must be positive, got {self.half_width}")
        if self.cells < 4:
            raise ConfigError('grid.n', f"must be at least 4, got {self.cells}")
        if not (0.0 < self.epsilon <= 1.0):
            raise ConfigError('epsilon', f"must lie in (0, 1], got {self.epsilon}")
        if not (math.isfinite(self.T) and self.T >= 0.0):
            raise ConfigError('T', f"must be a nonnegative number, got {self.T}")
        if not (math.isfinite(self.dt) and self.dt >= 0.0):
            raise ConfigError('grid.dt', f"must be nonnegative, got {self.dt}")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ConfigError('grid.cfl_safety', f"must lie in (0, 1], got {self.cfl_safety}")
        if self.convolution not in CONVOLUTION_METHODS:
            raise ConfigError(
                'grid.convolution', f"must be one of {', '.join(CONVOLUTION_METHODS)}, got {self.convolution}"
            )
        if self.advection not in ADVECTION_SCHEMES:
            raise ConfigError(
                'grid.advection', f"must be one of {', '.join(ADVECTION_SCHEMES)}, got {self.advection}"
            )
        if self.sample_every < 1:
            raise ConfigError('grid.sample_every', f"must be at least 1, got {self.sample_every}")
        if self.snapshot_every < 0:
            raise ConfigError('grid.snapshot_every', f"must be nonnegative, got {self.snapshot_every}")


@dataclass(frozen=True)
class FaceVelocity:
    """
    Normal velocity on cell faces.

    ``ux[f, j]`` sits on the x-face at ``x = -L + f h`` of row ``j`` (shape
    ``(n + 1, n)``); ``uy[i, f]`` likewise on y-faces (shape ``(n, n + 1)``).
    """

    ux: np.ndarray
    uy: np.ndarray

    @classmethod
    def zero(cls, cells: int) -> 'FaceVelocity':
        return cls(np.zeros((cells + 1, cells)), np.zeros((cells, cells + 1)))

    @property
    def max_speed(self) -> float:
        return float(max(np.abs(self.ux).max(), np.abs(self.uy).max()))


def velocity_field(g: GridDensity, epsilon: float, method: str = 'fft_padded') -> FaceVelocity:
    """
    Face velocity U = h^2 sum_cells K_eps(face - cell center) * value.

    Args:
        g (GridDensity): Current density
        epsilon (float): Regularization in (0, 1]
        method (str): 'direct_sum' or 'fft_padded'; both agree to 1e-10 relative

    Returns:
        FaceVelocity: Normal components on every face
    """
    epsilon = require_epsilon(epsilon)
    if method not in CONVOLUTION_METHODS:
        raise ConfigError('grid.convolution', f"unknown convolution method: {method}")
    n, h = g.cells, g.cell_size
    weights = g.cell_weights
    x_faces = lattice_convolver(
        n, h, PairKernel('kernel_eps_x', (epsilon,)),
        shift=(-0.5, 0.0), extra=(1, 0), method=CONVOLUTION_METHODS[method],
    )
    y_faces = lattice_convolver(
        n, h, PairKernel('kernel_eps_y', (epsilon,)),
        shift=(0.0, -0.5), extra=(0, 1), method=CONVOLUTION_METHODS[method],
    )
    velocity = FaceVelocity(x_faces.apply(weights), y_faces.apply(weights))
    if bound_checks_enabled():
        bound = g.mass * kernel_norm_bound(epsilon)
        if velocity.max_speed > bound * (1.0 + 1e-10):
            raise BoundViolationError(f"face speed {velocity.max_speed:.17g} exceeds {bound:.17g}")
    return velocity


def cfl_limit(h: float, max_speed: float) -> float:
    """min(h^2 / 4, h / (2 max speed))."""
    limit = 0.25 * h * h
    if max_speed > 0.0:
        limit = min(limit, h / (2.0 * max_speed))
    return limit


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _face_states(values: np.ndarray, axis: int, advection: str):
    """Left and right reconstructions at the interior faces along ``axis``."""
    f = np.moveaxis(values, axis, 0)
    if advection == 'upwind':
        left, right = f[:-1], f[1:]
    else:
        jumps = np.diff(f, axis=0)
        slopes = np.zeros_like(f)
        slopes[1:-1] = _minmod(jumps[:-1], jumps[1:])
        left = f[:-1] + 0.5 * slopes[:-1]
        right = f[1:] - 0.5 * slopes[1:]
    return np.moveaxis(left, 0, axis), np.moveaxis(right, 0, axis)


def fv_step(
    g: GridDensity,
    U: FaceVelocity,
    dt: float,
    advection: str = 'upwind',
    t: Optional[float] = None,
) -> GridDensity:
    """
    Advance the density by one explicit finite-volume step.

    Flux F = U f_upwind - grad f on interior faces, zero on the boundary.

    Raises:
        CFLViolationError: If dt exceeds the CFL bound for the face speeds
        NegativeDensityError: If a value drops below -1e-13
    """
    h = g.cell_size
    speed = U.max_speed
    limit = cfl_limit(h, speed)
    if dt > limit * (1.0 + 1e-12):
        raise CFLViolationError(dt, limit, speed)
    f = g.values
    n = g.cells

    flux_x = np.zeros((n + 1, n))
    left, right = _face_states(f, 0, advection)
    u = U.ux[1:-1, :]
    flux_x[1:-1, :] = np.where(u > 0.0, u * left, u * right) - (f[1:, :] - f[:-1, :]) / h

    flux_y = np.zeros((n, n + 1))
    left, right = _face_states(f, 1, advection)
    u = U.uy[:, 1:-1]
    flux_y[:, 1:-1] = np.where(u > 0.0, u * left, u * right) - (f[:, 1:] - f[:, :-1]) / h

    divergence = (flux_x[1:, :] - flux_x[:-1, :] + flux_y[:, 1:] - flux_y[:, :-1]) / h
    updated = f - dt * divergence
    lowest = float(updated.min())
    if lowest < -NEGATIVITY_TOLERANCE:
        raise NegativeDensityError(lowest, t)
    return g.with_values(np.maximum(updated, 0.0))


class GridSolver(BaseSolver):
    """
    Finite-volume solver driven by a GridConfig.

    Args:
        cfg (GridConfig): Run parameters
        f0 (InitialMeasure): Initial measure, projected after mollification
        settings (Optional[DiagnosticSettings]): Sampled functional parameters
        progress (bool): Show a progress bar
        keep_history (bool): Store the state after every step (for residuals)
    """

    solver_name = 'grid'

    def __init__(
        self,
        cfg: GridConfig,
        f0: InitialMeasure,
        settings: Optional[DiagnosticSettings] = None,
        progress: bool = False,
        keep_history: bool = False,
    ):
        cfg.validate()
        super().__init__(f0, cfg.epsilon, cfg.T, settings, cfg.sample_every, cfg.snapshot_every, progress)
        self.cfg = cfg
        self.grid = project_to_grid(f0, cfg.epsilon, cfg.half_width, cfg.cells)
        self.t = 0.0
        self.keep_history = keep_history
        self._velocity: Optional[FaceVelocity] = None
        self._lands_on_final = False
        self.flags.update(box_truncated=False, under_resolved=False, resolution=[])
        if keep_history:
            self.history.append(Snapshot(0.0, self.grid))
        logger.info(
            f"Grid run: n={cfg.cells}, L={cfg.half_width}, h={cfg.cell_size:.6g}, eps={cfg.epsilon}, "
            f"advection={cfg.advection}, convolution={cfg.convolution}"
        )

    @property
    def measure(self) -> BaseMeasure:
        return self.grid

    @property
    def time(self) -> float:
        return self.t

    def finished(self) -> bool:
        return self.t >= self.T

    def velocity(self) -> FaceVelocity:
        if self._velocity is None:
            if self.cfg.drift_enabled:
                self._velocity = velocity_field(self.grid, self.epsilon, self.cfg.convolution)
            else:
                self._velocity = FaceVelocity.zero(self.cfg.cells)
        return self._velocity

    def next_dt(self) -> float:
        if self.cfg.dt > 0.0:
            dt = self.cfg.dt
        else:
            dt = self.cfg.cfl_safety * cfl_limit(self.cfg.cell_size, self.velocity().max_speed)
            logger.debug(f"auto dt={dt:.6g} at t={self.t:.6g}")
        remaining = self.T - self.t
        self._lands_on_final = dt >= remaining
        return remaining if self._lands_on_final else dt

    def advance(self, dt: float) -> None:
        self.grid = fv_step(self.grid, self.velocity(), dt, self.cfg.advection, self.t)
        self._velocity = None
        self.t = self.T if self._lands_on_final else self.t + dt
        if self.keep_history:
            self.history.append(Snapshot(self.t, self.grid))

    def on_sample(self, row: Dict[str, float]) -> None:
        mass = self.f0.mass
        if not self.flags['box_truncated'] and self.grid.outer_ring_mass() > LEAK_FRACTION * mass:
            self.flags['box_truncated'] = True
            logger.warning(f"Mass is reaching the box boundary at t={self.t:.6g}; run flagged as box-truncated")
        values = self.grid.values
        peak = float(values.max())
        max_cell_mass = peak * self.cfg.cell_size ** 2
        jumps = max(float(np.abs(np.diff(values, axis=0)).max()), float(np.abs(np.diff(values, axis=1)).max()))
        self.flags['resolution'].append({
            't': self.t,
            'max_cell_mass': max_cell_mass,
            'max_relative_jump': jumps / peak if peak > 0.0 else 0.0,
        })
        if not self.flags['under_resolved'] and max_cell_mass > UNDER_RESOLVED_FRACTION * mass:
            self.flags['under_resolved'] = True
            logger.warning(
                f"Under-resolved at t={self.t:.6g}: one cell holds {max_cell_mass / mass:.1%} of the mass"
            )

    def metadata(self) -> Dict[str, Any]:
        metadata = super().metadata()
        metadata.update(
            half_width=self.cfg.half_width,
            cells=self.cfg.cells,
            cell_size=self.cfg.cell_size,
            advection=self.cfg.advection,
            convolution=self.cfg.convolution,
        )
        return metadata


def run_grid(
    cfg: GridConfig,
    f0: InitialMeasure,
    settings: Optional[DiagnosticSettings] = None,
    progress: bool = False,
    keep_history: bool = False,
) -> SolverRun:
    """
    Project f0 mollified at eps on the grid, step to T and record the series.

    Raises:
        ConfigError: Before any stepping when cfg is invalid
        MassCaptureError: If the box misses too much of the initial mass
        SolverError: On CFL violation or negativity
    """
    return GridSolver(cfg, f0, settings, progress, keep_history).run()


# Weak-form residuals -------------------------------------------------------

@dataclass(frozen=True)
class GaussianTestFunction:
    """phi(x) = exp(-|x|^2 / (2 s))."""

    scale: float = 1.0

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.exp(-np.einsum('ij,ij->i', x, x) / (2.0 * self.scale))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return -x / self.scale * self.value(x)[:, None]

    def laplacian(self, x: np.ndarray) -> np.ndarray:
        r2 = np.einsum('ij,ij->i', x, x)
        return (r2 / self.scale - 2.0) / self.scale * self.value(x)


def _residual(history: Sequence[Snapshot], evaluate) -> np.ndarray:
    times = np.array([snapshot.t for snapshot in history])
    pairs = [evaluate(snapshot.measure) for snapshot in history]
    observed = np.array([p[0] for p in pairs])
    rates = np.array([p[1] for p in pairs])
    return observed - observed[0] - cumulative_trapezoid(rates, times)


def weak_form_residual(
    history: Sequence[Snapshot], epsilon: float, test: GaussianTestFunction = GaussianTestFunction()
) -> np.ndarray:
    """
    Residual of d/dt <phi, f> = <Delta phi, f> + <grad phi . (K_eps * f), f> along a trajectory.

    Returns:
        np.ndarray: Residual at every stored time (0 at the first)
    """
    epsilon = require_epsilon(epsilon)
    kernel = PairKernel('kernel_eps', (epsilon,))

    def evaluate(g: GridDensity):
        positions, weights = g.atoms()
        drift = g.atom_convolution(kernel)
        rate = weights @ test.laplacian(positions)
        rate += float(np.sum(weights * np.einsum('ij,ij->i', test.gradient(positions), drift)))
        return float(weights @ test.value(positions)), float(rate)

    return _residual(history, evaluate)


def pair_identity_residual(history: Sequence[Snapshot], epsilon: float, support: float = 4.0) -> np.ndarray:
    """
    Residual of the pair identity for phi(|x - y|^2) with phi(r) = (1 - r/R)^3 on r < R.

    The rate is 8 <phi'(r^2) + r^2 phi''(r^2), f (x) f> + 4 sum_x w_x U(x) . V(x)
    with U = K_eps * f and V(x) = sum_y w_y (x - y) phi'(|x - y|^2).
    """
    epsilon = require_epsilon(epsilon)
    value_kernel = PairKernel('compact_cubic', (support,))
    laplacian_kernel = PairKernel('compact_cubic_radial_laplacian', (support,))
    gradient_kernel = PairKernel('compact_cubic_gradient_vector', (support,))
    drift_kernel = PairKernel('kernel_eps', (epsilon,))

    def evaluate(g: GridDensity):
        _, weights = g.atoms()
        value, diffusion = g.pair_sums([value_kernel, laplacian_kernel], include_diagonal=True)
        drift = g.atom_convolution(drift_kernel)
        spread = g.atom_convolution(gradient_kernel)
        transport = 4.0 * float(np.sum(weights * np.einsum('ij,ij->i', drift, spread)))
        return value.value, 8.0 * diffusion.value + transport

    return _residual(history, evaluate)
