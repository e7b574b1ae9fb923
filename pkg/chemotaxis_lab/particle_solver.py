"""
Stochastic particle approximation of the regularized dynamics.

Each particle moves by the regularized attraction of all the others plus a
Brownian increment of variance 2 dt per coordinate (Euler-Maruyama).
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional

import numpy as np
from scipy.spatial import cKDTree

from . import streams
from .diagnostics import DiagnosticSettings
from .errors import BoundViolationError, ConfigError, DomainError
from .initial_data import InitialMeasure, sample_mollified
from .kernels import bound_checks_enabled, eval_K_eps, kernel_norm_bound, require_epsilon
from .measures import BaseMeasure, PairKernel, WeightedEnsemble
from .solvers import BaseSolver, SolverRun

# Configure logger
logger = logging.getLogger(__name__)

FORCE_METHODS = ('direct', 'cell_list')
DT_CAP = 0.1


def dt_max(epsilon: float, mass: float) -> float:
    """Largest recommended step: min(0.1, 4 pi sqrt(eps) / (10 M))."""
    return min(DT_CAP, 4.0 * math.pi * math.sqrt(epsilon) / (10.0 * mass))


def truncation_bound(mass: float, cutoff: float) -> float:
    """Per-particle force error of the cell list: M / (2 pi r_c)."""
    return mass / (2.0 * math.pi * cutoff)


@dataclass(frozen=True)
class ParticleConfig:
    """
    Parameters of a particle run.

    Attributes:
        n_particles (int): Number of particles N
        epsilon (float): Regularization in (0, 1]
        dt (float): Requested step; the run uses T / ceil(T / dt)
        T (float): Final time
        seed (int): Seed of the counter streams
        sample_every (int): Steps between diagnostic rows
        force_method (str): 'direct' or 'cell_list'
        cutoff (Optional[float]): Cell-list interaction radius
        allow_large_dt (bool): Accept dt above dt_max
        workers (int): Threads for the direct drift
        snapshot_every (int): Steps between stored snapshots, 0 for none
    """

    n_particles: int
    epsilon: float
    dt: float
    T: float
    seed: int = 0
    sample_every: int = 1
    force_method: str = 'direct'
    cutoff: Optional[float] = None
    allow_large_dt: bool = False
    workers: int = 1
    snapshot_every: int = 0

    def validate(self, mass: float) -> None:
        """
        Raises:
            ConfigError: On the first invalid field
        """
        if self.n_particles < 1:
            raise ConfigError('particles.N', f"must be at least 1, got {self.n_particles}")
        if not (0.0 < self.epsilon <= 1.0):
            raise ConfigError('epsilon', f"must lie in (0, 1], got {self.epsilon}")
        if not (math.isfinite(self.T) and self.T >= 0.0):
            raise ConfigError('T', f"must be a nonnegative number, got {self.T}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ConfigError('particles.dt', f"must be positive, got {self.dt}")
        if self.seed < 0:
            raise ConfigError('seed', f"must be nonnegative, got {self.seed}")
        if self.sample_every < 1:
            raise ConfigError('particles.sample_every', f"must be at least 1, got {self.sample_every}")
        if self.snapshot_every < 0:
            raise ConfigError('particles.snapshot_every', f"must be nonnegative, got {self.snapshot_every}")
        if self.workers < 1:
            raise ConfigError('particles.workers', f"must be at least 1, got {self.workers}")
        if self.force_method not in FORCE_METHODS:
            raise ConfigError(
                'particles.force_method', f"must be one of {', '.join(FORCE_METHODS)}, got {self.force_method}"
            )
        if self.force_method == 'cell_list' and not (self.cutoff is not None and self.cutoff > 0.0):
            raise ConfigError('particles.cutoff', "a positive cutoff is required for cell_list")
        limit = dt_max(self.epsilon, mass)
        if self.dt > limit:
            if not self.allow_large_dt:
                raise ConfigError(
                    'particles.dt', f"{self.dt} exceeds dt_max={limit:.6g}; set allow_large_dt to override"
                )
            logger.warning(f"dt={self.dt} exceeds the recommended cap {limit:.6g}")

    @property
    def n_steps(self) -> int:
        if self.T == 0.0:
            return 0
        return max(1, math.ceil(self.T / self.dt - 1e-9))


@dataclass(frozen=True)
class ParticleState:
    """
    Ensemble at time t with its random-stream cursor.

    The noise of step ``step`` for particle ``i`` is block ``i`` of the
    ``(seed, 'noise', step)`` stream.
    """

    ensemble: WeightedEnsemble
    t: float
    epsilon: float
    seed: int
    step: int = 0


def drift_field(
    e: WeightedEnsemble,
    epsilon: float,
    method: str = 'direct',
    cutoff: Optional[float] = None,
    workers: int = 1,
) -> np.ndarray:
    """
    Drift b_i = w * sum_{j != i} K_eps(X_i - X_j) for every particle.

    Args:
        e (WeightedEnsemble): Particles
        epsilon (float): Regularization in (0, 1]
        method (str): 'direct' (all pairs) or 'cell_list' (pairs within ``cutoff``)
        cutoff (Optional[float]): Interaction radius of the cell list
        workers (int): Threads for the direct sum; row blocks are fixed, so the
            result does not depend on this number

    Returns:
        np.ndarray: Drift vectors of shape (N, 2)
    """
    epsilon = require_epsilon(epsilon)
    if method == 'direct':
        drift = e.atom_convolution(PairKernel('kernel_eps', (epsilon,)), workers=workers)
    elif method == 'cell_list':
        if cutoff is None or cutoff <= 0.0:
            raise DomainError("cell_list needs a positive cutoff")
        drift = _cell_list_drift(e, epsilon, cutoff)
    else:
        raise DomainError(f"unknown force method: {method}")

    if bound_checks_enabled():
        _assert_drift_bounds(drift, e, epsilon, method)
    return drift


def _cell_list_drift(e: WeightedEnsemble, epsilon: float, cutoff: float) -> np.ndarray:
    pairs = cKDTree(e.positions).query_pairs(cutoff, output_type='ndarray')
    logger.debug(f"Cell list: {len(pairs)} pairs within r_c={cutoff}")
    drift = np.zeros_like(e.positions)
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        force = e.weight * eval_K_eps(e.positions[i] - e.positions[j], epsilon)
        np.add.at(drift, i, force)
        np.add.at(drift, j, -force)
    return drift


def _assert_drift_bounds(drift: np.ndarray, e: WeightedEnsemble, epsilon: float, method: str) -> None:
    norms = np.hypot(drift[:, 0], drift[:, 1])
    bound = e.mass * kernel_norm_bound(epsilon)
    if norms.max() > bound * (1.0 + 1e-12):
        raise BoundViolationError(f"drift norm {norms.max():.17g} exceeds M/(4 pi sqrt(eps)) = {bound:.17g}")
    if method == 'direct':
        total = float(np.hypot(*drift.sum(axis=0)))
        if total > 1e-12 * e.size * max(norms.max(), np.finfo(float).tiny):
            raise BoundViolationError(f"drift does not sum to zero: |sum b| = {total:.3e}")


def em_step(
    state: ParticleState,
    dt: float,
    force_method: str = 'direct',
    cutoff: Optional[float] = None,
    workers: int = 1,
    drift_enabled: bool = True,
    noise_enabled: bool = True,
) -> ParticleState:
    """
    One Euler-Maruyama step: X <- X + b dt + sqrt(2 dt) xi.

    ``drift_enabled`` and ``noise_enabled`` switch the two parts off for tests.
    """
    if not dt > 0.0:
        raise DomainError(f"dt must be positive, got {dt}")
    e = state.ensemble
    positions = np.array(e.positions)
    if drift_enabled:
        positions += dt * drift_field(e, state.epsilon, force_method, cutoff, workers)
    if noise_enabled:
        xi = streams.normals(state.seed, 'noise', state.step, 0, e.size)
        positions += math.sqrt(2.0 * dt) * xi
    return replace(state, ensemble=e.moved_to(positions), t=state.t + dt, step=state.step + 1)


class ParticleSolver(BaseSolver):
    """
    Particle solver driven by a ParticleConfig.

    Args:
        cfg (ParticleConfig): Run parameters
        f0 (InitialMeasure): Initial measure, sampled after mollification
        settings (Optional[DiagnosticSettings]): Sampled functional parameters
        progress (bool): Show a progress bar
        drift_enabled (bool): Test hook
        noise_enabled (bool): Test hook
    """

    solver_name = 'particles'

    def __init__(
        self,
        cfg: ParticleConfig,
        f0: InitialMeasure,
        settings: Optional[DiagnosticSettings] = None,
        progress: bool = False,
        drift_enabled: bool = True,
        noise_enabled: bool = True,
    ):
        cfg.validate(f0.mass)
        super().__init__(
            f0, cfg.epsilon, cfg.T, settings, cfg.sample_every, cfg.snapshot_every, progress
        )
        self.cfg = cfg
        self.drift_enabled = drift_enabled
        self.noise_enabled = noise_enabled
        self.n_steps = cfg.n_steps
        self.step_size = cfg.T / self.n_steps if self.n_steps else 0.0
        ensemble = sample_mollified(f0, cfg.epsilon, cfg.n_particles, cfg.seed)
        self.state = ParticleState(ensemble, 0.0, cfg.epsilon, cfg.seed)
        logger.info(
            f"Particle run: N={cfg.n_particles}, eps={cfg.epsilon}, dt={self.step_size:.6g}, "
            f"{self.n_steps} steps, force={cfg.force_method}"
        )

    @property
    def measure(self) -> BaseMeasure:
        return self.state.ensemble

    @property
    def time(self) -> float:
        return self.state.t

    def finished(self) -> bool:
        return self.state.step >= self.n_steps

    def next_dt(self) -> float:
        return self.step_size

    def advance(self, dt: float) -> None:
        state = em_step(
            self.state, dt, self.cfg.force_method, self.cfg.cutoff, self.cfg.workers,
            self.drift_enabled, self.noise_enabled,
        )
        t = self.T if state.step == self.n_steps else state.step * self.step_size
        self.state = replace(state, t=t)

    def metadata(self) -> Dict[str, Any]:
        metadata = super().metadata()
        metadata.update(
            seed=self.cfg.seed,
            n_particles=self.cfg.n_particles,
            dt=self.step_size,
            force_method=self.cfg.force_method,
        )
        return metadata


def run_particles(
    cfg: ParticleConfig,
    f0: InitialMeasure,
    settings: Optional[DiagnosticSettings] = None,
    progress: bool = False,
) -> SolverRun:
    """
    Sample f0 mollified at eps, step to T and record the diagnostic series.

    Deterministic for a given (cfg, f0, settings).

    Raises:
        ConfigError: Before any stepping when cfg is invalid
    """
    return ParticleSolver(cfg, f0, settings, progress).run()
