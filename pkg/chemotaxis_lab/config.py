"""
Run configuration: JSON documents parsed into validated dataclasses.

The schema is documented in docs/config.md. Validation raises ConfigError
naming the offending field; theorem hypotheses required by the requested
checks raise HypothesisViolationError before any computation starts.
"""
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Mapping, Optional, Tuple

from .diagnostics import CHECKS, COMPACITE_CONSTANT, DiagnosticSettings
from .errors import ConfigError, DomainError, HypothesisViolationError
from .grid_solver import GridConfig
from .initial_data import CRITICAL_MASS, InitialMeasure
from .particle_solver import ParticleConfig

# Configure logger
logger = logging.getLogger(__name__)

SOLVERS = ('particles', 'grid')
SWEEP_AXES = ('epsilon', 'N', 'n', 'M')
DEFAULT_CHECKS = ('mass', 'center_of_mass', 'compacite_moment', 'concentration')

_MISSING = object()


@dataclass(frozen=True)
class DiagnosticsConfig:
    gamma: float = 1.5
    nu: float = 0.1
    checks: Tuple[str, ...] = DEFAULT_CHECKS
    tolerances: Mapping[str, float] = field(default_factory=dict)
    concentration_floor: Optional[float] = None
    compacite_constant: float = COMPACITE_CONSTANT

    @property
    def settings(self) -> DiagnosticSettings:
        return DiagnosticSettings(self.gamma, self.nu)


@dataclass(frozen=True)
class RunConfig:
    """
    A complete run description.

    Exactly one of ``particles`` and ``grid`` is set, matching ``solver``.
    """

    solver: str
    initial: InitialMeasure
    epsilon: float
    T: float
    seed: int
    output_dir: str
    diagnostics: DiagnosticsConfig
    particles: Optional[ParticleConfig] = None
    grid: Optional[GridConfig] = None

    @property
    def mass(self) -> float:
        return self.initial.mass

    def to_dict(self) -> Dict[str, Any]:
        """Config echo in the input schema."""
        data: Dict[str, Any] = {
            'solver': self.solver,
            'initial': self.initial.to_dict(),
            'epsilon': self.epsilon,
            'T': self.T,
            'seed': self.seed,
            'output_dir': self.output_dir,
            'diagnostics': {
                'gamma': self.diagnostics.gamma,
                'nu': self.diagnostics.nu,
                'checks': list(self.diagnostics.checks),
                'tolerances': dict(self.diagnostics.tolerances),
                'concentration_floor': self.diagnostics.concentration_floor,
                'compacite_constant': self.diagnostics.compacite_constant,
            },
        }
        if self.particles is not None:
            p = self.particles
            data['particles'] = {
                'N': p.n_particles, 'dt': p.dt, 'sample_every': p.sample_every,
                'force_method': p.force_method, 'cutoff': p.cutoff,
                'allow_large_dt': p.allow_large_dt, 'workers': p.workers,
                'snapshot_every': p.snapshot_every,
            }
        if self.grid is not None:
            g = self.grid
            data['grid'] = {
                'L': g.half_width, 'n': g.cells, 'dt': g.dt, 'cfl_safety': g.cfl_safety,
                'drift_enabled': g.drift_enabled, 'convolution': g.convolution,
                'advection': g.advection, 'sample_every': g.sample_every,
                'snapshot_every': g.snapshot_every,
            }
        return data

    def with_axis_value(self, axis: str, value: float) -> 'RunConfig':
        """
        Copy with one sweep axis replaced, revalidated.

        Raises:
            ConfigError: If the axis does not apply to this solver or the result is invalid
        """
        if axis == 'epsilon':
            config = replace(self, epsilon=float(value))
            if self.particles is not None:
                config = replace(config, particles=replace(self.particles, epsilon=float(value)))
            if self.grid is not None:
                config = replace(config, grid=replace(self.grid, epsilon=float(value)))
        elif axis == 'N':
            if self.particles is None:
                raise ConfigError('sweep.axis', "axis N needs a particle run")
            config = replace(self, particles=replace(self.particles, n_particles=_as_int('N', value)))
        elif axis == 'n':
            if self.grid is None:
                raise ConfigError('sweep.axis', "axis n needs a grid run")
            config = replace(self, grid=replace(self.grid, cells=_as_int('n', value)))
        elif axis == 'M':
            try:
                initial = self.initial.with_mass(float(value))
            except DomainError as e:
                raise ConfigError('sweep.values', str(e))
            config = replace(self, initial=initial)
        else:
            raise ConfigError('sweep.axis', f"must be one of {', '.join(SWEEP_AXES)}, got {axis}")
        validate(config)
        return config


def _as_int(name: str, value: float) -> int:
    if float(value) != int(value):
        raise ConfigError(f"sweep.{name}", f"must be an integer, got {value}")
    return int(value)


def _get(data: Mapping[str, Any], key: str, path: str, kind, default=_MISSING):
    if key not in data or data[key] is None:
        if default is _MISSING:
            raise ConfigError(path, "is required")
        return default
    value = data[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(path, f"must be a finite number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"must be an integer, got {value!r}")
        return value
    if not isinstance(value, kind):
        raise ConfigError(path, f"must be of type {kind.__name__}, got {value!r}")
    return value


def _parse_initial(data: Any) -> InitialMeasure:
    if not isinstance(data, Mapping):
        raise ConfigError('initial', "must be an object with atoms and/or gaussians")
    atoms = _get(data, 'atoms', 'initial.atoms', list, [])
    gaussians = _get(data, 'gaussians', 'initial.gaussians', list, [])
    for index, atom in enumerate(atoms):
        for key in ('x', 'y', 'mass'):
            _get(atom, key, f'initial.atoms[{index}].{key}', float)
    for index, gaussian in enumerate(gaussians):
        for key in ('x', 'y', 'variance', 'mass'):
            _get(gaussian, key, f'initial.gaussians[{index}].{key}', float)
    try:
        return InitialMeasure.from_dict({'atoms': atoms, 'gaussians': gaussians})
    except DomainError as e:
        raise ConfigError('initial', str(e))


def _parse_diagnostics(data: Mapping[str, Any]) -> DiagnosticsConfig:
    checks = _get(data, 'checks', 'diagnostics.checks', list, list(DEFAULT_CHECKS))
    for name in checks:
        if name not in CHECKS:
            raise ConfigError('diagnostics.checks', f"unknown check {name!r}; available: {', '.join(CHECKS)}")
    tolerances = _get(data, 'tolerances', 'diagnostics.tolerances', dict, {})
    for name, value in tolerances.items():
        if name not in CHECKS:
            raise ConfigError('diagnostics.tolerances', f"unknown check {name!r}")
        _get(tolerances, name, f'diagnostics.tolerances.{name}', float)
    return DiagnosticsConfig(
        gamma=_get(data, 'gamma', 'diagnostics.gamma', float, 1.5),
        nu=_get(data, 'nu', 'diagnostics.nu', float, 0.1),
        checks=tuple(checks),
        tolerances={k: float(v) for k, v in tolerances.items()},
        concentration_floor=_get(data, 'concentration_floor', 'diagnostics.concentration_floor', float, None),
        compacite_constant=_get(
            data, 'compacite_constant', 'diagnostics.compacite_constant', float, COMPACITE_CONSTANT
        ),
    )


def parse_config(data: Mapping[str, Any], base_dir: str = '.') -> RunConfig:
    """
    Build and validate a RunConfig from a decoded JSON document.

    Args:
        data (Mapping[str, Any]): Decoded document
        base_dir (str): Directory relative output paths are resolved against

    Raises:
        ConfigError: On the first invalid field
        HypothesisViolationError: If a requested check's hypothesis fails
    """
    if not isinstance(data, Mapping):
        raise ConfigError('', "the config must be a JSON object")
    solver = _get(data, 'solver', 'solver', str)
    if solver not in SOLVERS:
        raise ConfigError('solver', f"must be one of {', '.join(SOLVERS)}, got {solver!r}")
    present = [name for name in SOLVERS if name in data]
    if present != [solver]:
        raise ConfigError(solver, f"exactly one solver block matching 'solver' is required, found {present}")

    initial = _parse_initial(data.get('initial'))
    epsilon = _get(data, 'epsilon', 'epsilon', float)
    T = _get(data, 'T', 'T', float)
    seed = _get(data, 'seed', 'seed', int, 0)
    output_dir = _get(data, 'output_dir', 'output_dir', str, 'output')
    if not os.path.isabs(output_dir):
        output_dir = os.path.normpath(os.path.join(base_dir, output_dir))
    diagnostics = _parse_diagnostics(_get(data, 'diagnostics', 'diagnostics', dict, {}))

    block = _get(data, solver, solver, dict)
    particles = grid = None
    if solver == 'particles':
        particles = ParticleConfig(
            n_particles=_get(block, 'N', 'particles.N', int),
            epsilon=epsilon,
            dt=_get(block, 'dt', 'particles.dt', float),
            T=T,
            seed=seed,
            sample_every=_get(block, 'sample_every', 'particles.sample_every', int, 1),
            force_method=_get(block, 'force_method', 'particles.force_method', str, 'direct'),
            cutoff=_get(block, 'cutoff', 'particles.cutoff', float, None),
            allow_large_dt=_get(block, 'allow_large_dt', 'particles.allow_large_dt', bool, False),
            workers=_get(block, 'workers', 'particles.workers', int, 1),
            snapshot_every=_get(block, 'snapshot_every', 'particles.snapshot_every', int, 0),
        )
    else:
        grid = GridConfig(
            half_width=_get(block, 'L', 'grid.L', float),
            cells=_get(block, 'n', 'grid.n', int),
            epsilon=epsilon,
            T=T,
            dt=_get(block, 'dt', 'grid.dt', float, 0.0),
            cfl_safety=_get(block, 'cfl_safety', 'grid.cfl_safety', float, 0.4),
            drift_enabled=_get(block, 'drift_enabled', 'grid.drift_enabled', bool, True),
            convolution=_get(block, 'convolution', 'grid.convolution', str, 'fft_padded'),
            advection=_get(block, 'advection', 'grid.advection', str, 'upwind'),
            sample_every=_get(block, 'sample_every', 'grid.sample_every', int, 1),
            snapshot_every=_get(block, 'snapshot_every', 'grid.snapshot_every', int, 0),
        )
    config = RunConfig(solver, initial, epsilon, T, seed, output_dir, diagnostics, particles, grid)
    validate(config)
    return config


def validate(config: RunConfig) -> None:
    """
    Field validation plus the hypothesis guards of the requested checks.

    Raises:
        ConfigError: On the first invalid field
        HypothesisViolationError: If a requested check's hypothesis fails
    """
    diagnostics = config.diagnostics
    if not 0.0 < diagnostics.gamma < 2.0:
        raise ConfigError('diagnostics.gamma', f"must lie in (0, 2), got {diagnostics.gamma}")
    if not diagnostics.nu > 0.0:
        raise ConfigError('diagnostics.nu', f"must be positive, got {diagnostics.nu}")
    if config.particles is not None:
        config.particles.validate(config.mass)
    if config.grid is not None:
        config.grid.validate()

    mass = config.mass
    checks = set(diagnostics.checks)
    if 'estimegamma' in checks:
        if not mass < CRITICAL_MASS:
            raise HypothesisViolationError('initial', f"estimegamma needs M < 8 pi, got M={mass!r}")
        lower = mass / (4.0 * math.pi)
        if not lower < diagnostics.gamma < 2.0:
            raise HypothesisViolationError(
                'diagnostics.gamma',
                f"estimegamma needs M/(4 pi) = {lower!r} < gamma < 2, got {diagnostics.gamma!r}",
            )
    if 'critical_logmoment' in checks:
        if config.initial.regime != 'critical':
            raise HypothesisViolationError('initial', f"critical_logmoment needs M = 8 pi, got M={mass!r}")
        if not config.initial.critical_admissible:
            raise HypothesisViolationError('initial.atoms', "critical_logmoment needs every atom below 8 pi")
    if 'variance_floor' in checks and config.initial.regime == 'supercritical':
        raise HypothesisViolationError('initial', f"variance_floor needs M <= 8 pi, got M={mass!r}")


def load_config(path: str) -> RunConfig:
    """
    Read and validate a JSON config file.

    Raises:
        ConfigError: If the file is missing, unreadable, not JSON, or invalid
    """
    if not os.path.exists(path):
        raise ConfigError('', f"config file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError('', f"cannot read config {path}: {e}")
    return parse_config(data, base_dir=os.path.dirname(os.path.abspath(path)))
