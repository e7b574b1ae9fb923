"""
Initial measures made of atoms and isotropic Gaussians, their exact heat-kernel
mollification at scale eps, exact sampling, and projection to a grid.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, Tuple

import numpy as np
from scipy import special, stats

from . import streams
from .errors import DomainError, MassCaptureError
from .kernels import require_epsilon
from .measures import GridDensity, WeightedEnsemble

# Configure logger
logger = logging.getLogger(__name__)

CRITICAL_MASS = 8.0 * math.pi
CRITICAL_RELATIVE_TOLERANCE = 1e-12
REQUIRED_CAPTURE = 1.0 - 1e-6

# Rows per chunk of the counter stream when sampling
SAMPLE_CHUNK = 65536


@dataclass(frozen=True)
class Atom:
    x: float
    y: float
    mass: float


@dataclass(frozen=True)
class GaussianComponent:
    """Isotropic Gaussian with per-coordinate variance ``variance``."""

    x: float
    y: float
    variance: float
    mass: float


def _check_finite(name: str, *values: float) -> None:
    for value in values:
        if not math.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value}")


@dataclass(frozen=True)
class InitialMeasure:
    """
    Symbolic initial measure: a finite mixture of atoms and Gaussians.

    Attributes:
        atoms (Tuple[Atom, ...]): Point masses
        gaussians (Tuple[GaussianComponent, ...]): Isotropic Gaussian components
    """

    atoms: Tuple[Atom, ...] = ()
    gaussians: Tuple[GaussianComponent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'atoms', tuple(self.atoms))
        object.__setattr__(self, 'gaussians', tuple(self.gaussians))
        if not self.atoms and not self.gaussians:
            raise DomainError("an initial measure needs at least one component")
        for atom in self.atoms:
            _check_finite("atom", atom.x, atom.y, atom.mass)
            if atom.mass <= 0.0:
                raise DomainError(f"atom mass must be positive, got {atom.mass}")
        for gaussian in self.gaussians:
            _check_finite("gaussian", gaussian.x, gaussian.y, gaussian.variance, gaussian.mass)
            if gaussian.mass <= 0.0:
                raise DomainError(f"gaussian mass must be positive, got {gaussian.mass}")
            if gaussian.variance <= 0.0:
                raise DomainError(f"gaussian variance must be positive, got {gaussian.variance}")

    @property
    def mass(self) -> float:
        return math.fsum(c.mass for c in self.atoms + self.gaussians)

    @property
    def regime(self) -> str:
        """'subcritical', 'critical' or 'supercritical' relative to M = 8 pi."""
        if math.isclose(self.mass, CRITICAL_MASS, rel_tol=CRITICAL_RELATIVE_TOLERANCE):
            return 'critical'
        return 'subcritical' if self.mass < CRITICAL_MASS else 'supercritical'

    @property
    def critical_admissible(self) -> bool:
        """True iff every atom carries less than 8 pi."""
        return all(atom.mass < CRITICAL_MASS for atom in self.atoms)

    def components(self, epsilon: float = 0.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Gaussian-mixture view after mollification at scale ``epsilon``.

        Atoms become Gaussians of variance eps and Gaussians gain eps.

        Returns:
            Tuple[np.ndarray, np.ndarray, np.ndarray]: means (K, 2),
            variances (K,), masses (K,)
        """
        parts = [(a.x, a.y, epsilon, a.mass) for a in self.atoms]
        parts += [(g.x, g.y, g.variance + epsilon, g.mass) for g in self.gaussians]
        table = np.array(parts, dtype=np.float64)
        return table[:, :2], table[:, 2], table[:, 3]

    def center_of_mass(self) -> np.ndarray:
        means, _, masses = self.components()
        return masses @ means / masses.sum()

    def second_moment(self, center=(0.0, 0.0), epsilon: float = 0.0) -> float:
        """
        Closed-form second moment about ``center`` of the measure mollified at ``epsilon``.

        Mollification adds 2 eps per unit mass.
        """
        means, variances, masses = self.components(epsilon)
        offsets = means - np.asarray(center, dtype=np.float64)
        return float(masses @ (np.einsum('ij,ij->i', offsets, offsets) + 2.0 * variances))

    def moment_gamma(self, gamma: float, center=(0.0, 0.0)) -> float:
        """
        Closed-form sum of mass-weighted E||x - center||^gamma over components.
        """
        if not 0.0 < gamma <= 2.0:
            raise DomainError(f"gamma must lie in (0, 2], got {gamma}")
        if gamma == 2.0:
            return self.second_moment(center)
        center = np.asarray(center, dtype=np.float64)
        total = 0.0
        for atom in self.atoms:
            total += atom.mass * float(np.hypot(atom.x - center[0], atom.y - center[1])) ** gamma
        for g in self.gaussians:
            offset2 = (g.x - center[0]) ** 2 + (g.y - center[1]) ** 2
            total += g.mass * gaussian_norm_moment(offset2, g.variance, gamma)
        return total

    def with_mass(self, mass: float) -> 'InitialMeasure':
        """Copy with every component scaled so the total mass is ``mass``."""
        if not (math.isfinite(mass) and mass > 0.0):
            raise DomainError(f"mass must be positive, got {mass}")
        scale = mass / self.mass
        return InitialMeasure(
            atoms=tuple(replace(a, mass=a.mass * scale) for a in self.atoms),
            gaussians=tuple(replace(g, mass=g.mass * scale) for g in self.gaussians),
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'InitialMeasure':
        atoms = tuple(
            Atom(float(a['x']), float(a['y']), float(a['mass'])) for a in data.get('atoms', [])
        )
        gaussians = tuple(
            GaussianComponent(float(g['x']), float(g['y']), float(g['variance']), float(g['mass']))
            for g in data.get('gaussians', [])
        )
        return cls(atoms, gaussians)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'atoms': [{'x': a.x, 'y': a.y, 'mass': a.mass} for a in self.atoms],
            'gaussians': [
                {'x': g.x, 'y': g.y, 'variance': g.variance, 'mass': g.mass}
                for g in self.gaussians
            ],
        }


def gaussian_norm_moment(offset2: float, variance: float, gamma: float) -> float:
    """
    E||mu + sigma xi||^gamma for a standard planar normal xi with ||mu||^2 = offset2.

    ||mu + sigma xi||^2 / sigma^2 is noncentral chi-square with 2 degrees of
    freedom; its moments are a Poisson mixture of central chi-square moments.
    """
    s = 0.5 * gamma
    scale = (2.0 * variance) ** s
    half_lambda = 0.5 * offset2 / variance
    if half_lambda == 0.0:
        return scale * math.gamma(1.0 + s)
    upper = int(half_lambda + 12.0 * math.sqrt(half_lambda) + 60.0)
    k = np.arange(upper + 1)
    log_terms = stats.poisson.logpmf(k, half_lambda) + special.gammaln(1.0 + k + s) - special.gammaln(1.0 + k)
    return scale * float(np.exp(special.logsumexp(log_terms)))


def mollified_density(f0: InitialMeasure, epsilon: float, x) -> np.ndarray:
    """
    Density of f0 convolved with the heat kernel of variance eps, at points ``x``.

    Args:
        f0 (InitialMeasure): Initial measure
        epsilon (float): Mollification scale in (0, 1]
        x (array_like): Points of shape (..., 2)

    Returns:
        np.ndarray: Density values of shape (...)
    """
    epsilon = require_epsilon(epsilon)
    x = np.asarray(x, dtype=np.float64)
    means, variances, masses = f0.components(epsilon)
    total = np.zeros(x.shape[:-1])
    for mean, variance, mass in zip(means, variances, masses):
        r2 = (x[..., 0] - mean[0]) ** 2 + (x[..., 1] - mean[1]) ** 2
        total += mass * np.exp(-r2 / (2.0 * variance)) / (2.0 * np.pi * variance)
    return total


def sample_mollified(f0: InitialMeasure, epsilon: float, n_points: int, seed: int) -> WeightedEnsemble:
    """
    Draw ``n_points`` i.i.d. samples of the mollified measure, each of weight M / N.

    Sample ``i`` depends only on ``(seed, i)``.

    Raises:
        DomainError: If ``n_points < 1`` or epsilon is outside (0, 1]
    """
    epsilon = require_epsilon(epsilon)
    if n_points < 1:
        raise DomainError(f"need at least one sample, got {n_points}")
    means, variances, masses = f0.components(epsilon)
    cumulative = np.cumsum(masses) / masses.sum()
    cumulative[-1] = 1.0

    positions = np.empty((n_points, 2))
    for start in range(0, n_points, SAMPLE_CHUNK):
        count = min(SAMPLE_CHUNK, n_points - start)
        normal, unit = streams.normals_and_uniforms(seed, 'sample', 0, start, count)
        choice = np.searchsorted(cumulative, unit, side='right')
        positions[start:start + count] = means[choice] + np.sqrt(variances[choice])[:, None] * normal
    logger.debug(f"Sampled {n_points} points from the mollified initial measure")
    return WeightedEnsemble(positions, f0.mass / n_points)


def captured_mass_fraction(f0: InitialMeasure, epsilon: float, half_width: float) -> float:
    """Fraction of the mollified mass inside [-L, L]^2 (exact, through the normal CDF)."""
    epsilon = require_epsilon(epsilon)
    means, variances, masses = f0.components(epsilon)
    sigma = np.sqrt(variances)
    per_axis = [
        special.ndtr((half_width - means[:, axis]) / sigma)
        - special.ndtr((-half_width - means[:, axis]) / sigma)
        for axis in (0, 1)
    ]
    return float(masses @ (per_axis[0] * per_axis[1]) / masses.sum())


def project_to_grid(f0: InitialMeasure, epsilon: float, half_width: float, cells: int) -> GridDensity:
    """
    Sample the mollified density at cell centers and rescale to the exact mass.

    Raises:
        MassCaptureError: If the box holds less than 1 - 1e-6 of the mass
    """
    captured = captured_mass_fraction(f0, epsilon, half_width)
    if captured < REQUIRED_CAPTURE:
        raise MassCaptureError(captured, REQUIRED_CAPTURE)
    h = 2.0 * half_width / cells
    centers = -half_width + (np.arange(cells) + 0.5) * h
    x, y = np.meshgrid(centers, centers, indexing='ij')
    values = mollified_density(f0, epsilon, np.stack((x, y), axis=-1))
    grid_mass = values.sum() * h * h
    if grid_mass <= 0.0:
        raise DomainError("the grid does not resolve the initial density")
    values *= f0.mass / grid_mass
    logger.debug(f"Projected initial data on {cells}x{cells} cells, captured fraction {captured:.12g}")
    return GridDensity(half_width, values)
