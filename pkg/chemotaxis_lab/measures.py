"""
Atomic and gridded approximations of a planar measure, and the single- and
pair-moment functionals evaluated on them.

Pair functionals on both representations exclude the self pair: for an
ensemble the diagonal ``i == j``, for a grid the self-cell term. Singular
functionals on an ensemble with two coincident points are reported as
infinite through ``FunctionalValue`` instead of overflowing.
"""
import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy import fft as sp_fft
from scipy import signal
from scipy.spatial import cKDTree

from .errors import DomainError
from .kernels import TWO_PI

# Configure logger
logger = logging.getLogger(__name__)

# Rows per block in direct pair sums; fixed so reductions do not depend on workers
PAIR_BLOCK_ROWS = 256
# Grids up to this many cells per side convolve directly instead of through FFTs
DIRECT_CONVOLUTION_MAX_CELLS = 32


@dataclass(frozen=True)
class FunctionalValue:
    """A functional value that may be flagged as infinite."""

    value: float
    infinite: bool = False

    @classmethod
    def inf(cls) -> 'FunctionalValue':
        return cls(math.inf, True)

    def __float__(self) -> float:
        return math.inf if self.infinite else self.value


# Pair kernels --------------------------------------------------------------

def _distance_power(d, r2, q):
    return r2 ** (0.5 * q)


def _log_inverse_distance(d, r2):
    return np.log1p(1.0 / np.sqrt(r2))


def _log_inverse_square(d, r2):
    return np.log1p(1.0 / r2)


def _log_inverse_square_eps(d, r2, epsilon):
    return np.log1p(1.0 / r2) * (epsilon / (r2 + epsilon))


def _saturation(d, r2, epsilon):
    return r2 / (r2 + epsilon)


def _log_saturation(d, r2, epsilon):
    return np.log1p(1.0 / r2) * (r2 / (r2 + epsilon))


def _ball_indicator(d, r2, radius):
    return (r2 < radius * radius).astype(np.float64)


def _compact_cubic(d, r2, support):
    return np.maximum(1.0 - r2 / support, 0.0) ** 3


def _compact_cubic_radial_laplacian(d, r2, support):
    # phi'(r2) + r2 * phi''(r2) for phi(r2) = (1 - r2/R)^3 on r2 < R
    s = np.maximum(1.0 - r2 / support, 0.0)
    return -3.0 * s * s / support + r2 * 6.0 * s / (support * support)


def _kernel_eps_x(d, r2, epsilon):
    return -d[..., 0] / (TWO_PI * (r2 + epsilon))


def _kernel_eps_y(d, r2, epsilon):
    return -d[..., 1] / (TWO_PI * (r2 + epsilon))


def _kernel_eps(d, r2, epsilon):
    return -d / (TWO_PI * (r2 + epsilon))[..., None]


def _log_square_vector(d, r2):
    return np.log1p(1.0 / r2)[..., None] * d


def _eps_vector(d, r2, epsilon):
    return d / (r2 + epsilon)[..., None]


def _compact_cubic_gradient_vector(d, r2, support):
    s = np.maximum(1.0 - r2 / support, 0.0)
    return (-3.0 * s * s / support)[..., None] * d


# name -> (function, is_vector, is_singular_at_zero)
PAIR_KERNELS: Dict[str, Tuple[Callable, bool, bool]] = {
    'distance_power': (_distance_power, False, True),
    'log_inverse_distance': (_log_inverse_distance, False, True),
    'log_inverse_square': (_log_inverse_square, False, True),
    'log_inverse_square_eps': (_log_inverse_square_eps, False, True),
    'saturation': (_saturation, False, False),
    'log_saturation': (_log_saturation, False, True),
    'ball_indicator': (_ball_indicator, False, False),
    'compact_cubic': (_compact_cubic, False, False),
    'compact_cubic_radial_laplacian': (_compact_cubic_radial_laplacian, False, False),
    'kernel_eps_x': (_kernel_eps_x, False, False),
    'kernel_eps_y': (_kernel_eps_y, False, False),
    'kernel_eps': (_kernel_eps, True, False),
    'log_square_vector': (_log_square_vector, True, True),
    'eps_vector': (_eps_vector, True, False),
    'compact_cubic_gradient_vector': (_compact_cubic_gradient_vector, True, False),
}


@dataclass(frozen=True)
class PairKernel:
    """
    A named function of the displacement between two atoms.

    Kernels are hashable so lattice convolutions built from them can be cached.

    Attributes:
        name (str): Key of PAIR_KERNELS
        params (Tuple[float, ...]): Extra parameters passed after ``(d, r2)``
    """

    name: str
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.name not in PAIR_KERNELS:
            raise DomainError(f"unknown pair kernel: {self.name}")

    @property
    def vector(self) -> bool:
        return PAIR_KERNELS[self.name][1]

    @property
    def singular(self) -> bool:
        """True if the kernel diverges for coincident points."""
        if self.name == 'distance_power':
            return self.params[0] < 0.0
        return PAIR_KERNELS[self.name][2]

    def __call__(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        r2 = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]
        with np.errstate(divide='ignore', invalid='ignore'):
            return PAIR_KERNELS[self.name][0](d, r2, *self.params)


# Lattice convolutions ------------------------------------------------------

class LatticeConvolver:
    """
    Free-space convolution of cell weights with a kernel sampled on lattice offsets.

    For cell weights ``W`` on an ``n x n`` grid of spacing ``h`` it evaluates

        out[a, b] = sum_{p, q} W[p, q] * kernel(h * (a - p + sx, b - q + sy))

    for target indices ``a = 0 .. n - 1 + ex`` and ``b = 0 .. n - 1 + ey``. A
    target shift of ``-1/2`` with one extra index addresses the cell faces
    (or, on both axes, the grid nodes).

    Args:
        n (int): Cells per side
        h (float): Cell size
        kernel (PairKernel): Kernel to sample
        shift (Tuple[float, float]): Target offset in cells
        extra (Tuple[int, int]): Extra target indices per axis
        zero_self (bool): Drop the zero-displacement term
        method (str): 'direct', 'fft' or 'auto'
    """

    def __init__(
        self,
        n: int,
        h: float,
        kernel: PairKernel,
        shift: Tuple[float, float] = (0.0, 0.0),
        extra: Tuple[int, int] = (0, 0),
        zero_self: bool = True,
        method: str = 'auto',
    ):
        if method == 'auto':
            method = 'direct' if n <= DIRECT_CONVOLUTION_MAX_CELLS else 'fft'
        if method not in ('direct', 'fft'):
            raise DomainError(f"unknown convolution method: {method}")
        self.n = n
        self.extra = extra
        self.method = method
        self.vector = kernel.vector

        offsets_x = (np.arange(-(n - 1), n + extra[0]) + shift[0]) * h
        offsets_y = (np.arange(-(n - 1), n + extra[1]) + shift[1]) * h
        displacement = np.stack(np.meshgrid(offsets_x, offsets_y, indexing='ij'), axis=-1)
        sampled = np.array(kernel(displacement), dtype=np.float64)
        if zero_self and shift[0] == 0.0 and shift[1] == 0.0:
            sampled[n - 1, n - 1] = 0.0
        self._components = [sampled[..., 0], sampled[..., 1]] if self.vector else [sampled]

        if method == 'fft':
            self._shape = tuple(
                sp_fft.next_fast_len(n + size - 1, real=True) for size in sampled.shape[:2]
            )
            self._spectra = [sp_fft.rfft2(c, s=self._shape) for c in self._components]

    def apply(self, weights: np.ndarray) -> np.ndarray:
        """
        Convolve cell weights with the sampled kernel.

        Returns:
            np.ndarray: ``(n + ex, n + ey)`` for scalar kernels, with a trailing
            axis of length 2 for vector kernels
        """
        n = self.n
        rows = slice(n - 1, 2 * n - 1 + self.extra[0])
        cols = slice(n - 1, 2 * n - 1 + self.extra[1])
        outputs = []
        if self.method == 'direct':
            for component in self._components:
                full = signal.convolve(weights, component, mode='full', method='direct')
                outputs.append(full[rows, cols])
        else:
            weights_spectrum = sp_fft.rfft2(weights, s=self._shape)
            for spectrum in self._spectra:
                full = sp_fft.irfft2(weights_spectrum * spectrum, s=self._shape)
                outputs.append(full[rows, cols])
        if self.vector:
            return np.stack(outputs, axis=-1)
        return outputs[0]


@lru_cache(maxsize=64)
def lattice_convolver(
    n: int,
    h: float,
    kernel: PairKernel,
    shift: Tuple[float, float] = (0.0, 0.0),
    extra: Tuple[int, int] = (0, 0),
    zero_self: bool = True,
    method: str = 'auto',
) -> LatticeConvolver:
    """Cached LatticeConvolver factory."""
    return LatticeConvolver(n, h, kernel, shift, extra, zero_self, method)


# Measures ------------------------------------------------------------------

class BaseMeasure(ABC):
    """
    Base abstract class for finite planar measures made of weighted atoms.
    """

    @property
    @abstractmethod
    def mass(self) -> float:
        """Total mass."""

    @abstractmethod
    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Return the atoms of the measure.

        Returns:
            Tuple[np.ndarray, np.ndarray]: positions ``(K, 2)`` and weights ``(K,)``
        """

    @abstractmethod
    def pair_sums(
        self, kernels: Sequence[PairKernel], include_diagonal: bool = False
    ) -> List[FunctionalValue]:
        """
        Evaluate ``sum_{p != q} w_p w_q k(x_q - x_p)`` for scalar kernels.

        With ``include_diagonal`` the self terms ``w_p^2 k(0)`` are added.
        """

    @abstractmethod
    def atom_convolution(self, kernel: PairKernel) -> np.ndarray:
        """
        Evaluate ``V_q = sum_{p != q} w_p k(x_q - x_p)`` at every atom.

        Returns:
            np.ndarray: ``(K,)`` or ``(K, 2)`` values in atom order
        """

    @property
    def n_atoms(self) -> int:
        return self.atoms()[1].shape[0]


class WeightedEnsemble(BaseMeasure):
    """
    N planar points of equal weight w; the mass N * w is derived.

    Args:
        positions (array_like): Points of shape (N, 2)
        weight (float): Mass carried by each point
    """

    def __init__(self, positions, weight: float):
        positions = np.array(positions, dtype=np.float64)
        if positions.ndim != 2 or positions.shape[1] != 2:
            raise DomainError(f"positions must have shape (N, 2), got {positions.shape}")
        if positions.shape[0] < 1:
            raise DomainError("an ensemble needs at least one point")
        if not np.all(np.isfinite(positions)):
            raise DomainError("ensemble positions must be finite")
        if not (np.isfinite(weight) and weight > 0.0):
            raise DomainError(f"weight must be positive, got {weight}")
        positions.setflags(write=False)
        self.positions = positions
        self.weight = float(weight)

    @classmethod
    def with_mass(cls, positions, mass: float) -> 'WeightedEnsemble':
        positions = np.asarray(positions, dtype=np.float64)
        return cls(positions, mass / positions.shape[0])

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def mass(self) -> float:
        return self.size * self.weight

    def moved_to(self, positions) -> 'WeightedEnsemble':
        """Same weight, new positions."""
        return WeightedEnsemble(positions, self.weight)

    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.positions, np.full(self.size, self.weight)

    def _blocks(self) -> List[Tuple[int, int]]:
        return [
            (start, min(start + PAIR_BLOCK_ROWS, self.size))
            for start in range(0, self.size, PAIR_BLOCK_ROWS)
        ]

    def _block_displacements(self, start: int, stop: int):
        d = self.positions[start:stop, None, :] - self.positions[None, :, :]
        rows = np.arange(stop - start)
        return d, rows, rows + start

    def pair_sums(
        self, kernels: Sequence[PairKernel], include_diagonal: bool = False
    ) -> List[FunctionalValue]:
        for kernel in kernels:
            if kernel.vector:
                raise DomainError(f"pair_sums needs scalar kernels, got {kernel.name}")
        partials: List[List[float]] = [[] for _ in kernels]
        coincident = False
        for start, stop in self._blocks():
            d, rows, cols = self._block_displacements(start, stop)
            r2 = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]
            r2[rows, cols] = np.nan
            coincident = coincident or bool(np.any(r2 == 0.0))
            for index, kernel in enumerate(kernels):
                values = kernel(d)
                values[rows, cols] = 0.0
                if kernel.singular:
                    values[r2 == 0.0] = 0.0
                partials[index].append(float(values.sum()))

        results = []
        w2 = self.weight * self.weight
        for kernel, parts in zip(kernels, partials):
            if coincident and kernel.singular:
                results.append(FunctionalValue.inf())
                continue
            total = math.fsum(parts)
            if include_diagonal:
                total += self.size * float(kernel(np.zeros(2)))
            results.append(FunctionalValue(w2 * total))
        return results

    def atom_convolution(self, kernel: PairKernel, workers: int = 1) -> np.ndarray:
        def block(bounds):
            start, stop = bounds
            d, rows, cols = self._block_displacements(start, stop)
            values = kernel(d)
            values[rows, cols] = 0.0
            return values.sum(axis=1)

        blocks = self._blocks()
        if workers > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(block, blocks))
        else:
            parts = [block(bounds) for bounds in blocks]
        return self.weight * np.concatenate(parts, axis=0)

    def min_pair_distance(self) -> float:
        """Smallest distance between two distinct points; inf for N = 1."""
        if self.size < 2:
            return math.inf
        distances, _ = cKDTree(self.positions).query(self.positions, k=2)
        return float(distances[:, 1].min())


class GridDensity(BaseMeasure):
    """
    Cell-averaged density on the box [-L, L]^2.

    ``values[i, j]`` is the density of the cell whose center is
    ``(-L + (i + 1/2) h, -L + (j + 1/2) h)`` with ``h = 2L / n``.

    Args:
        half_width (float): L > 0
        values (array_like): Nonnegative (n, n) cell averages, n >= 4
    """

    def __init__(self, half_width: float, values):
        values = np.array(values, dtype=np.float64)
        if not (np.isfinite(half_width) and half_width > 0.0):
            raise DomainError(f"half width must be positive, got {half_width}")
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] < 4:
            raise DomainError(f"values must be a square array with n >= 4, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("grid values must be finite")
        if np.any(values < 0.0):
            raise DomainError(f"grid values must be nonnegative, min is {values.min():.3e}")
        values.setflags(write=False)
        self.half_width = float(half_width)
        self.values = values

    @property
    def cells(self) -> int:
        return self.values.shape[0]

    @property
    def cell_size(self) -> float:
        return 2.0 * self.half_width / self.cells

    @property
    def centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return -self.half_width + (np.arange(self.cells) + 0.5) * self.cell_size

    @property
    def cell_weights(self) -> np.ndarray:
        """Mass per cell, h^2 * values."""
        h = self.cell_size
        return self.values * (h * h)

    @property
    def mass(self) -> float:
        return float(self.cell_weights.sum())

    def with_values(self, values) -> 'GridDensity':
        return GridDensity(self.half_width, values)

    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        x, y = np.meshgrid(self.centers, self.centers, indexing='ij')
        positions = np.column_stack((x.ravel(), y.ravel()))
        return positions, self.cell_weights.ravel()

    def convolver(self, kernel: PairKernel, **options) -> LatticeConvolver:
        return lattice_convolver(self.cells, self.cell_size, kernel, **options)

    def pair_sums(
        self, kernels: Sequence[PairKernel], include_diagonal: bool = False
    ) -> List[FunctionalValue]:
        weights = self.cell_weights
        results = []
        for kernel in kernels:
            if kernel.vector:
                raise DomainError(f"pair_sums needs scalar kernels, got {kernel.name}")
            convolved = self.convolver(kernel, zero_self=not include_diagonal).apply(weights)
            results.append(FunctionalValue(float(np.sum(weights * convolved))))
        return results

    def atom_convolution(self, kernel: PairKernel) -> np.ndarray:
        field = self.convolver(kernel).apply(self.cell_weights)
        if kernel.vector:
            return field.reshape(-1, 2)
        return field.ravel()

    def outer_ring_mass(self) -> float:
        """Mass in the cells touching the box boundary."""
        weights = self.cell_weights
        inner = weights[1:-1, 1:-1].sum()
        return float(weights.sum() - inner)


# Functionals ---------------------------------------------------------------

def _require_gamma(gamma: float, upper_inclusive: bool = True) -> float:
    gamma = float(gamma)
    upper_ok = gamma <= 2.0 if upper_inclusive else gamma < 2.0
    if not (gamma > 0.0 and upper_ok):
        interval = '(0, 2]' if upper_inclusive else '(0, 2)'
        raise DomainError(f"gamma must lie in {interval}, got {gamma}")
    return gamma


def total_mass(m: BaseMeasure) -> float:
    return m.mass


def center_of_mass(m: BaseMeasure) -> np.ndarray:
    """Weighted mean position."""
    positions, weights = m.atoms()
    return weights @ positions / weights.sum()


def moment_gamma(m: BaseMeasure, gamma: float, center=(0.0, 0.0)) -> float:
    """
    Return sum_i w_i ||x_i - center||^gamma.

    Raises:
        DomainError: If gamma is outside (0, 2]
    """
    gamma = _require_gamma(gamma)
    positions, weights = m.atoms()
    shifted = positions - np.asarray(center, dtype=np.float64)
    r2 = np.einsum('ij,ij->i', shifted, shifted)
    if gamma == 2.0:
        return float(weights @ r2)
    return float(weights @ r2 ** (0.5 * gamma))


def pair_moment(m: BaseMeasure, gamma: float) -> float:
    """S_gamma = sum over ordered pairs of w_i w_j ||x_i - x_j||^gamma."""
    gamma = _require_gamma(gamma)
    return m.pair_sums([PairKernel('distance_power', (gamma,))])[0].value


def pair_dissipation(m: BaseMeasure, gamma: float) -> FunctionalValue:
    """D_gamma = sum_{i != j} w_i w_j ||x_i - x_j||^(gamma - 2)."""
    gamma = _require_gamma(gamma, upper_inclusive=False)
    return m.pair_sums([PairKernel('distance_power', (gamma - 2.0,))])[0]


def log_pair_moments(m: BaseMeasure) -> Tuple[FunctionalValue, FunctionalValue]:
    """Pair sums of log(1 + 1/r) and log(1 + 1/r^2)."""
    first, second = m.pair_sums(
        [PairKernel('log_inverse_distance'), PairKernel('log_inverse_square')]
    )
    return first, second


def h_eps_pair(m: BaseMeasure, epsilon: float) -> FunctionalValue:
    """Pair sum of log(1 + 1/r^2) * eps / (r^2 + eps)."""
    return m.pair_sums([PairKernel('log_inverse_square_eps', (float(epsilon),))])[0]


def saturation_pair(m: BaseMeasure, epsilon: float) -> float:
    """Pair sum of r^2 / (r^2 + eps), the drift part of the second-moment rate."""
    return m.pair_sums([PairKernel('saturation', (float(epsilon),))])[0].value


def second_moment_rate(m: BaseMeasure, epsilon: float) -> float:
    """
    Instantaneous d m2/dt of the regularized dynamics at ``m``:
    4M - (1/2 pi) * sum_{i != j} w_i w_j r^2 / (r^2 + eps).
    """
    return 4.0 * m.mass - saturation_pair(m, epsilon) / TWO_PI


def moment_standard_error(e: WeightedEnsemble, gamma: float) -> float:
    """
    Monte Carlo standard error of ``moment_gamma`` on an i.i.d. ensemble:
    M * std(|x_i|^gamma) / sqrt(N); zero for a single point.
    """
    gamma = _require_gamma(gamma)
    if e.size < 2:
        return 0.0
    r2 = np.einsum('ij,ij->i', e.positions, e.positions)
    return e.mass * float(np.std(r2 ** (0.5 * gamma), ddof=1)) / math.sqrt(e.size)


def pair_sum_standard_error(e: WeightedEnsemble, kernel: PairKernel) -> float:
    """
    Monte Carlo standard error of a scalar pair sum on an i.i.d. ensemble.

    The pair sum is M^2 times a U-statistic of order two, whose leading
    variance term is 4 Var(g) / N with ``g_i`` the mean of the kernel over
    the other points. Infinite when two points coincide on a singular kernel.
    """
    if kernel.vector:
        raise DomainError(f"pair_sum_standard_error needs a scalar kernel, got {kernel.name}")
    if e.size < 3:
        return 0.0
    rows = e.atom_convolution(kernel) / (e.weight * (e.size - 1))
    if not np.all(np.isfinite(rows)):
        return math.inf
    return 2.0 * e.mass * e.mass * float(np.std(rows, ddof=1)) / math.sqrt(e.size)


def max_ball_mass(m: BaseMeasure, nu: float) -> float:
    """
    Largest mass inside an open ball of radius ``nu`` over candidate centers.

    Candidates are the particle positions of an ensemble, and the nodes and
    cell centers of a grid.
    """
    if not (np.isfinite(nu) and nu > 0.0):
        raise DomainError(f"ball radius must be positive, got {nu}")
    if isinstance(m, WeightedEnsemble):
        tree = cKDTree(m.positions)
        counts = tree.query_ball_point(
            m.positions, r=np.nextafter(nu, 0.0), return_length=True
        )
        return float(np.max(counts) * m.weight)
    if isinstance(m, GridDensity):
        kernel = PairKernel('ball_indicator', (float(nu),))
        weights = m.cell_weights
        at_centers = m.convolver(kernel, zero_self=False).apply(weights)
        at_nodes = m.convolver(kernel, shift=(-0.5, -0.5), extra=(1, 1)).apply(weights)
        best = max(float(at_centers.max()), float(at_nodes.max()))
        return min(max(best, 0.0), m.mass)
    raise DomainError(f"unsupported measure type: {type(m).__name__}")


def pair_kernel_oracle(m: BaseMeasure, kernel: PairKernel, include_diagonal: bool = False) -> float:
    """Brute-force double loop over atoms; only meant for small measures."""
    positions, weights = m.atoms()
    terms = []
    for p in range(len(weights)):
        for q in range(len(weights)):
            if p == q and not include_diagonal:
                continue
            terms.append(weights[p] * weights[q] * float(kernel(positions[q] - positions[p])))
    return math.fsum(terms)
