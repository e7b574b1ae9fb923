"""
Randomized property suites over the kernel bounds, the barycentric
inequality and the pair/triple functionals.

Each property maps a batch of uniforms to slacks; a property passes when its
worst slack is at least ``-tolerance``. Draws come from the ``suite`` stream,
so a (seed, samples) pair always reproduces the same verdicts.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np
from tqdm import tqdm

from .diagnostics import barycentric_delta_batch, g_triple_direct, g_triple_reduced
from .errors import DomainError
from .kernels import (
    GAP_IDENTITY_TOLERANCE,
    TWO_PI,
    bound_checks_enabled,
    eval_K,
    eval_K_eps,
    gap_bound_inverse_square,
    gap_bound_logarithmic,
    gap_bound_power,
    gap_closed_form,
    kernel_norm_bound,
    set_bound_checks,
)
from .measures import (
    GridDensity,
    PairKernel,
    WeightedEnsemble,
    h_eps_pair,
    log_pair_moments,
    pair_kernel_oracle,
)
from .monotone import MONOTONE_FAMILIES, sample_family_batch
from .streams import raw_blocks, to_unit

logger = logging.getLogger(__name__)

CHUNK = 100_000
# Measures-suite samples are whole random configurations, one per
# CONFIGURATION_SAMPLES requested samples.
CONFIGURATION_CHUNK = 25
CONFIGURATION_SAMPLES = 1000
# Norm ranges sampled log-uniformly
KERNEL_NORM_RANGE = (1e-8, 1e8)
BARYCENTRIC_NORM_RANGE = (1e-4, 1e4)
GAP_NORM_RANGE = (1e-4, 1e4)


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    worst_slack: float
    samples: int
    tolerance: float
    evaluations: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {
            'name': self.name,
            'pass': self.passed,
            'worst_slack': self.worst_slack,
            'samples': self.samples,
            'tolerance': self.tolerance,
            'evaluations': self.evaluations,
        }


def _unit_columns(seed: int, step: int, count: int, width: int) -> np.ndarray:
    """``(count, width)`` uniforms; blocks are 4 words so wide draws use several blocks per sample."""
    blocks = -(-width // 4)
    raw = raw_blocks(seed, 'suite', step, 0, count * blocks)
    return to_unit(raw.reshape(count, blocks * 4))[:, :width]


def _log_uniform(unit: np.ndarray, bounds: Tuple[float, float]) -> np.ndarray:
    low, high = np.log(bounds[0]), np.log(bounds[1])
    return np.exp(low + (high - low) * unit)


def _planar(norms: np.ndarray, unit_angle: np.ndarray) -> np.ndarray:
    angle = TWO_PI * unit_angle
    return np.column_stack((norms * np.cos(angle), norms * np.sin(angle)))


# Kernel properties ---------------------------------------------------------

# Library kernels take a scalar epsilon, so a batch is split into groups of
# EPSILON_GROUP_SIZE samples that share one epsilon (and one gamma) drawn from
# the group's first sample.
EPSILON_GROUP_SIZE = 64


def _grouped(unit: np.ndarray, norm_range: Tuple[float, float], slack: Callable) -> np.ndarray:
    z = _planar(_log_uniform(unit[:, 0], norm_range), unit[:, 1])
    parts = []
    for start in range(0, len(z), EPSILON_GROUP_SIZE):
        group = slice(start, start + EPSILON_GROUP_SIZE)
        first = unit[start]
        parts.append(slack(z[group], first[2], 2.0 * first[3]))
    return np.concatenate(parts)


def _squared_norms(z: np.ndarray) -> np.ndarray:
    return z[:, 0] ** 2 + z[:, 1] ** 2


def _scaled_kernel_bound(unit):
    def slack(z, epsilon, _):
        values = eval_K_eps(z, epsilon)
        return 1.0 / TWO_PI + 1e-15 - np.hypot(z[:, 0], z[:, 1]) * np.hypot(values[:, 0], values[:, 1])
    return _grouped(unit, KERNEL_NORM_RANGE, slack)


def _kernel_norm_bound(unit):
    def slack(z, epsilon, _):
        values = eval_K_eps(z, epsilon)
        bound = kernel_norm_bound(epsilon)
        return (bound - np.hypot(values[:, 0], values[:, 1])) / bound
    return _grouped(unit, KERNEL_NORM_RANGE, slack)


def _antisymmetry(unit):
    def slack(z, epsilon, _):
        return -np.max(np.abs(eval_K_eps(-z, epsilon) + eval_K_eps(z, epsilon)), axis=1)
    return _grouped(unit, KERNEL_NORM_RANGE, slack)


def _gap_identity(unit):
    def slack(z, epsilon, _):
        difference = eval_K(z) - eval_K_eps(z, epsilon)
        r2 = _squared_norms(z)
        gap = np.sqrt(r2) * np.hypot(difference[:, 0], difference[:, 1])
        return -np.abs(gap - gap_closed_form(r2, epsilon))
    return _grouped(unit, GAP_NORM_RANGE, slack)


def _relative(bound: np.ndarray, value: np.ndarray) -> np.ndarray:
    return (bound - value) / bound


def _gap_inverse_square(unit):
    def slack(z, epsilon, _):
        r2 = _squared_norms(z)
        return _relative(gap_bound_inverse_square(r2, epsilon), gap_closed_form(r2, epsilon))
    return _grouped(unit, GAP_NORM_RANGE, slack)


def _gap_power(unit):
    def slack(z, epsilon, gamma):
        r2 = _squared_norms(z)
        return _relative(gap_bound_power(r2, epsilon, gamma), gap_closed_form(r2, epsilon))
    return _grouped(unit, GAP_NORM_RANGE, slack)


def _gap_logarithmic(unit):
    def slack(z, epsilon, _):
        r2 = _squared_norms(z)
        return _relative(gap_bound_logarithmic(r2, epsilon), gap_closed_form(r2, epsilon))
    return _grouped(unit, GAP_NORM_RANGE, slack)


# Geometry properties -------------------------------------------------------

FAMILY_PAIRS = [(a, b) for a in MONOTONE_FAMILIES for b in MONOTONE_FAMILIES]


def _barycentric(unit, refined: bool):
    """
    Every triple is checked against every family pair; each triple draws its
    own family members from columns 4-7. Slacks are relative to the scale of
    the summands.
    """
    X = _planar(_log_uniform(unit[:, 0], BARYCENTRIC_NORM_RANGE), unit[:, 1])
    Y = _planar(_log_uniform(unit[:, 2], BARYCENTRIC_NORM_RANGE), unit[:, 3])
    keep = np.hypot(*(X + Y).T) > 0.0
    X, Y, unit = X[keep], Y[keep], unit[keep]
    slacks = []
    for phi_family, psi_family in FAMILY_PAIRS:
        phi = sample_family_batch(phi_family, unit[:, 4:6])
        psi = sample_family_batch(psi_family, unit[:, 6:8])
        delta, lower, scale = barycentric_delta_batch(X, Y, phi, psi)
        slacks.append((delta - lower) / scale if refined else lower / scale)
    return np.concatenate(slacks)


# Measure properties --------------------------------------------------------

def _random_ensemble(unit: np.ndarray) -> Tuple[WeightedEnsemble, float]:
    size = 3 + int(unit[0] * 18)
    spread = 0.1 + 4.0 * unit[1]
    cloud = _log_uniform(unit[2:2 + size], (1e-3, 1.0)) * spread
    positions = _planar(cloud, unit[2 + size:2 + 2 * size])
    epsilon = 0.01 + 0.99 * unit[-1]
    return WeightedEnsemble.with_mass(positions, 1.0 + 8.0 * unit[-2]), epsilon


def _measure_unit_width() -> int:
    return 2 + 2 * 20 + 2


def _triple_nonnegative(unit):
    slacks = []
    for row in unit:
        ensemble, epsilon = _random_ensemble(row)
        value = g_triple_direct(ensemble, epsilon)
        _, weights = ensemble.atoms()
        slacks.append(value / (1.0 + float(np.sum(weights)) ** 3))
    return np.array(slacks)


def _triple_reduction(unit):
    slacks = []
    for row in unit:
        ensemble, epsilon = _random_ensemble(row)
        direct = g_triple_direct(ensemble, epsilon)
        reduced = g_triple_reduced(ensemble, epsilon)
        slacks.append(-abs(direct - reduced) / (1.0 + abs(direct) + ensemble.mass ** 3))
    return np.array(slacks)


def _h_term_below_logpair(unit):
    slacks = []
    for row in unit:
        ensemble, epsilon = _random_ensemble(row)
        _, logpair2 = log_pair_moments(ensemble)
        h_term = h_eps_pair(ensemble, epsilon)
        slacks.append((logpair2.value - h_term.value) / (1.0 + abs(logpair2.value)))
    return np.array(slacks)


def _pair_kernels(epsilon: float) -> List[PairKernel]:
    return [
        PairKernel('distance_power', (-0.5,)),
        PairKernel('log_inverse_square'),
        PairKernel('saturation', (epsilon,)),
        PairKernel('log_saturation', (epsilon,)),
        PairKernel('kernel_eps_x', (epsilon,)),
    ]


def _pair_oracle(unit):
    slacks = []
    for row in unit:
        ensemble, epsilon = _random_ensemble(row)
        kernels = _pair_kernels(epsilon)
        for kernel, value in zip(kernels, ensemble.pair_sums(kernels)):
            oracle = pair_kernel_oracle(ensemble, kernel)
            slacks.append(-abs(value.value - oracle) / (1.0 + abs(oracle)))
    return np.array(slacks)


def _grid_oracle(unit):
    slacks = []
    for row in unit:
        cells = 4 + 2 * int(row[0] * 3)
        values = 0.1 + row[1:1 + cells * cells].reshape(cells, cells)
        grid = GridDensity(1.0 + 2.0 * row[-1], values)
        for kernel in _pair_kernels(0.05 + 0.9 * row[-2]):
            if kernel.vector:
                continue
            value = grid.pair_sums([kernel])[0].value
            oracle = pair_kernel_oracle(grid, kernel)
            slacks.append(-abs(value - oracle) / (1.0 + abs(oracle)))
    return np.array(slacks)


# name -> (slack function, uniforms per sample, tolerance, configuration-sized)
PropertySpec = Tuple[Callable[[np.ndarray], np.ndarray], int, float, bool]

SUITES: Dict[str, Dict[str, PropertySpec]] = {
    'kernels': {
        'scaled_kernel_bound': (_scaled_kernel_bound, 4, 0.0, False),
        'kernel_norm_bound': (_kernel_norm_bound, 4, 1e-12, False),
        'kernel_antisymmetry': (_antisymmetry, 4, 0.0, False),
        'gap_closed_form': (_gap_identity, 4, GAP_IDENTITY_TOLERANCE, False),
        'gap_inverse_square_bound': (_gap_inverse_square, 4, 1e-12, False),
        'gap_power_bound': (_gap_power, 4, 1e-12, False),
        'gap_logarithmic_bound': (_gap_logarithmic, 4, 1e-12, False),
    },
    'geometry': {
        'barycentric_refined_bound': (lambda u: _barycentric(u, True), 8, 1e-10, False),
        'barycentric_lower_bound_nonnegative': (lambda u: _barycentric(u, False), 8, 1e-14, False),
    },
    'measures': {
        'pair_sums_match_oracle': (_pair_oracle, _measure_unit_width(), 1e-12, True),
        'grid_pair_sums_match_oracle': (_grid_oracle, 1 + 8 * 8 + 2, 1e-10, True),
        'triple_nonnegative': (_triple_nonnegative, _measure_unit_width(), 1e-10, True),
        'triple_reduction_matches_direct': (_triple_reduction, _measure_unit_width(), 1e-9, True),
        'h_term_below_logpair2': (_h_term_below_logpair, _measure_unit_width(), 1e-12, True),
    },
}


def suite_names() -> List[str]:
    return list(SUITES) + ['all']


def run_property(
    suite: str, name: str, samples: int, seed: int, progress: bool = False
) -> PropertyResult:
    """
    Evaluate one property on ``samples`` draws.

    Raises:
        DomainError: If ``samples`` is not positive or the property is unknown
    """
    if samples <= 0:
        raise DomainError(f"samples must be positive, got {samples}")
    try:
        function, width, tolerance, configurations = SUITES[suite][name]
    except KeyError:
        raise DomainError(f"unknown property {suite}.{name}")
    chunk = CHUNK
    if configurations:
        samples = -(-samples // CONFIGURATION_SAMPLES)
        chunk = CONFIGURATION_CHUNK
    # Each property owns a disjoint range of stream steps.
    base = (list(SUITES).index(suite) * 64 + list(SUITES[suite]).index(name)) << 32
    worst = np.inf
    checked = 0
    starts = range(0, samples, chunk)
    for index, start in enumerate(tqdm(starts, desc=f'{suite}.{name}', unit='chunk', disable=not progress)):
        count = min(chunk, samples - start)
        slacks = function(_unit_columns(seed, base + index, count, width))
        if slacks.size:
            worst = min(worst, float(np.min(slacks)))
            checked += slacks.size
    passed = checked > 0 and worst >= -tolerance
    logger.debug(f"{suite}.{name}: worst slack {worst:.3e} over {checked} evaluations")
    return PropertyResult(f'{suite}.{name}', passed, worst, samples, tolerance, checked)


def run_suite(suite: str, samples: int, seed: int = 0, progress: bool = False) -> List[PropertyResult]:
    """
    Run every property of ``suite`` ('all' runs every suite).

    Bound assertions inside the library are switched off while a suite runs,
    the suites measure the same bounds themselves.

    Raises:
        DomainError: If the suite is unknown or ``samples`` is not positive
    """
    if suite not in suite_names():
        raise DomainError(f"unknown suite {suite!r}; available: {', '.join(suite_names())}")
    if samples <= 0:
        raise DomainError(f"samples must be positive, got {samples}")
    suites = list(SUITES) if suite == 'all' else [suite]
    previous = bound_checks_enabled()
    set_bound_checks(False)
    try:
        results = []
        for name in suites:
            for property_name in SUITES[name]:
                results.append(run_property(name, property_name, samples, seed, progress))
    finally:
        set_bound_checks(previous)
    return results
