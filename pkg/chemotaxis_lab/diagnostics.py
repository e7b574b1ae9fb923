"""
Runtime diagnostics: the sampled functional series of a run, the triple
functional G_eps, the barycentric inequality, and inequality checks over a
series.

Every check returns ``InequalityReport`` values of the form ``lhs <= rhs``;
a report passes when ``slack = rhs - lhs >= -tolerance``.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, HypothesisViolationError
from .initial_data import CRITICAL_MASS, InitialMeasure
from .kernels import TWO_PI, require_epsilon
from .measures import (
    BaseMeasure,
    FunctionalValue,
    PairKernel,
    WeightedEnsemble,
    center_of_mass,
    max_ball_mass,
    moment_gamma,
    moment_standard_error,
    pair_sum_standard_error,
    total_mass,
)
from .monotone import FamilyBatch, MonotoneFunction
from .utils import cumulative_trapezoid, least_squares_slope, trapezoid

# Configure logger
logger = logging.getLogger(__name__)

COLUMNS = (
    't', 'mass', 'com_x', 'com_y', 'm2', 's_gamma', 'd_gamma',
    'logpair1', 'logpair2', 'max_ball_mass', 'g_triple',
)
EXTRA_COLUMNS = ('t', 'moment_gamma', 'h_term', 'm2_com', 'm2_rate')
# Monte Carlo standard errors of particle rows; zero for grids and not written to CSV
ERROR_COLUMNS = ('moment_gamma_stderr', 'd_gamma_stderr')

# Ensembles up to this size use the ordered-triple loop for G_eps
DIRECT_TRIPLE_MAX_ATOMS = 30

# Envelope constant of the gamma-moment growth bound:
# m_gamma(t) <= 2 m_gamma(f0) + C (M + M^2)(1 + t) holds with C = 5 for
# every gamma in (0, 2] and eps <= 1 (see DESIGN.md)
COMPACITE_CONSTANT = 5.0

# Default relative tolerances by solver
RELATIVE_TOLERANCE = {'grid': 0.05, 'particles': 0.20}
STANDARD_ERRORS = 4.0


@dataclass(frozen=True)
class DiagnosticSettings:
    """
    Parameters of the sampled functionals.

    Attributes:
        gamma (float): Exponent of S_gamma, D_gamma and the gamma-moment, in (0, 2)
        nu (float): Radius of the ball-mass functional
    """

    gamma: float = 1.5
    nu: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.gamma < 2.0:
            raise DomainError(f"gamma must lie in (0, 2), got {self.gamma}")
        if not (math.isfinite(self.nu) and self.nu > 0.0):
            raise DomainError(f"nu must be positive, got {self.nu}")


class DiagnosticSeries:
    """
    Time-stamped functional values of one run.

    Each row holds every entry of COLUMNS and EXTRA_COLUMNS; ERROR_COLUMNS
    default to zero when a row omits them.

    Args:
        metadata (Optional[Dict[str, Any]]): gamma, epsilon, nu, mass, seed, solver, ...
    """

    def __init__(self, metadata: Optional[Dict[str, Any]] = None):
        self.metadata: Dict[str, Any] = dict(metadata or {})
        self._rows: List[Dict[str, float]] = []

    def append(self, row: Mapping[str, float]) -> None:
        missing = [name for name in COLUMNS + EXTRA_COLUMNS if name not in row]
        if missing:
            raise DomainError(f"diagnostic row is missing {', '.join(missing)}")
        if self._rows and not row['t'] > self._rows[-1]['t']:
            raise DomainError(
                f"sample times must increase strictly: {row['t']} after {self._rows[-1]['t']}"
            )
        values = {name: float(row[name]) for name in COLUMNS + EXTRA_COLUMNS}
        values.update({name: float(row.get(name, 0.0)) for name in ERROR_COLUMNS})
        self._rows.append(values)

    def __len__(self) -> int:
        return len(self._rows)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS + EXTRA_COLUMNS + ERROR_COLUMNS:
            raise DomainError(f"unknown diagnostic column: {name}")
        return np.array([row[name] for row in self._rows], dtype=np.float64)

    @property
    def times(self) -> np.ndarray:
        return self.column('t')

    def rows(self, columns: Sequence[str] = COLUMNS) -> List[Tuple[float, ...]]:
        return [tuple(row[name] for name in columns) for row in self._rows]

    @property
    def last(self) -> Dict[str, float]:
        return dict(self._rows[-1])

    @property
    def solver(self) -> str:
        return self.metadata.get('solver', 'particles')

    @property
    def mass(self) -> float:
        return float(self.metadata.get('mass', self._rows[0]['mass']))


@dataclass(frozen=True)
class InequalityReport:
    """Outcome of one inequality check ``lhs <= rhs``."""

    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    tolerance: float
    context: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        name: str,
        lhs: float,
        rhs: float,
        tolerance: float = 0.0,
        context: Optional[Dict[str, Any]] = None,
    ) -> 'InequalityReport':
        lhs, rhs, tolerance = float(lhs), float(rhs), float(tolerance)
        if math.isinf(lhs) and math.isinf(rhs) and lhs == rhs:
            slack = -math.inf if lhs > 0 else math.inf
        else:
            slack = rhs - lhs
        passed = bool(slack >= -tolerance)
        return cls(name, lhs, rhs, slack, passed, tolerance, dict(context or {}))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'lhs': self.lhs,
            'rhs': self.rhs,
            'slack': self.slack,
            'pass': self.passed,
            'tolerance': self.tolerance,
            'context': self.context,
        }


# Barycentric inequality ----------------------------------------------------

def _as_monotone(function):
    if isinstance(function, (MonotoneFunction, FamilyBatch)):
        return function
    return MonotoneFunction.from_tag(str(function))


def barycentric_delta_batch(X, Y, phi, psi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized barycentric quantity for rows of X and Y, with Z = -X - Y.

    ``phi`` and ``psi`` may be tags, functions, or ``FamilyBatch`` values
    carrying one family member per row.

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: delta, refined lower bound,
        and the scale (sum phi(|v|)|v|)(sum psi(|v|)|v|) of the summands
    """
    phi, psi = _as_monotone(phi), _as_monotone(psi)
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    Z = -X - Y
    vectors = np.stack((X, Y, Z), axis=-2)
    norms = np.hypot(vectors[..., 0], vectors[..., 1])
    if np.any(norms == 0.0):
        raise DomainError("barycentric vectors must be nonzero")
    phi_values, psi_values = phi(norms), psi(norms)
    first = np.sum(phi_values[..., None] * vectors, axis=-2)
    second = np.sum(psi_values[..., None] * vectors, axis=-2)
    delta = np.sum(first * second, axis=-1)

    order = np.argsort(norms, axis=-1)
    small = np.take_along_axis(norms, order, axis=-1)[..., 0]
    phi_sorted = np.take_along_axis(phi_values, order, axis=-1)
    psi_sorted = np.take_along_axis(psi_values, order, axis=-1)
    refined = (
        (phi_sorted[..., 0] - phi_sorted[..., 1]) * (psi_sorted[..., 0] - psi_sorted[..., 1]) * small * small
    )
    scale = np.sum(phi_values * norms, axis=-1) * np.sum(psi_values * norms, axis=-1)
    return delta, refined, scale


def barycentric_delta(X, Y, phi, psi) -> Tuple[float, float]:
    """
    Return (delta, refined lower bound) for one pair (X, Y), Z = -X - Y.

    ``delta = [sum phi(|V|) V] . [sum psi(|V|) V]`` over V in {X, Y, Z}; after
    sorting the norms, ``delta >= (phi(a) - phi(b)) (psi(a) - psi(b)) a^2 >= 0``
    with ``a <= b`` the two smallest norms.

    Args:
        X, Y (array_like): Planar vectors
        phi, psi (MonotoneFunction | str): Registered nonincreasing functions or tags

    Raises:
        DomainError: If any of X, Y, Z is zero
    """
    delta, refined, _ = barycentric_delta_batch(
        np.asarray(X, dtype=np.float64)[None, :], np.asarray(Y, dtype=np.float64)[None, :], phi, psi
    )
    return float(delta[0]), float(refined[0])


# Triple functional ---------------------------------------------------------

def g_eps_batch(x, y, z, epsilon: float) -> np.ndarray:
    """G_eps(x, y, z) for rows of points; zero-length sides contribute nothing."""
    x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (x, y, z)))
    sides = np.stack((x - y, y - z, z - x), axis=-2)
    r2 = sides[..., 0] ** 2 + sides[..., 1] ** 2
    with np.errstate(divide='ignore', invalid='ignore'):
        log_weight = np.where(r2 > 0.0, np.log1p(1.0 / r2), 0.0)
    first = np.sum(log_weight[..., None] * sides, axis=-2)
    second = np.sum(sides / (r2 + epsilon)[..., None], axis=-2)
    return np.sum(first * second, axis=-1)


def g_triple_direct(m: BaseMeasure, epsilon: float) -> float:
    """Ordered-distinct-triple loop with an exactly rounded sum; O(K^3)."""
    positions, weights = m.atoms()
    size = len(weights)
    terms = []
    for i in range(size):
        for j in range(size):
            if j == i:
                continue
            k = np.array([k for k in range(size) if k != i and k != j], dtype=int)
            if k.size == 0:
                continue
            values = g_eps_batch(positions[i], positions[j], positions[k], epsilon)
            terms.extend((weights[i] * weights[j] * weights[k] * values).tolist())
    return math.fsum(terms)


def g_triple_reduced(m: BaseMeasure, epsilon: float, saturation_sum: Optional[float] = None) -> float:
    """
    O(K^2) form of the triple sum:
    3M sum_{p != q} w_p w_q c_pq + 6 sum_q w_q A_q . B_q, with
    c = L(r^2) r^2 / (r^2 + eps), A_q = sum_p w_p L(|x_p - x_q|^2)(x_p - x_q)
    and B_q = sum_r w_r (x_q - x_r) / (|x_q - x_r|^2 + eps).
    """
    if saturation_sum is None:
        saturation_sum = m.pair_sums([PairKernel('log_saturation', (epsilon,))])[0].value
    _, weights = m.atoms()
    a_field = -m.atom_convolution(PairKernel('log_square_vector'))
    b_field = m.atom_convolution(PairKernel('eps_vector', (epsilon,)))
    cross = float(np.sum(weights * np.einsum('ij,ij->i', a_field, b_field)))
    return 3.0 * m.mass * saturation_sum + 6.0 * cross


def g_eps_triple(m: BaseMeasure, epsilon: float) -> FunctionalValue:
    """
    Sum of w_i w_j w_k G_eps(x_i, x_j, x_k) over ordered distinct triples.

    Small measures use the direct loop, larger ones the reduced pairwise form.
    Coincident ensemble points give an infinite value.
    """
    epsilon = require_epsilon(epsilon)
    if isinstance(m, WeightedEnsemble) and m.min_pair_distance() == 0.0:
        return FunctionalValue.inf()
    if m.n_atoms <= DIRECT_TRIPLE_MAX_ATOMS:
        return FunctionalValue(g_triple_direct(m, epsilon))
    return FunctionalValue(g_triple_reduced(m, epsilon))


# Sampling ------------------------------------------------------------------

def measure_row(m: BaseMeasure, t: float, epsilon: float, settings: DiagnosticSettings) -> Dict[str, float]:
    """
    Evaluate every sampled functional of ``m`` at time ``t``.

    Returns:
        Dict[str, float]: One value per entry of COLUMNS, EXTRA_COLUMNS and
        ERROR_COLUMNS; the standard errors are zero for grids
    """
    gamma = settings.gamma
    (
        s_gamma, d_gamma, logpair1, logpair2, h_term, saturation, log_saturation,
    ) = m.pair_sums([
        PairKernel('distance_power', (gamma,)),
        PairKernel('distance_power', (gamma - 2.0,)),
        PairKernel('log_inverse_distance'),
        PairKernel('log_inverse_square'),
        PairKernel('log_inverse_square_eps', (epsilon,)),
        PairKernel('saturation', (epsilon,)),
        PairKernel('log_saturation', (epsilon,)),
    ])
    com = center_of_mass(m)
    coincident = isinstance(m, WeightedEnsemble) and log_saturation.infinite
    if coincident:
        g_triple = math.inf
    elif m.n_atoms <= DIRECT_TRIPLE_MAX_ATOMS:
        g_triple = g_triple_direct(m, epsilon)
    else:
        g_triple = g_triple_reduced(m, epsilon, log_saturation.value)
    if isinstance(m, WeightedEnsemble):
        moment_error = moment_standard_error(m, gamma)
        dissipation_error = pair_sum_standard_error(m, PairKernel('distance_power', (gamma - 2.0,)))
    else:
        moment_error = dissipation_error = 0.0
    return {
        't': float(t),
        'mass': total_mass(m),
        'com_x': float(com[0]),
        'com_y': float(com[1]),
        'm2': moment_gamma(m, 2.0),
        's_gamma': float(s_gamma),
        'd_gamma': float(d_gamma),
        'logpair1': float(logpair1),
        'logpair2': float(logpair2),
        'max_ball_mass': max_ball_mass(m, settings.nu),
        'g_triple': g_triple,
        'moment_gamma': moment_gamma(m, gamma),
        'h_term': float(h_term),
        'm2_com': moment_gamma(m, 2.0, com),
        'm2_rate': 4.0 * m.mass - saturation.value / TWO_PI,
        'moment_gamma_stderr': moment_error,
        'd_gamma_stderr': dissipation_error,
    }


# Checks --------------------------------------------------------------------

def _relative_tolerance(series: DiagnosticSeries, override: Optional[float]) -> float:
    if override is not None:
        return float(override)
    return RELATIVE_TOLERANCE.get(series.solver, RELATIVE_TOLERANCE['particles'])


def _context(series: DiagnosticSeries, **extra: Any) -> Dict[str, Any]:
    times = series.times
    context = {
        't_range': [float(times[0]), float(times[-1])],
        'solver': series.solver,
        'epsilon': series.metadata.get('epsilon'),
        'mass': series.mass,
    }
    for key in ('n_particles', 'cells'):
        if key in series.metadata:
            context[key] = series.metadata[key]
    context.update(extra)
    return context


def _require_series_gamma(series: DiagnosticSeries, gamma: float) -> None:
    recorded = series.metadata.get('gamma')
    if recorded is not None and not math.isclose(recorded, gamma, rel_tol=1e-15):
        raise DomainError(f"series was sampled with gamma={recorded}, check asked for {gamma}")


def estimegamma_constant(gamma: float, mass: float) -> float:
    """4M / (2 gamma (gamma - M / 4 pi)); finite only for gamma > M / 4 pi."""
    margin = gamma - mass / (4.0 * math.pi)
    if margin <= 0.0:
        return math.inf
    return 4.0 * mass / (2.0 * gamma * margin)


def check_estimegamma(
    series: DiagnosticSeries,
    gamma: float,
    mass: float,
    tolerance: Optional[float] = None,
    standard_errors: float = STANDARD_ERRORS,
) -> InequalityReport:
    """
    Dissipation bound: int_0^t D_gamma ds <= C(gamma, M) * m_gamma(t).

    Particle runs widen the relative tolerance by ``standard_errors`` Monte
    Carlo standard errors of both sides: the time integral of the D_gamma
    standard error, and C times the final m_gamma standard error.

    Raises:
        HypothesisViolationError: Unless M < 8 pi and M / 4 pi < gamma < 2
    """
    if not mass < CRITICAL_MASS:
        raise HypothesisViolationError('initial', f"needs M < 8 pi, got M={mass!r}")
    lower = mass / (4.0 * math.pi)
    if not lower < gamma < 2.0:
        raise HypothesisViolationError(
            'diagnostics.gamma', f"needs {lower!r} = M/(4 pi) < gamma < 2, got gamma={gamma!r}"
        )
    _require_series_gamma(series, gamma)
    constant = estimegamma_constant(gamma, mass)
    lhs = trapezoid(series.column('d_gamma'), series.times)
    rhs = constant * series.column('moment_gamma')[-1]
    relative = _relative_tolerance(series, tolerance)
    lhs_error = trapezoid(series.column('d_gamma_stderr'), series.times)
    rhs_error = constant * series.column('moment_gamma_stderr')[-1]
    band = standard_errors * (lhs_error + rhs_error)
    if not math.isfinite(band):
        band = 0.0
    return InequalityReport.build(
        'estimegamma', lhs, rhs, relative * abs(rhs) + band,
        _context(
            series, gamma=gamma, constant=constant, relative_tolerance=relative,
            lhs_stderr=lhs_error, rhs_stderr=rhs_error, standard_error_band=band,
        ),
    )


def check_second_moment(
    series: DiagnosticSeries,
    mass: float,
    tolerance: Optional[float] = None,
    standard_errors: float = STANDARD_ERRORS,
) -> List[InequalityReport]:
    """
    Least-squares slope of m2 against the bracket 4M - M^2/(2 pi) <= slope <= 4M,
    and against the unregularized law 4M(1 - M/(8 pi)).

    The law report allows the mean regularization effect (m2_rate - law), the
    regression band and a relative tolerance.

    Returns:
        List[InequalityReport]: lower bracket, upper bracket, exact law
    """
    if len(series) < 3:
        raise DomainError(f"the second-moment check needs at least 3 rows, got {len(series)}")
    slope, stderr = least_squares_slope(series.times, series.column('m2'))
    relative = _relative_tolerance(series, tolerance)
    band = standard_errors * stderr
    lower = 4.0 * mass - mass * mass / TWO_PI
    upper = 4.0 * mass
    law = 4.0 * mass * (1.0 - mass / CRITICAL_MASS)
    bracket_tolerance = band + relative * mass * mass / TWO_PI
    context = _context(series, slope=slope, slope_stderr=stderr, law=law)

    effect = float(np.mean(series.column('m2_rate'))) - law
    allowed = abs(effect) + band + relative * max(abs(law), 1.0)
    return [
        InequalityReport.build('second_moment_lower', lower, slope, bracket_tolerance, context),
        InequalityReport.build('second_moment_upper', slope, upper, bracket_tolerance, context),
        InequalityReport.build(
            'second_moment_law', abs(slope - law), allowed, 0.0,
            dict(context, regularization_effect=effect),
        ),
    ]


def check_critical_logmoment(series: DiagnosticSeries, f0: InitialMeasure) -> List[InequalityReport]:
    """
    Time integrals of the log-pair moment log(1 + 1/r^2) and of its
    eps-weighted companion; each must be finite.

    Raises:
        HypothesisViolationError: Unless f0 is critical with every atom below 8 pi
    """
    _require_critical(f0)
    times = series.times
    reports = []
    for name, column in (('critical_logpair2', 'logpair2'), ('critical_h_term', 'h_term')):
        integral = trapezoid(series.column(column), times)
        reports.append(InequalityReport.build(name, integral, math.inf, 0.0, _context(series)))
    return reports


def _require_critical(f0: InitialMeasure) -> None:
    if f0.regime != 'critical':
        raise HypothesisViolationError('initial', f"needs M = 8 pi, got M={f0.mass!r}")
    if not f0.critical_admissible:
        raise HypothesisViolationError('initial.atoms', "every atom must carry less than 8 pi")


def check_logmoment_sweep(
    runs: Sequence[Tuple[float, DiagnosticSeries]],
    max_ratio: float = 1.5,
    max_growth: float = 1.1,
) -> List[InequalityReport]:
    """
    Boundedness of the critical log-moment integrals along a decreasing eps sweep.

    Successive ratios of the logpair2 integral must stay below ``max_ratio``;
    the h-term integral may grow by at most ``max_growth`` per step.
    """
    ordered = sorted(runs, key=lambda item: -item[0])
    reports = []
    for (eps_a, a), (eps_b, b) in zip(ordered, ordered[1:]):
        for name, column, bound in (
            ('sweep_logpair2_ratio', 'logpair2', max_ratio),
            ('sweep_h_term_growth', 'h_term', max_growth),
        ):
            first = trapezoid(a.column(column), a.times)
            second = trapezoid(b.column(column), b.times)
            ratio = second / first if first > 0.0 else math.inf
            reports.append(InequalityReport.build(
                name, ratio, bound, 0.0,
                {'epsilon_from': eps_a, 'epsilon_to': eps_b, 'integral_from': first, 'integral_to': second},
            ))
    return reports


def check_concentration(
    series: DiagnosticSeries,
    nu: float,
    mass: float,
    floor: Optional[float] = None,
    regime: str = 'subcritical',
) -> InequalityReport:
    """
    Measured complement mass zeta(t) = M - max ball mass and its running minimum.

    With a floor and a non-supercritical regime the running minimum must stay
    above the floor; otherwise the series is only reported.
    """
    zeta = mass - series.column('max_ball_mass')
    running_min = np.minimum.accumulate(zeta)
    context = _context(series, nu=nu, zeta=zeta.tolist(), running_min=running_min.tolist())
    if floor is not None and regime != 'supercritical':
        return InequalityReport.build(
            'concentration', floor, running_min[-1], 0.0, dict(context, mode='floor')
        )
    return InequalityReport.build(
        'concentration', 0.0, running_min[-1], 1e-12 * mass, dict(context, mode='reported')
    )


def check_compacite_moment(
    series: DiagnosticSeries,
    gamma: float,
    f0: InitialMeasure,
    constant: float = COMPACITE_CONSTANT,
) -> InequalityReport:
    """
    Moment envelope m_gamma(t) <= 2 m_gamma(f0) + C (M + M^2)(1 + t) at every row.

    The report is taken at the row of smallest slack.
    """
    if not 0.0 < gamma <= 2.0:
        raise DomainError(f"gamma must lie in (0, 2], got {gamma}")
    if gamma == 2.0:
        moments = series.column('m2')
    else:
        _require_series_gamma(series, gamma)
        moments = series.column('moment_gamma')
    mass = f0.mass
    times = series.times
    envelope = 2.0 * f0.moment_gamma(gamma) + constant * (mass + mass * mass) * (1.0 + times)
    worst = int(np.argmin(envelope - moments))
    return InequalityReport.build(
        'compacite_moment', moments[worst], envelope[worst], 1e-12 * envelope[worst],
        _context(series, gamma=gamma, constant=constant, t_worst=float(times[worst])),
    )


def check_pair_moment_balance(
    series: DiagnosticSeries, gamma: float, mass: float, tolerance: Optional[float] = None
) -> InequalityReport:
    """
    S_gamma(t) >= S_gamma(0) + 2 gamma (gamma - M / 4 pi) int_0^t D_gamma ds at every row.
    """
    if not 0.0 < gamma < 2.0:
        raise DomainError(f"gamma must lie in (0, 2), got {gamma}")
    _require_series_gamma(series, gamma)
    coefficient = 2.0 * gamma * (gamma - mass / (4.0 * math.pi))
    s_gamma = series.column('s_gamma')
    d_gamma = series.column('d_gamma')
    if np.all(np.isfinite(d_gamma)):
        bound = s_gamma[0] + coefficient * cumulative_trapezoid(d_gamma, series.times)
    else:
        bound = np.full_like(s_gamma, math.inf if coefficient > 0.0 else -math.inf)
        bound[0] = s_gamma[0]
    worst = int(np.argmin(s_gamma - bound))
    relative = _relative_tolerance(series, tolerance)
    return InequalityReport.build(
        'pair_moment_balance', bound[worst], s_gamma[worst], relative * abs(s_gamma[0]),
        _context(series, gamma=gamma, coefficient=coefficient, t_worst=float(series.times[worst])),
    )


def check_variance_floor(
    series: DiagnosticSeries, f0: InitialMeasure, tolerance: Optional[float] = None
) -> InequalityReport:
    """
    For M <= 8 pi the second moment about the center of mass stays above that of f0.

    Raises:
        HypothesisViolationError: If M > 8 pi
    """
    if f0.regime == 'supercritical':
        raise HypothesisViolationError('initial', f"needs M <= 8 pi, got M={f0.mass!r}")
    floor = f0.second_moment(f0.center_of_mass())
    measured = float(series.column('m2_com').min())
    relative = _relative_tolerance(series, tolerance)
    return InequalityReport.build(
        'variance_floor', floor, measured, relative * floor, _context(series)
    )


def check_center_of_mass(
    series: DiagnosticSeries, reference=None, tolerance: Optional[float] = None
) -> InequalityReport:
    """
    Largest displacement of the center of mass from ``reference`` (first row by default).

    Default tolerance: one cell for grids; four standard errors of the
    Brownian center-of-mass martingale, sqrt(4 t / N), for particles.
    """
    com = np.column_stack((series.column('com_x'), series.column('com_y')))
    reference = com[0] if reference is None else np.asarray(reference, dtype=np.float64)
    displacement = float(np.max(np.hypot(*(com - reference).T)))
    if tolerance is None:
        if series.solver == 'grid':
            tolerance = float(series.metadata['cell_size'])
        else:
            duration = float(series.times[-1] - series.times[0])
            tolerance = STANDARD_ERRORS * math.sqrt(4.0 * duration / series.metadata['n_particles'])
    return InequalityReport.build(
        'center_of_mass', displacement, 0.0, tolerance,
        _context(series, reference=[float(reference[0]), float(reference[1])]),
    )


def check_mass(series: DiagnosticSeries, tolerance: float = 1e-12) -> InequalityReport:
    """Largest relative deviation of the mass column from its first value."""
    masses = series.column('mass')
    deviation = float(np.max(np.abs(masses - masses[0])) / masses[0])
    return InequalityReport.build('mass', deviation, 0.0, tolerance, _context(series))


# Registry ------------------------------------------------------------------

@dataclass(frozen=True)
class CheckContext:
    """Everything a registered check may need besides the series."""

    f0: InitialMeasure
    settings: DiagnosticSettings
    epsilon: float
    tolerances: Mapping[str, float] = field(default_factory=dict)
    concentration_floor: Optional[float] = None
    compacite_constant: float = COMPACITE_CONSTANT


def _run_mass(series, ctx):
    return [check_mass(series, ctx.tolerances.get('mass', 1e-12))]


def _run_center_of_mass(series, ctx):
    return [check_center_of_mass(series, tolerance=ctx.tolerances.get('center_of_mass'))]


def _run_second_moment(series, ctx):
    return check_second_moment(series, ctx.f0.mass, ctx.tolerances.get('second_moment'))


def _run_estimegamma(series, ctx):
    return [check_estimegamma(series, ctx.settings.gamma, ctx.f0.mass, ctx.tolerances.get('estimegamma'))]


def _run_critical_logmoment(series, ctx):
    return check_critical_logmoment(series, ctx.f0)


def _run_concentration(series, ctx):
    return [check_concentration(
        series, ctx.settings.nu, ctx.f0.mass, ctx.concentration_floor, ctx.f0.regime
    )]


def _run_compacite_moment(series, ctx):
    return [check_compacite_moment(series, ctx.settings.gamma, ctx.f0, ctx.compacite_constant)]


def _run_pair_moment_balance(series, ctx):
    return [check_pair_moment_balance(
        series, ctx.settings.gamma, ctx.f0.mass, ctx.tolerances.get('pair_moment_balance')
    )]


def _run_variance_floor(series, ctx):
    return [check_variance_floor(series, ctx.f0, ctx.tolerances.get('variance_floor'))]


CHECKS: Dict[str, Callable[[DiagnosticSeries, CheckContext], List[InequalityReport]]] = {
    'mass': _run_mass,
    'center_of_mass': _run_center_of_mass,
    'second_moment': _run_second_moment,
    'estimegamma': _run_estimegamma,
    'critical_logmoment': _run_critical_logmoment,
    'concentration': _run_concentration,
    'compacite_moment': _run_compacite_moment,
    'pair_moment_balance': _run_pair_moment_balance,
    'variance_floor': _run_variance_floor,
}


def run_checks(series: DiagnosticSeries, names: Iterable[str], ctx: CheckContext) -> List[InequalityReport]:
    """Run the named checks in order and log each verdict."""
    reports: List[InequalityReport] = []
    for name in names:
        if name not in CHECKS:
            raise DomainError(f"Unknown check: {name}. Available: {', '.join(CHECKS)}")
        for report in CHECKS[name](series, ctx):
            level = logging.INFO if report.passed else logging.WARNING
            logger.log(level, f"{'PASS' if report.passed else 'FAIL'} {report.name}: "
                              f"lhs={report.lhs:.6g} rhs={report.rhs:.6g} slack={report.slack:.3g}")
            reports.append(report)
    return reports
