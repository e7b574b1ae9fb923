"""
Tests for the diagnostic series, the barycentric inequality, the triple
functional and the inequality checks.
"""
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from chemotaxis_lab.diagnostics import (
    COLUMNS,
    ERROR_COLUMNS,
    EXTRA_COLUMNS,
    CheckContext,
    DiagnosticSeries,
    DiagnosticSettings,
    InequalityReport,
    barycentric_delta,
    check_center_of_mass,
    check_compacite_moment,
    check_concentration,
    check_critical_logmoment,
    check_estimegamma,
    check_logmoment_sweep,
    check_mass,
    check_second_moment,
    check_variance_floor,
    estimegamma_constant,
    g_eps_triple,
    g_triple_direct,
    g_triple_reduced,
    measure_row,
    run_checks,
)
from chemotaxis_lab.errors import DomainError, HypothesisViolationError
from chemotaxis_lab.initial_data import Atom, InitialMeasure
from chemotaxis_lab.measures import (
    GridDensity,
    PairKernel,
    WeightedEnsemble,
    moment_standard_error,
    pair_sum_standard_error,
)

FOUR_PI = 4.0 * math.pi


def make_series(times, solver='grid', mass=1.0, gamma=1.5, **columns):
    """Series whose unspecified columns are zero and mass is constant."""
    series = DiagnosticSeries({'solver': solver, 'mass': mass, 'gamma': gamma, 'epsilon': 0.1, 'cell_size': 0.1})
    for i, t in enumerate(times):
        row = {name: 0.0 for name in COLUMNS + EXTRA_COLUMNS}
        row.update(t=t, mass=mass)
        row.update({name: values[i] for name, values in columns.items()})
        series.append(row)
    return series


def equilateral(radius: float = 1.0) -> np.ndarray:
    angles = np.array([0.0, 2.0, 4.0]) * math.pi / 3.0
    return radius * np.column_stack((np.cos(angles), np.sin(angles)))


class TestBarycentricDelta:
    """Tests for barycentric_delta."""

    def test_right_angle(self):
        """Unit axes with phi = psi = 1/r give 3 - 2 sqrt 2 and a zero lower bound."""
        delta, lower = barycentric_delta([1.0, 0.0], [0.0, 1.0], 'inverse_power:p=1', 'inverse_power:p=1')
        assert delta == pytest.approx(3.0 - 2.0 * math.sqrt(2.0), rel=1e-12)
        assert lower == 0.0

    def test_equilateral(self):
        """Equal norms cancel exactly."""
        points = equilateral()
        delta, lower = barycentric_delta(points[0], points[1], 'log_inverse_square', 'inverse_power:p=2')
        assert delta == pytest.approx(0.0, abs=1e-14)
        assert lower == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize('X, Y', [([0.0, 0.0], [1.0, 0.0]), ([1.0, 0.0], [-1.0, 0.0])])
    def test_zero_vector(self, X, Y):
        """A zero X, Y or Z is refused."""
        with pytest.raises(DomainError):
            barycentric_delta(X, Y, 'inverse_power', 'inverse_power')

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-5.0, 5.0), min_size=4, max_size=4),
        st.sampled_from(['inverse_power:p=1', 'inverse_power:p=2', 'log_inverse_square',
                         'regularized_inverse_square:epsilon=0.1', 'shifted_power:a=0.5,gamma=1']),
        st.sampled_from(['inverse_power:p=0.5', 'log_inverse_square', 'regularized_inverse_square:epsilon=1']),
    )
    def test_refined_bound(self, coords, phi, psi):
        """0 <= lower bound <= delta up to rounding."""
        X, Y = np.array(coords[:2]), np.array(coords[2:])
        assume(min(np.hypot(*X), np.hypot(*Y), np.hypot(*(X + Y))) > 1e-2)
        delta, lower = barycentric_delta(X, Y, phi, psi)
        assert lower >= 0.0
        assert delta - lower >= -1e-9 * (abs(delta) + 1.0)


class TestTripleFunctional:
    """Tests for the triple functional G_eps."""

    def test_equilateral_vanishes(self):
        """Equal sides make the first factor vanish."""
        e = WeightedEnsemble(equilateral(), 1.0)
        assert float(g_eps_triple(e, 0.1)) == pytest.approx(0.0, abs=1e-12)

    def test_collinear(self):
        """Points 0, 1, 3 on a line against the scalar formula; all six orderings agree."""
        epsilon = 0.2
        e = WeightedEnsemble([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]], 1.0)
        log_weight = lambda r2: math.log1p(1.0 / r2)  # noqa: E731
        first = -log_weight(1.0) - 2.0 * log_weight(4.0) + 3.0 * log_weight(9.0)
        second = -1.0 / (1.0 + epsilon) - 2.0 / (4.0 + epsilon) + 3.0 / (9.0 + epsilon)
        assert float(g_eps_triple(e, epsilon)) == pytest.approx(6.0 * first * second, rel=1e-12)

    def test_nonnegative(self):
        """Every ordered triple is nonnegative, so the sum is."""
        rng = np.random.default_rng(5)
        e = WeightedEnsemble(rng.normal(size=(12, 2)), 0.3)
        assert float(g_eps_triple(e, 0.05)) >= -1e-12

    def test_reduced_matches_direct(self):
        """The pairwise form agrees with the triple loop."""
        rng = np.random.default_rng(7)
        e = WeightedEnsemble(rng.normal(scale=2.0, size=(15, 2)), 0.2)
        direct = g_triple_direct(e, 0.1)
        assert g_triple_reduced(e, 0.1) == pytest.approx(direct, rel=1e-9, abs=1e-12)

    def test_coincident_points(self):
        """Coincident particles make the functional infinite."""
        e = WeightedEnsemble([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]], 1.0)
        value = g_eps_triple(e, 0.1)
        assert value.infinite
        assert math.isinf(float(value))

    def test_epsilon_domain(self):
        """eps outside (0, 1] is refused."""
        with pytest.raises(DomainError):
            g_eps_triple(WeightedEnsemble(equilateral(), 1.0), 2.0)


class TestDiagnosticSeries:
    """Tests for DiagnosticSeries and InequalityReport."""

    def test_rows_and_columns(self):
        """Rows keep the column order."""
        series = make_series([0.0, 0.5], m2=[1.0, 2.0])
        assert len(series) == 2
        assert series.rows(('t', 'm2')) == [(0.0, 1.0), (0.5, 2.0)]
        assert series.last['m2'] == 2.0
        assert series.solver == 'grid'

    def test_missing_column(self):
        """Incomplete rows are refused."""
        with pytest.raises(DomainError):
            DiagnosticSeries().append({'t': 0.0})

    def test_times_increase(self):
        """Sample times must increase strictly."""
        with pytest.raises(DomainError):
            make_series([0.0, 0.0])

    def test_unknown_column(self):
        with pytest.raises(DomainError):
            make_series([0.0]).column('entropy')

    def test_report_semantics(self):
        """Slack is rhs - lhs and the tolerance absorbs small deficits."""
        assert InequalityReport.build('x', 1.0, 2.0).slack == 1.0
        assert not InequalityReport.build('x', 2.0, 1.0).passed
        assert InequalityReport.build('x', 2.0, 1.0, tolerance=1.5).passed
        report = InequalityReport.build('x', math.inf, math.inf)
        assert report.slack == -math.inf
        assert not report.passed
        assert set(report.to_dict()) == {'name', 'lhs', 'rhs', 'slack', 'pass', 'tolerance', 'context'}


class TestMeasureRow:
    """Tests for measure_row."""

    def test_columns(self):
        """A row carries every column with consistent mass and second-moment rate."""
        e = WeightedEnsemble([[-1.0, 0.0], [1.0, 0.0], [0.0, 2.0]], 0.5)
        row = measure_row(e, 0.25, 0.1, DiagnosticSettings())
        assert set(row) == set(COLUMNS + EXTRA_COLUMNS + ERROR_COLUMNS)
        assert row['t'] == 0.25
        assert row['mass'] == pytest.approx(1.5)
        saturation = e.pair_sums([PairKernel('saturation', (0.1,))])[0].value
        assert row['m2_rate'] == pytest.approx(4.0 * 1.5 - saturation / (2.0 * math.pi))
        assert row['m2'] == pytest.approx(0.5 * (1.0 + 1.0 + 4.0))
        assert row['g_triple'] == pytest.approx(float(g_eps_triple(e, 0.1)))
        assert row['moment_gamma_stderr'] == pytest.approx(moment_standard_error(e, 1.5))
        assert row['d_gamma_stderr'] == pytest.approx(
            pair_sum_standard_error(e, PairKernel('distance_power', (-0.5,)))
        )

    def test_grid_rows_have_no_standard_errors(self):
        row = measure_row(GridDensity(1.0, np.ones((8, 8))), 0.0, 0.1, DiagnosticSettings())
        assert row['moment_gamma_stderr'] == 0.0
        assert row['d_gamma_stderr'] == 0.0

    def test_settings_domain(self):
        """gamma in (0, 2) and nu > 0."""
        with pytest.raises(DomainError):
            DiagnosticSettings(gamma=2.0)
        with pytest.raises(DomainError):
            DiagnosticSettings(nu=0.0)


class TestEstimegamma:
    """Tests for the dissipation bound."""

    def test_constant(self):
        """C(3/2, 4 pi) = 32 pi / 3, infinite when gamma <= M / 4 pi."""
        assert estimegamma_constant(1.5, FOUR_PI) == pytest.approx(32.0 * math.pi / 3.0)
        assert estimegamma_constant(1.0, FOUR_PI) == math.inf

    def test_hypotheses(self):
        """M must be subcritical and gamma above M / 4 pi."""
        series = make_series([0.0, 1.0])
        with pytest.raises(HypothesisViolationError):
            check_estimegamma(series, 1.5, 8.0 * math.pi)
        with pytest.raises(HypothesisViolationError) as info:
            check_estimegamma(series, 0.9, FOUR_PI)
        assert info.value.field == 'diagnostics.gamma'

    def test_gamma_must_match_series(self):
        with pytest.raises(DomainError):
            check_estimegamma(make_series([0.0, 1.0], gamma=1.2), 1.5, FOUR_PI)

    def test_verdict(self):
        """Integral of D_gamma against C m_gamma(t)."""
        constant = estimegamma_constant(1.5, FOUR_PI)
        series = make_series([0.0, 1.0], mass=FOUR_PI, d_gamma=[1.0, 1.0], moment_gamma=[0.5, 2.0 / constant])
        report = check_estimegamma(series, 1.5, FOUR_PI, tolerance=0.0)
        assert report.lhs == pytest.approx(1.0)
        assert report.rhs == pytest.approx(2.0)
        assert report.passed
        failing = make_series([0.0, 1.0], mass=FOUR_PI, d_gamma=[3.0, 3.0], moment_gamma=[0.5, 2.0 / constant])
        assert not check_estimegamma(failing, 1.5, FOUR_PI).passed

    def test_particle_standard_error_band(self):
        """Particle runs widen the tolerance by four standard errors of both sides."""
        constant = estimegamma_constant(1.5, FOUR_PI)
        columns = dict(d_gamma=[2.2, 2.2], moment_gamma=[0.5, 2.0 / constant])
        errors = dict(d_gamma_stderr=[0.04, 0.04], moment_gamma_stderr=[0.0, 0.02 / constant])
        series = make_series([0.0, 1.0], solver='particles', mass=FOUR_PI, **columns, **errors)
        report = check_estimegamma(series, 1.5, FOUR_PI, tolerance=0.0)
        assert report.context['standard_error_band'] == pytest.approx(0.24)
        assert report.tolerance == pytest.approx(0.24)
        assert report.passed
        without_errors = make_series([0.0, 1.0], solver='particles', mass=FOUR_PI, **columns)
        assert not check_estimegamma(without_errors, 1.5, FOUR_PI, tolerance=0.0).passed

    def test_infinite_standard_error_gives_no_band(self):
        constant = estimegamma_constant(1.5, FOUR_PI)
        series = make_series(
            [0.0, 1.0], solver='particles', mass=FOUR_PI, d_gamma=[3.0, 3.0],
            moment_gamma=[0.5, 2.0 / constant], d_gamma_stderr=[math.inf, math.inf],
        )
        report = check_estimegamma(series, 1.5, FOUR_PI, tolerance=0.0)
        assert report.context['standard_error_band'] == 0.0
        assert not report.passed


class TestSecondMoment:
    """Tests for the second-moment slope check."""

    def test_exact_law(self):
        """A series following the law exactly passes all three reports."""
        law = 4.0 * FOUR_PI * 0.5
        times = np.linspace(0.0, 1.0, 6)
        series = make_series(times, mass=FOUR_PI, m2=1.0 + law * times, m2_rate=np.full(6, law))
        reports = check_second_moment(series, FOUR_PI)
        assert [r.name for r in reports] == ['second_moment_lower', 'second_moment_upper', 'second_moment_law']
        assert all(r.passed for r in reports)

    def test_slope_above_bracket(self):
        """A slope of 5M breaks the upper bracket 4M."""
        times = np.linspace(0.0, 1.0, 6)
        series = make_series(times, mass=FOUR_PI, m2=5.0 * FOUR_PI * times)
        reports = check_second_moment(series, FOUR_PI)
        assert not reports[1].passed

    def test_needs_three_rows(self):
        with pytest.raises(DomainError):
            check_second_moment(make_series([0.0, 1.0]), 1.0)


class TestCriticalChecks:
    """Tests for the critical log-moment checks."""

    def test_finite_integrals(self, critical_pair):
        """Finite log-moment integrals pass."""
        series = make_series([0.0, 1.0], logpair2=[2.0, 4.0], h_term=[1.0, 1.0])
        reports = check_critical_logmoment(series, critical_pair)
        assert [r.lhs for r in reports] == [pytest.approx(3.0), pytest.approx(1.0)]
        assert all(r.passed for r in reports)

    def test_infinite_integral(self, critical_pair):
        """An infinite log-pair moment fails."""
        series = make_series([0.0, 1.0], logpair2=[2.0, math.inf])
        assert not check_critical_logmoment(series, critical_pair)[0].passed

    def test_needs_critical_mass(self, subcritical_blob):
        with pytest.raises(HypothesisViolationError):
            check_critical_logmoment(make_series([0.0, 1.0]), subcritical_blob)

    def test_heavy_atom(self):
        """An atom of mass 8 pi is not admissible."""
        f0 = InitialMeasure(atoms=(Atom(0.0, 0.0, 8.0 * math.pi),))
        with pytest.raises(HypothesisViolationError):
            check_critical_logmoment(make_series([0.0, 1.0]), f0)

    def test_sweep_ratios(self):
        """Integrals along decreasing eps must not blow up."""
        large = make_series([0.0, 1.0], logpair2=[1.0, 1.0], h_term=[1.0, 1.0])
        small = make_series([0.0, 1.0], logpair2=[1.2, 1.2], h_term=[1.0, 1.0])
        reports = check_logmoment_sweep([(0.05, small), (0.1, large)])
        assert [r.name for r in reports] == ['sweep_logpair2_ratio', 'sweep_h_term_growth']
        assert reports[0].lhs == pytest.approx(1.2)
        assert all(r.passed for r in reports)
        blown = make_series([0.0, 1.0], logpair2=[2.0, 2.0], h_term=[1.0, 1.0])
        assert not check_logmoment_sweep([(0.1, large), (0.05, blown)])[0].passed


class TestConcentration:
    """Tests for the concentration check."""

    def test_floor(self):
        """The running minimum of M - max ball mass is compared with the floor."""
        series = make_series([0.0, 1.0, 2.0], max_ball_mass=[0.5, 0.7, 0.6])
        report = check_concentration(series, 0.1, 1.0, floor=0.2)
        assert report.rhs == pytest.approx(0.3)
        assert report.context['running_min'] == pytest.approx([0.5, 0.3, 0.3])
        assert report.passed
        assert not check_concentration(series, 0.1, 1.0, floor=0.35).passed

    def test_supercritical_reported(self):
        """Supercritical runs only report the series."""
        series = make_series([0.0, 1.0], max_ball_mass=[0.5, 1.0])
        report = check_concentration(series, 0.1, 1.0, floor=0.35, regime='supercritical')
        assert report.context['mode'] == 'reported'
        assert report.passed


class TestEnvelopeChecks:
    """Tests for the moment envelope, variance floor, center of mass and mass checks."""

    def test_compacite(self):
        """The envelope 2 m_gamma(f0) + C (M + M^2)(1 + t) bounds the moment."""
        f0 = InitialMeasure(atoms=(Atom(0.0, 0.0, 1.0),))
        inside = make_series([0.0, 1.0], moment_gamma=[1.0, 15.0])
        assert check_compacite_moment(inside, 1.5, f0).passed
        outside = make_series([0.0, 1.0], moment_gamma=[1.0, 25.0])
        report = check_compacite_moment(outside, 1.5, f0)
        assert not report.passed
        assert report.rhs == pytest.approx(20.0)
        assert report.context['t_worst'] == 1.0

    def test_variance_floor(self, subcritical_blob):
        floor = subcritical_blob.second_moment()
        series = make_series([0.0, 1.0], m2_com=[floor, 1.2 * floor])
        assert check_variance_floor(series, subcritical_blob).passed
        with pytest.raises(HypothesisViolationError):
            check_variance_floor(series, subcritical_blob.with_mass(30.0))

    def test_center_of_mass_grid(self):
        """Grid runs allow one cell of drift."""
        assert check_center_of_mass(make_series([0.0, 1.0], com_x=[0.0, 0.05])).passed
        assert not check_center_of_mass(make_series([0.0, 1.0], com_x=[0.0, 0.2])).passed

    def test_mass(self):
        series = make_series([0.0, 1.0], mass=2.0)
        assert check_mass(series).passed
        assert check_mass(series).lhs == 0.0


class TestRunChecks:
    """Tests for the check registry."""

    def test_unknown_check(self, subcritical_blob):
        ctx = CheckContext(subcritical_blob, DiagnosticSettings(), 0.1)
        with pytest.raises(DomainError):
            run_checks(make_series([0.0, 1.0]), ['mass', 'entropy'], ctx)

    def test_order(self, subcritical_blob):
        """Reports follow the requested order."""
        ctx = CheckContext(subcritical_blob, DiagnosticSettings(), 0.1)
        series = make_series([0.0, 1.0], mass=subcritical_blob.mass)
        reports = run_checks(series, ['center_of_mass', 'mass'], ctx)
        assert [r.name for r in reports] == ['center_of_mass', 'mass']
