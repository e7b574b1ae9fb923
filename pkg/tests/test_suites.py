"""
Tests for the randomized property suites.
"""
import math

import numpy as np
import pytest

from chemotaxis_lab.errors import DomainError
from chemotaxis_lab.kernels import bound_checks_enabled
from chemotaxis_lab.suites import (
    EPSILON_GROUP_SIZE,
    FAMILY_PAIRS,
    SUITES,
    _barycentric,
    _grouped,
    run_property,
    run_suite,
    suite_names,
)


class TestRunSuite:
    """Tests for run_suite."""

    @pytest.mark.parametrize('suite', ['kernels', 'geometry'])
    def test_pointwise_suites_pass(self, suite):
        results = run_suite(suite, 5000, seed=1)
        assert [r.name for r in results] == [f'{suite}.{name}' for name in SUITES[suite]]
        assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]
        assert all(r.samples == 5000 for r in results)

    def test_measures_suite_passes(self):
        """One random configuration per thousand samples."""
        results = run_suite('measures', 3000, seed=2)
        assert all(r.passed for r in results), [r.to_dict() for r in results if not r.passed]
        assert 'measures.h_term_below_logpair2' in [r.name for r in results]
        assert all(r.samples == 3 for r in results)

    def test_deterministic(self):
        """Same seed, same worst slack."""
        first = run_suite('kernels', 2000, seed=5)
        second = run_suite('kernels', 2000, seed=5)
        assert [r.worst_slack for r in first] == [r.worst_slack for r in second]

    def test_all(self):
        assert suite_names()[-1] == 'all'
        results = run_suite('all', 1000)
        assert len(results) == sum(len(properties) for properties in SUITES.values())

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            run_suite('kernels', 0)
        with pytest.raises(DomainError):
            run_suite('entropy', 100)
        with pytest.raises(DomainError):
            run_property('kernels', 'unknown_property', 100, 0)

    def test_restores_bound_checks(self, bound_checks):
        """Library assertions are off during a suite and restored after it."""
        run_suite('geometry', 100)
        assert bound_checks_enabled()

    def test_to_dict(self):
        result = run_property('kernels', 'kernel_antisymmetry', 100, 0)
        assert result.to_dict()['name'] == 'kernels.kernel_antisymmetry'
        assert result.passed


class TestGeometryProperties:
    """Tests for the sampled barycentric properties."""

    def test_every_family_pair_sees_every_triple(self):
        result = run_property('geometry', 'barycentric_refined_bound', 3000, 4)
        assert result.passed
        assert result.evaluations == 3000 * len(FAMILY_PAIRS)

    def test_slack_relative_to_summand_scale(self):
        """X = (1, 0), Y = (0, 1) with phi = psi = 1/r: delta = 3 - 2 sqrt 2, scale 9."""
        row = np.array([[0.5, 0.0, 0.5, 0.25, 0.5, 0.5, 0.5, 0.5]])
        refined = _barycentric(row, True)
        lower = _barycentric(row, False)
        assert len(refined) == len(FAMILY_PAIRS)
        assert FAMILY_PAIRS[0] == ('inverse_power', 'inverse_power')
        assert refined[0] == pytest.approx((3.0 - 2.0 * math.sqrt(2.0)) / 9.0, rel=1e-9)
        assert lower[0] == pytest.approx(0.0, abs=1e-15)

    def test_members_drawn_per_triple(self):
        """Two triples with the same geometry but different parameters give different slacks."""
        rows = np.array([
            [0.5, 0.0, 0.6, 0.3, 0.2, 0.5, 0.2, 0.5],
            [0.5, 0.0, 0.6, 0.3, 0.9, 0.5, 0.9, 0.5],
        ])
        slacks = _barycentric(rows, True)
        assert slacks[0] != slacks[1]


class TestKernelProperties:
    """Tests for the epsilon grouping of kernel properties."""

    def test_one_epsilon_per_small_group(self):
        seen = []

        def record(z, epsilon, gamma):
            seen.append(epsilon)
            return np.zeros(len(z))

        unit = np.random.default_rng(0).uniform(0.01, 0.99, size=(1000, 4))
        slacks = _grouped(unit, (1e-2, 1e2), record)
        assert len(slacks) == 1000
        assert len(seen) == math.ceil(1000 / EPSILON_GROUP_SIZE)
        assert seen == unit[::EPSILON_GROUP_SIZE, 2].tolist()
