"""
Tests for the registry of nonincreasing radial weights.
"""
import numpy as np
import pytest

from chemotaxis_lab.errors import DomainError
from chemotaxis_lab.monotone import MONOTONE_FAMILIES, MonotoneFunction, sample_family_batch


class TestMonotoneFunction:
    """Tests for MonotoneFunction."""

    def test_from_tag(self):
        """Tags carry the family and its parameters."""
        phi = MonotoneFunction.from_tag('shifted_power:a=0.5,gamma=1')
        assert phi.family == 'shifted_power'
        assert phi.params == {'a': 0.5, 'gamma': 1.0}
        assert MonotoneFunction.from_tag(phi.tag).params == phi.params

    def test_defaults(self):
        """Missing parameters take the family defaults."""
        assert MonotoneFunction('inverse_power').params == {'p': 1.0}
        assert MonotoneFunction('log_inverse_square').tag == 'log_inverse_square'

    @pytest.mark.parametrize('tag', [
        'cosine', 'inverse_power:p=3', 'inverse_power:p=0', 'shifted_power:gamma=2',
        'inverse_power:q=1', 'inverse_power:p=x',
    ])
    def test_invalid(self, tag):
        """Unknown families, unknown parameters and out-of-range values are refused."""
        with pytest.raises(DomainError):
            MonotoneFunction.from_tag(tag)

    def test_values(self):
        """Spot values of each family."""
        r = np.array([2.0])
        assert MonotoneFunction('inverse_power', p=2.0)(r)[0] == pytest.approx(0.25)
        assert MonotoneFunction('regularized_inverse_square', epsilon=1.0)(r)[0] == pytest.approx(0.2)
        assert MonotoneFunction('shifted_power', a=1.0, gamma=1.0)(r)[0] == pytest.approx(5.0 ** -0.5)
        assert MonotoneFunction('log_inverse_square')(r)[0] == pytest.approx(np.log(1.25))

    @pytest.mark.parametrize('family', list(MONOTONE_FAMILIES))
    def test_nonincreasing(self, family):
        """Every sampled member is nonincreasing on (0, inf)."""
        u = np.linspace(0.05, 0.95, 7)
        batch = sample_family_batch(family, np.column_stack((u, 1.0 - u)))
        values = batch(np.tile(np.logspace(-4, 4, 2001), (7, 1)))
        assert np.all(np.diff(values, axis=1) <= 0.0)
        assert np.all(values > 0.0)


class TestFamilyBatch:
    """Tests for sample_family_batch."""

    def test_rows_match_members(self):
        """Row i evaluates the member built from row i of the uniforms."""
        unit = np.array([[0.25, 0.5], [0.75, 0.1], [0.5, 0.9]])
        batch = sample_family_batch('shifted_power', unit)
        r = np.array([[0.5, 2.0], [0.5, 2.0], [0.5, 2.0]])
        values = batch(r)
        for row, (a, gamma) in enumerate(unit):
            member = MonotoneFunction('shifted_power', a=a, gamma=2.0 * gamma)
            assert values[row].tolist() == pytest.approx(member(r[row]).tolist(), rel=1e-15)

    def test_parameter_free_family(self):
        batch = sample_family_batch('log_inverse_square', np.zeros((2, 0)))
        assert batch(np.array([[1.0], [2.0]]))[:, 0].tolist() == pytest.approx([np.log(2.0), np.log(1.25)])

    def test_unknown_family(self):
        with pytest.raises(DomainError):
            sample_family_batch('cosine', np.zeros((1, 1)))
