"""
Tests for the counter-based random streams.
"""
import numpy as np
import pytest

from chemotaxis_lab import streams
from chemotaxis_lab.errors import DomainError


class TestRawBlocks:
    """Tests for raw_blocks and stream_key."""

    def test_deterministic(self):
        """The same (seed, domain, step, start) always gives the same words."""
        first = streams.raw_blocks(7, 'noise', 3, 0, 100)
        second = streams.raw_blocks(7, 'noise', 3, 0, 100)
        assert first.shape == (100, 4)
        assert first.dtype == np.uint64
        assert np.array_equal(first, second)

    def test_random_access(self):
        """Block i does not depend on where the read starts."""
        whole = streams.raw_blocks(7, 'noise', 3, 0, 50)
        tail = streams.raw_blocks(7, 'noise', 3, 20, 30)
        assert np.array_equal(whole[20:], tail)

    def test_streams_are_distinct(self):
        """Different domains, steps and seeds give different words."""
        base = streams.raw_blocks(1, 'noise', 0, 0, 8)
        assert not np.array_equal(base, streams.raw_blocks(1, 'sample', 0, 0, 8))
        assert not np.array_equal(base, streams.raw_blocks(1, 'noise', 1, 0, 8))
        assert not np.array_equal(base, streams.raw_blocks(2, 'noise', 0, 0, 8))

    def test_invalid_arguments(self):
        """Negative seeds and unknown domains are refused."""
        with pytest.raises(DomainError):
            streams.stream_key(-1, 'noise', 0)
        with pytest.raises(DomainError):
            streams.stream_key(0, 'weather', 0)


class TestVariates:
    """Tests for the uniform and normal transforms."""

    def test_uniforms_in_open_interval(self):
        """Uniforms never hit 0 or 1."""
        u = streams.uniforms(0, 'suite', 0, 0, 100000)
        assert u.min() > 0.0
        assert u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.01

    def test_normal_moments(self):
        """Box-Muller normals have zero mean and unit variance per coordinate."""
        xi = streams.normals(11, 'noise', 0, 0, 200000)
        assert xi.shape == (200000, 2)
        assert np.all(np.abs(xi.mean(axis=0)) < 0.015)
        assert np.all(np.abs(xi.var(axis=0) - 1.0) < 0.02)

    def test_normals_and_uniforms_share_blocks(self):
        """The normal part of normals_and_uniforms is exactly normals()."""
        normal, unit = streams.normals_and_uniforms(5, 'sample', 0, 10, 64)
        assert np.array_equal(normal, streams.normals(5, 'sample', 0, 10, 64))
        assert unit.shape == (64,)
