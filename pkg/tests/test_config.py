"""
Tests for config parsing, validation and sweep axis substitution.
"""
import copy
import json
import math
import os

import pytest

from chemotaxis_lab.config import DEFAULT_CHECKS, load_config, parse_config
from chemotaxis_lab.errors import ConfigError, HypothesisViolationError

FOUR_PI = 4.0 * math.pi

PARTICLE_DOC = {
    'solver': 'particles',
    'initial': {'gaussians': [{'x': 0.0, 'y': 0.0, 'variance': 0.5, 'mass': FOUR_PI}]},
    'epsilon': 0.1,
    'T': 0.04,
    'particles': {'N': 40, 'dt': 0.02},
}

GRID_DOC = {
    'solver': 'grid',
    'initial': {'atoms': [{'x': 0.0, 'y': 0.0, 'mass': 1.0}]},
    'epsilon': 0.1,
    'T': 0.05,
    'grid': {'L': 5.0, 'n': 32},
}


def with_changes(doc, **changes):
    data = copy.deepcopy(doc)
    data.update(changes)
    return data


class TestParseConfig:
    """Tests for parse_config."""

    def test_particle_defaults(self, tmp_path):
        """Optional fields take their defaults; output_dir resolves against the base directory."""
        config = parse_config(PARTICLE_DOC, base_dir=str(tmp_path))
        assert config.solver == 'particles'
        assert config.seed == 0
        assert config.output_dir == os.path.join(str(tmp_path), 'output')
        assert config.diagnostics.checks == DEFAULT_CHECKS
        assert config.diagnostics.gamma == 1.5
        assert config.particles.n_particles == 40
        assert config.particles.force_method == 'direct'
        assert config.particles.epsilon == 0.1
        assert config.grid is None
        assert config.mass == pytest.approx(FOUR_PI)

    def test_grid_defaults(self):
        config = parse_config(GRID_DOC)
        assert config.grid.half_width == 5.0
        assert config.grid.cells == 32
        assert config.grid.convolution == 'fft_padded'
        assert config.grid.advection == 'upwind'
        assert config.particles is None

    def test_absolute_output_dir(self, tmp_path):
        config = parse_config(with_changes(GRID_DOC, output_dir=str(tmp_path)), base_dir='/elsewhere')
        assert config.output_dir == str(tmp_path)

    @pytest.mark.parametrize('changes, field', [
        ({'solver': 'fem'}, 'solver'),
        ({'grid': {'L': 5.0, 'n': 32}}, 'particles'),
        ({'particles': None}, 'particles'),
        ({'epsilon': None}, 'epsilon'),
        ({'epsilon': 'small'}, 'epsilon'),
        ({'epsilon': 2.0}, 'epsilon'),
        ({'seed': True}, 'seed'),
        ({'seed': 1.5}, 'seed'),
        ({'particles': {'N': True, 'dt': 0.02}}, 'particles.N'),
        ({'particles': {'N': 40, 'dt': 0.5}}, 'particles.dt'),
        ({'initial': {'atoms': [{'y': 0.0, 'mass': 1.0}]}}, 'initial.atoms[0].x'),
        ({'initial': {}}, 'initial'),
        ({'diagnostics': {'checks': ['mass', 'entropy']}}, 'diagnostics.checks'),
        ({'diagnostics': {'tolerances': {'mass': 'tight'}}}, 'diagnostics.tolerances.mass'),
        ({'diagnostics': {'gamma': 2.5}}, 'diagnostics.gamma'),
        ({'diagnostics': {'nu': 0.0}}, 'diagnostics.nu'),
    ])
    def test_invalid_fields(self, changes, field):
        """The first invalid field is named in the error."""
        with pytest.raises(ConfigError) as info:
            parse_config(with_changes(PARTICLE_DOC, **changes))
        assert info.value.field == field

    def test_not_an_object(self):
        with pytest.raises(ConfigError):
            parse_config([1, 2, 3])

    def test_estimegamma_hypothesis(self):
        """gamma must exceed M / 4 pi = 1 for the dissipation bound."""
        doc = with_changes(PARTICLE_DOC, diagnostics={'gamma': 0.9, 'checks': ['estimegamma']})
        with pytest.raises(HypothesisViolationError) as info:
            parse_config(doc)
        assert info.value.field == 'diagnostics.gamma'

    def test_critical_hypothesis(self):
        """The critical log-moment check needs M = 8 pi."""
        doc = with_changes(PARTICLE_DOC, diagnostics={'checks': ['critical_logmoment']})
        with pytest.raises(HypothesisViolationError) as info:
            parse_config(doc)
        assert info.value.field == 'initial'

    def test_variance_floor_hypothesis(self):
        doc = with_changes(GRID_DOC, initial={'atoms': [{'x': 0.0, 'y': 0.0, 'mass': 30.0}]},
                           diagnostics={'checks': ['variance_floor']})
        with pytest.raises(HypothesisViolationError):
            parse_config(doc)

    def test_to_dict_round_trip(self, tmp_path):
        """The echoed document parses back to the same config."""
        for doc in (PARTICLE_DOC, GRID_DOC):
            config = parse_config(doc, base_dir=str(tmp_path))
            assert parse_config(config.to_dict()) == config


class TestWithAxisValue:
    """Tests for RunConfig.with_axis_value."""

    def test_epsilon(self):
        """eps is replaced everywhere it is stored."""
        config = parse_config(GRID_DOC).with_axis_value('epsilon', 0.05)
        assert config.epsilon == 0.05
        assert config.grid.epsilon == 0.05

    def test_epsilon_revalidates(self):
        """Smaller eps lowers dt_max below the configured step."""
        with pytest.raises(ConfigError) as info:
            parse_config(PARTICLE_DOC).with_axis_value('epsilon', 0.001)
        assert info.value.field == 'particles.dt'

    def test_sizes(self):
        assert parse_config(PARTICLE_DOC).with_axis_value('N', 80).particles.n_particles == 80
        assert parse_config(GRID_DOC).with_axis_value('n', 64.0).grid.cells == 64
        with pytest.raises(ConfigError) as info:
            parse_config(PARTICLE_DOC).with_axis_value('N', 2.5)
        assert info.value.field == 'sweep.N'

    def test_axis_must_fit_solver(self):
        with pytest.raises(ConfigError) as info:
            parse_config(PARTICLE_DOC).with_axis_value('n', 64)
        assert info.value.field == 'sweep.axis'
        with pytest.raises(ConfigError):
            parse_config(GRID_DOC).with_axis_value('T', 1.0)

    def test_mass(self):
        """M rescales every component."""
        config = parse_config(GRID_DOC).with_axis_value('M', 2.0)
        assert config.mass == pytest.approx(2.0)
        with pytest.raises(ConfigError):
            parse_config(GRID_DOC).with_axis_value('M', -1.0)


class TestLoadConfig:
    """Tests for load_config."""

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / 'absent.json'))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"solver": ', encoding='utf-8')
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_relative_output(self, tmp_path):
        """Relative output paths are resolved against the config's directory."""
        path = tmp_path / 'run.json'
        path.write_text(json.dumps(with_changes(GRID_DOC, output_dir='results')), encoding='utf-8')
        assert load_config(str(path)).output_dir == os.path.join(str(tmp_path), 'results')
