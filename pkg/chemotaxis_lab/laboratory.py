"""
Laboratory: runs a configured experiment end to end and writes its artifacts.
"""
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .config import RunConfig, load_config
from .diagnostics import (
    COLUMNS,
    EXTRA_COLUMNS,
    CheckContext,
    DiagnosticSeries,
    InequalityReport,
    check_logmoment_sweep,
    run_checks,
)
from .errors import ConfigError, LabError
from .grid_solver import run_grid
from .measures import GridDensity, WeightedEnsemble
from .particle_solver import run_particles
from .solvers import SolverRun
from .utils import (
    ensure_dir,
    least_squares_slope,
    sanitize_filename,
    trapezoid,
    write_field,
    write_json,
    write_rows_csv,
)

# Configure logger
logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    """
    Outcome of one simulated configuration.

    Attributes:
        config (RunConfig): The configuration that was run
        run (SolverRun): Series, snapshots and solver flags
        reports (List[InequalityReport]): Check reports
        artifacts (Dict[str, str]): Artifact name -> path
    """

    config: RunConfig
    run: SolverRun
    reports: List[InequalityReport]
    artifacts: Dict[str, str] = field(default_factory=dict)

    @property
    def failed(self) -> List[str]:
        return [report.name for report in self.reports if not report.passed]

    @property
    def passed(self) -> bool:
        return not self.failed


@dataclass
class SweepResult:
    axis: str
    entries: List[Dict[str, Any]]
    reports: List[InequalityReport]
    report_path: str

    @property
    def errors(self) -> List[Dict[str, Any]]:
        return [entry for entry in self.entries if entry['status'] == 'error']

    @property
    def failed(self) -> List[str]:
        names = [report.name for report in self.reports if not report.passed]
        for entry in self.entries:
            names += [f"{entry['value']!r}:{name}" for name in entry.get('failed', [])]
        return names


class Laboratory:
    """
    Main entry point binding a RunConfig to a solver, the checks and the artifacts.

    Attributes:
        config (RunConfig): Validated configuration
        progress (bool): Show progress bars while stepping
    """

    def __init__(self, config: RunConfig, progress: bool = False):
        self.config = config
        self.progress = progress

    @classmethod
    def from_file(cls, path: str, progress: bool = False) -> 'Laboratory':
        """
        Raises:
            ConfigError: If the file is missing or invalid
        """
        config = load_config(path)
        logger.info(f"Loaded config {path}: solver={config.solver}, M={config.mass:.6g}, eps={config.epsilon}")
        return cls(config, progress)

    def run(self) -> SolverRun:
        """Run the configured solver."""
        config = self.config
        settings = config.diagnostics.settings
        if config.solver == 'particles':
            return run_particles(config.particles, config.initial, settings, self.progress)
        return run_grid(config.grid, config.initial, settings, self.progress)

    def check(self, series: DiagnosticSeries) -> List[InequalityReport]:
        diagnostics = self.config.diagnostics
        context = CheckContext(
            f0=self.config.initial,
            settings=diagnostics.settings,
            epsilon=self.config.epsilon,
            tolerances=diagnostics.tolerances,
            concentration_floor=diagnostics.concentration_floor,
            compacite_constant=diagnostics.compacite_constant,
        )
        return run_checks(series, diagnostics.checks, context)

    def simulate(self, output_dir: Optional[str] = None) -> RunResult:
        """
        Run, check and write every artifact.

        Args:
            output_dir (Optional[str]): Overrides the configured output directory

        Returns:
            RunResult: Reports are returned even when checks fail
        """
        output_dir = ensure_dir(output_dir or self.config.output_dir)
        run = self.run()
        reports = self.check(run.series)
        result = RunResult(self.config, run, reports)
        result.artifacts = self.write_artifacts(result, output_dir)
        verdict = 'pass' if result.passed else f"fail ({', '.join(result.failed)})"
        logger.info(f"Wrote {len(result.artifacts)} artifacts to {output_dir}; verdict: {verdict}")
        return result

    def write_artifacts(self, result: RunResult, output_dir: str) -> Dict[str, str]:
        """
        Write the series, snapshots, reports and manifest of a run.

        Everything except the manifest's ``timestamps`` entry is a deterministic
        function of the configuration.
        """
        series = result.run.series
        artifacts = {
            'diagnostics': write_rows_csv(
                os.path.join(output_dir, 'diagnostics.csv'), COLUMNS, series.rows(COLUMNS)
            ),
            'diagnostics_extra': write_rows_csv(
                os.path.join(output_dir, 'diagnostics_extra.csv'), EXTRA_COLUMNS, series.rows(EXTRA_COLUMNS)
            ),
            'reports': write_json(os.path.join(output_dir, 'reports.json'), {
                'verdict': 'pass' if result.passed else 'fail',
                'failed': result.failed,
                'reports': [report.to_dict() for report in result.reports],
            }),
        }
        snapshots = result.run.snapshots
        for index, snapshot in enumerate(snapshots):
            label = 'final' if index == len(snapshots) - 1 else f'{index:04d}'
            artifacts.update(self._write_snapshot(snapshot.measure, snapshot.t, output_dir, label))

        manifest = {
            'artifact_version': __version__,
            'config': self.config.to_dict(),
            'seed': self.config.seed,
            'solver': self.config.solver,
            'run': {
                'steps': result.run.steps,
                't_final': result.run.final.t,
                'rows': len(series),
                'metadata': series.metadata,
                'flags': result.run.flags,
            },
            'artifacts': {name: os.path.basename(path) for name, path in sorted(artifacts.items())},
            'timestamps': {'created_at': datetime.now(timezone.utc).isoformat()},
        }
        artifacts['manifest'] = write_json(os.path.join(output_dir, 'manifest.json'), manifest)
        return artifacts

    def _write_snapshot(self, measure, t: float, output_dir: str, label: str) -> Dict[str, str]:
        name = f'snapshot_{label}'
        if isinstance(measure, WeightedEnsemble):
            csv_path = write_rows_csv(
                os.path.join(output_dir, f'{name}.csv'), ('x', 'y'), measure.positions.tolist()
            )
            json_path = write_json(os.path.join(output_dir, f'{name}.json'), {
                't': t,
                'mass': measure.mass,
                'weight': measure.weight,
                'n_particles': measure.size,
                'seed': self.config.seed,
                'epsilon': self.config.epsilon,
                'positions': os.path.basename(csv_path),
                'config': self.config.to_dict(),
            })
            return {name: csv_path, f'{name}_manifest': json_path}
        if isinstance(measure, GridDensity):
            bin_path = write_field(os.path.join(output_dir, f'{name}.bin'), measure.values)
            json_path = write_json(os.path.join(output_dir, f'{name}.json'), {
                't': t,
                'L': measure.half_width,
                'n': measure.cells,
                'epsilon': self.config.epsilon,
                'mass': measure.mass,
                'dtype': 'float64 little-endian',
                'layout': 'row-major, values[i, j] with i the x index',
                'values': os.path.basename(bin_path),
                'config': self.config.to_dict(),
            })
            return {name: bin_path, f'{name}_manifest': json_path}
        raise LabError(f"cannot write snapshot of {type(measure).__name__}")

    def sweep(self, axis: str, values: Sequence[float], output_dir: Optional[str] = None) -> SweepResult:
        """
        One run per value of ``axis``; failed runs are recorded and the sweep continues.

        Raises:
            ConfigError: If ``values`` is empty or not strictly monotone, or the axis is invalid
        """
        values = list(values)
        if not values:
            raise ConfigError('sweep.values', "at least one value is required")
        increasing = all(a < b for a, b in zip(values, values[1:]))
        decreasing = all(a > b for a, b in zip(values, values[1:]))
        if not (increasing or decreasing):
            raise ConfigError('sweep.values', f"values must be strictly monotone, got {values}")
        configs = [self.config.with_axis_value(axis, value) for value in values]

        root = ensure_dir(output_dir or self.config.output_dir)
        entries = []
        finished = []
        for value, config in zip(values, configs):
            run_dir = os.path.join(root, sanitize_filename(f'{axis}_{value!r}'))
            logger.info(f"Sweep {axis}={value!r} -> {run_dir}")
            entry: Dict[str, Any] = {'value': value, 'output_dir': os.path.basename(run_dir)}
            try:
                result = Laboratory(config, self.progress).simulate(run_dir)
            except LabError as e:
                logger.error(f"Sweep run {axis}={value!r} failed: {e}")
                entry.update(status='error', error=str(e), exit_code=e.exit_code)
            else:
                entry.update(status='ok', verdict='pass' if result.passed else 'fail',
                             failed=result.failed, metrics=summarize(result.run.series))
                finished.append((config.epsilon, result.run.series))
            entries.append(entry)

        reports = []
        if axis == 'epsilon' and self.config.initial.regime == 'critical' and len(finished) > 1:
            reports = check_logmoment_sweep(finished)
        report_path = write_json(os.path.join(root, 'sweep_report.json'), {
            'axis': axis,
            'values': values,
            'entries': entries,
            'reports': [report.to_dict() for report in reports],
        })
        return SweepResult(axis, entries, reports, report_path)


def summarize(series: DiagnosticSeries) -> Dict[str, Any]:
    """Per-run summary metrics of a sweep."""
    times = series.times
    slope = None
    if len(series) >= 3:
        slope = least_squares_slope(times, series.column('m2'))[0]
    return {
        'm2_slope': slope,
        'd_gamma_integral': trapezoid(series.column('d_gamma'), times),
        'logpair2_integral': trapezoid(series.column('logpair2'), times),
        'h_term_integral': trapezoid(series.column('h_term'), times),
        'final_max_ball_mass': float(series.column('max_ball_mass')[-1]),
        't_final': float(times[-1]),
    }
