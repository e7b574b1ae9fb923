"""
Shared run loop for the particle and grid solvers.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from tqdm import tqdm

from .diagnostics import DiagnosticSeries, DiagnosticSettings, measure_row
from .initial_data import InitialMeasure
from .measures import BaseMeasure

# Configure logger
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Snapshot:
    t: float
    measure: BaseMeasure


@dataclass
class SolverRun:
    """
    Result of a solver run.

    Attributes:
        series (DiagnosticSeries): Sampled functionals
        snapshots (List[Snapshot]): Initial, periodic and final states
        flags (Dict[str, Any]): Solver-specific warnings (box truncation, resolution)
        steps (int): Number of time steps taken
        history (List[Snapshot]): Every state, when the solver was asked to keep them
    """

    series: DiagnosticSeries
    snapshots: List[Snapshot]
    flags: Dict[str, Any] = field(default_factory=dict)
    steps: int = 0
    history: List[Snapshot] = field(default_factory=list)

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]


class BaseSolver(ABC):
    """
    Base abstract class for time-stepping solvers.

    Subclasses provide the state, the step size rule and one time step; the
    base class owns sampling, snapshots and progress reporting.
    """

    solver_name = 'base'

    def __init__(
        self,
        f0: InitialMeasure,
        epsilon: float,
        T: float,
        settings: Optional[DiagnosticSettings] = None,
        sample_every: int = 1,
        snapshot_every: int = 0,
        progress: bool = False,
    ):
        """
        Args:
            f0 (InitialMeasure): Initial measure before mollification
            epsilon (float): Regularization in (0, 1]
            T (float): Final time
            settings (Optional[DiagnosticSettings]): Sampled functional parameters
            sample_every (int): Steps between diagnostic rows
            snapshot_every (int): Steps between stored snapshots, 0 for none
            progress (bool): Show a progress bar
        """
        self.f0 = f0
        self.epsilon = epsilon
        self.T = T
        self.settings = settings or DiagnosticSettings()
        self.sample_every = sample_every
        self.snapshot_every = snapshot_every
        self.progress = progress
        self.flags: Dict[str, Any] = {}
        self.history: List[Snapshot] = []

    @property
    @abstractmethod
    def measure(self) -> BaseMeasure:
        """Current state as a measure."""

    @property
    @abstractmethod
    def time(self) -> float:
        """Current time."""

    @abstractmethod
    def finished(self) -> bool:
        """True once the final time is reached."""

    @abstractmethod
    def next_dt(self) -> float:
        """Size of the next step."""

    @abstractmethod
    def advance(self, dt: float) -> None:
        """Advance the state by one step of size ``dt``."""

    def metadata(self) -> Dict[str, Any]:
        return {
            'solver': self.solver_name,
            'gamma': self.settings.gamma,
            'nu': self.settings.nu,
            'epsilon': self.epsilon,
            'mass': self.f0.mass,
            'T': self.T,
        }

    def on_sample(self, row: Dict[str, float]) -> None:
        """Hook called after every diagnostic row."""

    def sample(self, series: DiagnosticSeries) -> None:
        row = measure_row(self.measure, self.time, self.epsilon, self.settings)
        logger.debug(f"t={row['t']:.6g} m2={row['m2']:.6g} max_ball_mass={row['max_ball_mass']:.6g}")
        series.append(row)
        self.on_sample(row)

    def run(self) -> SolverRun:
        """
        Step to the final time, sampling every ``sample_every`` steps and at the end.

        Returns:
            SolverRun: Series, snapshots and flags
        """
        series = DiagnosticSeries(self.metadata())
        self.sample(series)
        snapshots = [Snapshot(self.time, self.measure)]
        steps = 0
        with tqdm(total=self.T, disable=not self.progress, desc=self.solver_name, unit='t') as bar:
            while not self.finished():
                dt = self.next_dt()
                self.advance(dt)
                steps += 1
                bar.update(dt)
                done = self.finished()
                if done or steps % self.sample_every == 0:
                    self.sample(series)
                if done or (self.snapshot_every and steps % self.snapshot_every == 0):
                    snapshots.append(Snapshot(self.time, self.measure))
        logger.info(f"{self.solver_name} run finished at t={self.time:.6g} after {steps} steps")
        return SolverRun(series, snapshots, dict(self.flags), steps, self.history)
