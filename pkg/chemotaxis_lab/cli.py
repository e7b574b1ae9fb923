"""
Command-line interface for chemotaxis-lab.
"""
import argparse
import logging
import sys
from typing import List, Optional

from . import __version__
from .config import SWEEP_AXES
from .errors import ConfigError, DiagnosticFailure, LabError
from .kernels import set_bound_checks
from .laboratory import Laboratory
from .suites import run_suite, suite_names
from .utils import describe

# Configure logger
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--verbose', '-v',
        action='store_true',
        help='Enable verbose output'
    )
    parser.add_argument(
        '--check-bounds',
        action='store_true',
        help='Assert the certified kernel and drift bounds while running'
    )


def parse_args(args: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse command-line arguments.

    Args:
        args (Optional[List[str]]): Command-line arguments

    Returns:
        argparse.Namespace: Parsed arguments
    """
    parser = argparse.ArgumentParser(
        description='Simulate the regularized Keller-Segel model and check its a priori estimates',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
Examples:
  chemotaxis-lab simulate configs/subcritical_grid.json
  chemotaxis-lab check geometry --samples 1000000 --seed 7
  chemotaxis-lab sweep configs/critical_particles.json --axis epsilon --values 0.1,0.05,0.025
'''
    )

    parser.add_argument(
        '--version',
        action='version',
        version=f'%(prog)s {__version__}'
    )

    subparsers = parser.add_subparsers(dest='command', help='Command to execute')
    subparsers.required = True

    # 'simulate' runs one configuration
    simulate_parser = subparsers.add_parser(
        'simulate',
        help='Run one configuration and check its trajectory'
    )
    simulate_parser.add_argument(
        'config',
        help='JSON run configuration'
    )
    simulate_parser.add_argument(
        '--output-dir', '-o',
        help='Override the configured output directory'
    )
    simulate_parser.add_argument(
        '--progress',
        action='store_true',
        help='Show a progress bar while stepping'
    )
    _add_common_options(simulate_parser)

    # 'check' runs a randomized property suite
    check_parser = subparsers.add_parser(
        'check',
        help='Run a randomized property suite'
    )
    check_parser.add_argument(
        'suite',
        choices=suite_names(),
        help='Property suite to run'
    )
    check_parser.add_argument(
        '--samples',
        type=int,
        default=100000,
        help='Number of random samples per property (default: 100000)'
    )
    check_parser.add_argument(
        '--seed',
        type=int,
        default=0,
        help='Seed of the sample stream (default: 0)'
    )
    check_parser.add_argument(
        '--progress',
        action='store_true',
        help='Show a progress bar per property'
    )
    _add_common_options(check_parser)

    # 'sweep' runs one configuration per axis value
    sweep_parser = subparsers.add_parser(
        'sweep',
        help='Run a configuration over a list of parameter values'
    )
    sweep_parser.add_argument(
        'config',
        help='JSON run configuration'
    )
    sweep_parser.add_argument(
        '--axis',
        required=True,
        choices=list(SWEEP_AXES),
        help='Parameter to sweep'
    )
    sweep_parser.add_argument(
        '--values',
        required=True,
        help='Comma-separated, strictly monotone parameter values'
    )
    sweep_parser.add_argument(
        '--output-dir', '-o',
        help='Override the configured output directory'
    )
    sweep_parser.add_argument(
        '--progress',
        action='store_true',
        help='Show a progress bar while stepping'
    )
    _add_common_options(sweep_parser)

    return parser.parse_args(args)


def parse_values(text: str) -> List[float]:
    """
    Parse a comma-separated list of numbers.

    Raises:
        ConfigError: If an item is not a number or the list is empty
    """
    values = []
    for item in text.split(','):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(float(item))
        except ValueError:
            raise ConfigError('sweep.values', f"not a number: {item!r}")
    if not values:
        raise ConfigError('sweep.values', "at least one value is required")
    return values


def simulate_config(args: argparse.Namespace) -> int:
    """
    Run one configuration.

    Args:
        args (argparse.Namespace): Parsed arguments

    Returns:
        int: Exit code
    """
    laboratory = Laboratory.from_file(args.config, progress=args.progress)
    result = laboratory.simulate(args.output_dir)
    print(describe([report.to_dict() for report in result.reports]))
    if not result.passed:
        raise DiagnosticFailure(result.failed)
    logger.info(f"All {len(result.reports)} checks passed")
    return EXIT_OK


def check_suite(args: argparse.Namespace) -> int:
    """
    Run a property suite and print one line per property.

    Args:
        args (argparse.Namespace): Parsed arguments

    Returns:
        int: Exit code
    """
    logger.info(f"Running suite {args.suite} with {args.samples} samples, seed {args.seed}")
    results = run_suite(args.suite, args.samples, args.seed, progress=args.progress)
    for result in results:
        status = 'PASS' if result.passed else 'FAIL'
        print(f"{status} {result.name}: worst_slack={result.worst_slack!r} samples={result.samples}")
    failed = [result.name for result in results if not result.passed]
    if failed:
        raise DiagnosticFailure(failed)
    return EXIT_OK


def sweep_config(args: argparse.Namespace) -> int:
    """
    Run one configuration per value of the swept axis.

    Runs that fail are recorded in the sweep report and the sweep continues;
    the exit code is the most severe one among the runs.

    Args:
        args (argparse.Namespace): Parsed arguments

    Returns:
        int: Exit code
    """
    values = parse_values(args.values)
    laboratory = Laboratory.from_file(args.config, progress=args.progress)
    sweep = laboratory.sweep(args.axis, values, args.output_dir)
    logger.info(f"Sweep report written to {sweep.report_path}")

    for entry in sweep.entries:
        if entry['status'] == 'error':
            print(f"ERROR {args.axis}={entry['value']!r}: {entry['error']}")
        else:
            print(f"{entry['verdict'].upper()} {args.axis}={entry['value']!r}: m2_slope={entry['metrics']['m2_slope']!r}")
    if sweep.reports:
        print(describe([report.to_dict() for report in sweep.reports]))

    codes = [entry['exit_code'] for entry in sweep.errors]
    if sweep.failed:
        codes.append(DiagnosticFailure.exit_code)
    return max(codes, default=EXIT_OK)


COMMANDS = {
    'simulate': simulate_config,
    'check': check_suite,
    'sweep': sweep_config,
}


def main(args: Optional[List[str]] = None) -> int:
    """
    Main entry point for the CLI.

    Args:
        args (Optional[List[str]]): Command-line arguments

    Returns:
        int: Exit code
    """
    try:
        parsed_args = parse_args(args)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help / --version
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    if parsed_args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    if parsed_args.check_bounds:
        set_bound_checks(True)

    try:
        return COMMANDS[parsed_args.command](parsed_args)
    except LabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        if parsed_args.verbose:
            import traceback
            traceback.print_exc()
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        if parsed_args.verbose:
            import traceback
            traceback.print_exc()
        return 1


if __name__ == '__main__':
    sys.exit(main())
