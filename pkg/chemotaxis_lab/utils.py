"""
Utility functions for artifact writing and simple numerical reductions.
"""
import csv
import json
import logging
import math
import os
import re
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

from .errors import DomainError

# Configure logger
logger = logging.getLogger(__name__)


def format_float(value: float) -> str:
    """Shortest round-trip decimal form of a double ('inf', 'nan' for non-finite)."""
    return repr(float(value))


def json_safe(value: Any) -> Any:
    """
    Recursively convert numpy scalars and non-finite floats for JSON output.

    Infinities and NaN become the strings 'inf', '-inf' and 'nan'.
    """
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_safe(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def write_json(path: str, data: Any) -> str:
    """Write ``data`` as sorted, indented JSON and return the path."""
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(json_safe(data), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def write_rows_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    """Write float rows with round-trip formatting."""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) for v in row])
    return path


def read_rows_csv(path: str) -> Tuple[List[str], np.ndarray]:
    """Read a file written by write_rows_csv back into a float array."""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return header, np.array(rows, dtype=np.float64).reshape(len(rows), len(header))


def write_field(path: str, values: np.ndarray) -> str:
    """Write an n x n field as raw little-endian float64, row-major (x index first)."""
    np.ascontiguousarray(values, dtype='<f8').tofile(path)
    return path


def read_field(path: str, cells: int) -> np.ndarray:
    return np.fromfile(path, dtype='<f8').reshape(cells, cells)


def trapezoid(values: Sequence[float], times: Sequence[float]) -> float:
    """Trapezoid-rule integral of sampled values; 0 for a single sample."""
    values = np.asarray(values, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if values.size < 2:
        return 0.0
    return float(integrate.trapezoid(values, times))


def cumulative_trapezoid(values: Sequence[float], times: Sequence[float]) -> np.ndarray:
    """Running trapezoid integrals, starting at 0."""
    return integrate.cumulative_trapezoid(
        np.asarray(values, dtype=np.float64), np.asarray(times, dtype=np.float64), initial=0.0
    )


def least_squares_slope(times: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """
    Least-squares slope of ``values`` against ``times`` with its standard error.

    Raises:
        DomainError: With fewer than three samples
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if times.size < 3:
        raise DomainError(f"a slope fit needs at least 3 samples, got {times.size}")
    fit = stats.linregress(times, values)
    return float(fit.slope), float(fit.stderr)


def sanitize_filename(name: str) -> str:
    """
    Sanitize a filename to ensure it's safe for all operating systems.

    Args:
        name (str): Original filename

    Returns:
        str: Sanitized filename
    """
    sanitized = re.sub(r'[<>:"/\\|?*\s]', '_', name)
    sanitized = sanitized.strip('. ')
    if not sanitized:
        sanitized = 'unnamed'
    return sanitized


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def describe(report_dicts: List[Dict[str, Any]]) -> str:
    """One line per report: PASS/FAIL, name and slack."""
    lines = []
    for report in report_dicts:
        status = 'PASS' if report['pass'] else 'FAIL'
        lines.append(f"{status} {report['name']}: slack={report['slack']}")
    return '\n'.join(lines)
