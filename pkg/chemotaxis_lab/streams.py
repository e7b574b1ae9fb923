"""
Counter-based random streams.

Every variate is addressed by ``(seed, domain, step, index)``: one Philox block
of four 64-bit words per index. A chunk of indices can be generated by any
worker in any order and the values never change, so runs are reproducible
independently of how the work is split.
"""
import logging
from typing import Tuple

import numpy as np

from .errors import DomainError

# Configure logger
logger = logging.getLogger(__name__)

# Stream domains keep solver noise, initial sampling and property suites apart
STREAM_DOMAINS = {
    'noise': 1,
    'sample': 2,
    'suite': 3,
}

_WORDS_PER_BLOCK = 4
_UNIT = 2.0 ** -53


def stream_key(seed: int, domain: str, step: int) -> np.ndarray:
    """
    Derive the 128-bit Philox key for one (seed, domain, step) stream.

    Args:
        seed (int): Non-negative run seed
        domain (str): One of STREAM_DOMAINS
        step (int): Step or chunk index

    Returns:
        np.ndarray: Two uint64 words
    """
    if seed < 0 or step < 0:
        raise DomainError(f"seed and step must be non-negative, got {seed}, {step}")
    if domain not in STREAM_DOMAINS:
        raise DomainError(f"unknown stream domain: {domain}")
    sequence = np.random.SeedSequence([int(seed), STREAM_DOMAINS[domain], int(step)])
    return sequence.generate_state(2, dtype=np.uint64)


def raw_blocks(seed: int, domain: str, step: int, start: int, count: int) -> np.ndarray:
    """
    Return the raw Philox blocks for indices ``start .. start + count - 1``.

    Row ``i`` of the result depends only on ``(seed, domain, step, start + i)``.
    """
    if count < 0 or start < 0:
        raise DomainError(f"invalid index range start={start} count={count}")
    if count == 0:
        return np.empty((0, _WORDS_PER_BLOCK), dtype=np.uint64)
    bit_generator = np.random.Philox(key=stream_key(seed, domain, step), counter=start)
    raw = bit_generator.random_raw(count * _WORDS_PER_BLOCK)
    return raw.reshape(count, _WORDS_PER_BLOCK)


def to_unit(raw: np.ndarray) -> np.ndarray:
    """Map uint64 words to doubles in the open interval (0, 1)."""
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _UNIT


def uniforms(seed: int, domain: str, step: int, start: int, count: int) -> np.ndarray:
    """One uniform variate in (0, 1) per index."""
    return to_unit(raw_blocks(seed, domain, step, start, count)[:, 0])


def normals_and_uniforms(
    seed: int, domain: str, step: int, start: int, count: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw a standard planar normal and an independent uniform per index.

    Words 0 and 1 of each block feed a Box-Muller transform, word 2 gives
    the uniform.

    Returns:
        Tuple[np.ndarray, np.ndarray]: ``(count, 2)`` normals and ``(count,)`` uniforms
    """
    unit = to_unit(raw_blocks(seed, domain, step, start, count))
    radius = np.sqrt(-2.0 * np.log(unit[:, 0]))
    angle = 2.0 * np.pi * unit[:, 1]
    normal = np.column_stack((radius * np.cos(angle), radius * np.sin(angle)))
    return normal, unit[:, 2]


def normals(seed: int, domain: str, step: int, start: int, count: int) -> np.ndarray:
    """Standard planar normals, shape ``(count, 2)``."""
    return normals_and_uniforms(seed, domain, step, start, count)[0]
