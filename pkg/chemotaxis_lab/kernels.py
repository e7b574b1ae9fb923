"""
The attraction kernel K and its regularization K_eps.

All functions are vectorized over a trailing axis of length 2: ``z`` may be a
single point ``(2,)`` or any array of points ``(..., 2)``.
"""
import logging
import os
from dataclasses import dataclass

import numpy as np

from .errors import BoundViolationError, DomainError

# Configure logger
logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
GAP_IDENTITY_TOLERANCE = 1e-14

_check_bounds = os.environ.get('CHEMOTAXIS_LAB_CHECK_BOUNDS', '') == '1'


def set_bound_checks(enabled: bool) -> None:
    """Enable or disable the runtime assertions on kernel and drift bounds."""
    global _check_bounds
    _check_bounds = bool(enabled)
    logger.debug(f"Kernel bound checks {'enabled' if enabled else 'disabled'}")


def bound_checks_enabled() -> bool:
    return _check_bounds


@dataclass(frozen=True)
class KernelParams:
    """
    Regularization parameter of K_eps.

    ``epsilon = 0`` is accepted only for pointwise evaluation of the singular
    kernel K; dynamics always use ``0 < epsilon <= 1``.
    """

    epsilon: float

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and 0.0 <= self.epsilon <= 1.0):
            raise DomainError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    @property
    def regularized(self) -> bool:
        return self.epsilon > 0.0

    def norm_bound(self) -> float:
        """Sup of ||K_eps|| over the plane."""
        return kernel_norm_bound(self.epsilon)


def require_epsilon(epsilon: float) -> float:
    """Validate a regularization parameter for dynamics, returning it as float."""
    epsilon = float(epsilon)
    if not (np.isfinite(epsilon) and 0.0 < epsilon <= 1.0):
        raise DomainError(f"epsilon must lie in (0, 1], got {epsilon}")
    return epsilon


def kernel_norm_bound(epsilon: float) -> float:
    """Return 1/(4 pi sqrt(eps)), attained at ||z|| = sqrt(eps)."""
    return 1.0 / (4.0 * np.pi * np.sqrt(require_epsilon(epsilon)))


def _squared_norm(z: np.ndarray) -> np.ndarray:
    return z[..., 0] * z[..., 0] + z[..., 1] * z[..., 1]


def eval_K(z) -> np.ndarray:
    """
    Evaluate K(z) = -z / (2 pi ||z||^2) with the convention K(0) = 0.

    Args:
        z (array_like): Point(s) of shape (..., 2)

    Returns:
        np.ndarray: Kernel values, same shape as ``z``
    """
    z = np.asarray(z, dtype=np.float64)
    r2 = _squared_norm(z)
    out = np.zeros_like(z)
    nonzero = r2 > 0.0
    out[nonzero] = -z[nonzero] / (TWO_PI * r2[nonzero])[..., None]
    return out


def eval_K_eps(z, epsilon: float) -> np.ndarray:
    """
    Evaluate K_eps(z) = -z / (2 pi (||z||^2 + eps)).

    Args:
        z (array_like): Point(s) of shape (..., 2)
        epsilon (float): Regularization in (0, 1]

    Returns:
        np.ndarray: Kernel values, same shape as ``z``

    Raises:
        DomainError: If epsilon is outside (0, 1]
        BoundViolationError: If bound checks are enabled and a value escapes
            the certified bounds
    """
    epsilon = require_epsilon(epsilon)
    z = np.asarray(z, dtype=np.float64)
    r2 = _squared_norm(z)
    out = -z / (TWO_PI * (r2 + epsilon))[..., None]
    if _check_bounds:
        _assert_kernel_bounds(out, r2, epsilon)
    return out


def _assert_kernel_bounds(values: np.ndarray, r2: np.ndarray, epsilon: float) -> None:
    norm = np.sqrt(_squared_norm(values))
    if np.any(norm > kernel_norm_bound(epsilon) * (1.0 + 1e-12)):
        raise BoundViolationError(
            f"||K_eps|| reached {norm.max():.17g}, bound is {kernel_norm_bound(epsilon):.17g}"
        )
    scaled = np.sqrt(r2) * norm
    if np.any(scaled > 1.0 / TWO_PI + 1e-15):
        raise BoundViolationError(f"||z|| ||K_eps(z)|| reached {scaled.max():.17g}")


def kernel_gap(z, epsilon: float) -> np.ndarray:
    """
    Return ||z|| * ||K(z) - K_eps(z)|| and verify its closed form.

    The closed form is eps / (2 pi (eps + ||z||^2)); the two must agree to
    GAP_IDENTITY_TOLERANCE.

    Raises:
        DomainError: If any z is the origin or epsilon is outside (0, 1]
        BoundViolationError: If the measured gap departs from the closed form
    """
    epsilon = require_epsilon(epsilon)
    z = np.asarray(z, dtype=np.float64)
    r2 = _squared_norm(z)
    if np.any(r2 == 0.0):
        raise DomainError("kernel_gap is undefined at z = 0")
    difference = eval_K(z) - eval_K_eps(z, epsilon)
    gap = np.sqrt(r2) * np.sqrt(_squared_norm(difference))
    closed_form = gap_closed_form(r2, epsilon)
    mismatch = np.max(np.abs(gap - closed_form))
    if mismatch > GAP_IDENTITY_TOLERANCE:
        raise BoundViolationError(f"kernel gap departs from its closed form by {mismatch:.3e}")
    return gap


def gap_closed_form(r2, epsilon: float) -> np.ndarray:
    """eps / (2 pi (eps + r2)) for squared norms ``r2``."""
    return epsilon / (TWO_PI * (epsilon + np.asarray(r2, dtype=np.float64)))


def gap_bound_inverse_square(r2, epsilon: float) -> np.ndarray:
    """min(1, eps / r2) / (2 pi)."""
    r2 = np.asarray(r2, dtype=np.float64)
    return np.minimum(1.0, epsilon / r2) / TWO_PI


def gap_bound_power(r2, epsilon: float, gamma: float) -> np.ndarray:
    """eps^(1 - gamma/2) ||z||^(gamma - 2) / (2 pi) for gamma in (0, 2)."""
    if not 0.0 < gamma < 2.0:
        raise DomainError(f"gamma must lie in (0, 2), got {gamma}")
    r2 = np.asarray(r2, dtype=np.float64)
    return epsilon ** (1.0 - gamma / 2.0) * r2 ** (gamma / 2.0 - 1.0) / TWO_PI


def gap_bound_logarithmic(r2, epsilon: float) -> np.ndarray:
    """log(1 + 1/r2) / (2 pi log(1 + 1/eps))."""
    r2 = np.asarray(r2, dtype=np.float64)
    return np.log1p(1.0 / r2) / (TWO_PI * np.log1p(1.0 / epsilon))
