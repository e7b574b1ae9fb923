"""
Registry of nonincreasing radial weights used by the barycentric inequality.
"""
import logging
from typing import Callable, Dict, Tuple

import numpy as np

from .errors import DomainError

logger = logging.getLogger(__name__)


def _inverse_power(r, p):
    return r ** (-p)


def _regularized_inverse_square(r, epsilon):
    return 1.0 / (r * r + epsilon)


def _shifted_power(r, a, gamma):
    return (a + r * r) ** (0.5 * gamma - 1.0)


def _log_inverse_square(r):
    return np.log1p(1.0 / (r * r))


# Each family: (function of r, {param: (low, high, high_inclusive)}, default params)
MONOTONE_FAMILIES: Dict[str, Tuple[Callable, Dict[str, Tuple[float, float, bool]], Dict[str, float]]] = {
    # r -> r^(-p)
    "inverse_power": (_inverse_power, {"p": (0.0, 2.0, True)}, {"p": 1.0}),
    # r -> 1 / (r^2 + eps)
    "regularized_inverse_square": (
        _regularized_inverse_square,
        {"epsilon": (0.0, 1.0, True)},
        {"epsilon": 0.1},
    ),
    # r -> (a + r^2)^(gamma/2 - 1)
    "shifted_power": (
        _shifted_power,
        {"a": (0.0, 1.0, True), "gamma": (0.0, 2.0, False)},
        {"a": 0.1, "gamma": 1.5},
    ),
    # r -> log(1 + 1/r^2)
    "log_inverse_square": (_log_inverse_square, {}, {}),
}


class MonotoneFunction:
    """
    A member of one of the registered nonincreasing families.

    Args:
        family (str): Key of MONOTONE_FAMILIES
        **params: Family parameters; missing ones take the family defaults
    """

    def __init__(self, family: str, **params: float):
        if family not in MONOTONE_FAMILIES:
            raise DomainError(
                f"Unknown monotone family: {family}. "
                f"Available: {', '.join(MONOTONE_FAMILIES)}"
            )
        self.family = family
        function, ranges, defaults = MONOTONE_FAMILIES[family]
        unknown = set(params) - set(ranges)
        if unknown:
            raise DomainError(f"Unknown parameters for {family}: {', '.join(sorted(unknown))}")
        self.params = {**defaults, **{k: float(v) for k, v in params.items()}}
        for name, (low, high, high_inclusive) in ranges.items():
            value = self.params[name]
            inside = low < value <= high if high_inclusive else low < value < high
            if not inside:
                closing = "]" if high_inclusive else ")"
                raise DomainError(f"{family}.{name} must lie in ({low}, {high}{closing}, got {value}")
        self._function = function

    @classmethod
    def from_tag(cls, tag: str) -> "MonotoneFunction":
        """
        Build from a tag such as ``"inverse_power:p=1"`` or ``"log_inverse_square"``.
        """
        family, _, rest = tag.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            name, _, value = item.partition("=")
            try:
                params[name.strip()] = float(value)
            except ValueError:
                raise DomainError(f"Invalid parameter in monotone tag: {item}")
        return cls(family.strip(), **params)

    @property
    def tag(self) -> str:
        if not self.params:
            return self.family
        items = ",".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))
        return f"{self.family}:{items}"

    def __call__(self, r) -> np.ndarray:
        return self._function(np.asarray(r, dtype=np.float64), **self.params)

    def __repr__(self) -> str:
        return f"MonotoneFunction({self.tag!r})"


class FamilyBatch:
    """
    One family member per row: parameter ``k`` of row ``i`` is ``params[k][i]``.

    Calling it on an array whose leading axis has one entry per row evaluates
    each row with its own member.
    """

    def __init__(self, family: str, params: Dict[str, np.ndarray]):
        if family not in MONOTONE_FAMILIES:
            raise DomainError(f"Unknown monotone family: {family}")
        self.family = family
        self.params = {name: np.asarray(value, dtype=np.float64) for name, value in params.items()}
        self._function = MONOTONE_FAMILIES[family][0]

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        trailing = (1,) * (r.ndim - 1)
        params = {name: value.reshape(value.shape + trailing) for name, value in self.params.items()}
        return self._function(r, **params)


def sample_family_batch(family: str, unit: np.ndarray) -> FamilyBatch:
    """
    Map uniforms in (0, 1) to family members: row ``i`` of ``unit`` (shape
    ``(n, k)``, one column per parameter in name order) picks the member of row ``i``.
    """
    if family not in MONOTONE_FAMILIES:
        raise DomainError(f"Unknown monotone family: {family}")
    _, ranges, _ = MONOTONE_FAMILIES[family]
    unit = np.asarray(unit, dtype=np.float64)
    params = {
        name: low + (high - low) * unit[:, column]
        for column, (name, (low, high, _)) in enumerate(sorted(ranges.items()))
    }
    return FamilyBatch(family, params)
