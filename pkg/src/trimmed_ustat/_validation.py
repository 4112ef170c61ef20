"""Input validation helpers shared by the public API and the CLI."""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import numpy as np


class DegenerateTrimError(ValueError):
    """Raised when a trim leaves no kernel values (N_beta == N_alpha)."""


class ConfigurationError(ValueError):
    """Raised when a requested computation has no available method."""


def as_fraction(x) -> Fraction:
    """Convert a level to an exact rational.

    Floats go through their shortest decimal repr, so ``0.1`` becomes
    ``1/10`` rather than the binary approximation. Strings are parsed as
    decimals.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("boolean is not a valid level")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        if not np.isfinite(x):
            raise ValueError(f"level must be finite, got {x!r}")
        return Fraction(repr(float(x)))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError:
            raise ValueError(f"cannot parse {x!r} as a decimal level") from None
    raise TypeError(f"unsupported level type {type(x).__name__}")


def floor_mul(gamma: Fraction, N: int) -> int:
    """Exact floor(gamma * N)."""
    return (gamma.numerator * N) // gamma.denominator


def ceil_mul(gamma: Fraction, N: int) -> int:
    """Exact ceil(gamma * N), written as -floor(-gamma * N)."""
    return -((-gamma.numerator * N) // gamma.denominator)


def check_sample(x, min_size: int = 1) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        x = x.ravel()
    if x.size < min_size:
        raise ValueError(f"sample size {x.size} is smaller than the kernel arity {min_size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def check_level(gamma, name: str = "gamma") -> Fraction:
    g = as_fraction(gamma)
    if not 0 < g < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {gamma}")
    return g
