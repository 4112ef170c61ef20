"""Sampling the limit law of the scaled trimmed statistic.

The limit is ``W = tau_g - d_a I(tau_a > 0) tau_a - d_b I(tau_b < 0) tau_b``
with ``(tau_a, tau_g, tau_b)`` centred Gaussian. When both quantile gaps
``d_a`` and ``d_b`` vanish, W is just ``N(0, sigma_g^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import SeedSpec

__all__ = [
    "LimitParams",
    "psd_factor",
    "sample_triples",
    "sample_limit",
    "normal_limit_cdf",
]

_BLOCK = 2**16


def psd_factor(cov, tol: float = 1e-8) -> np.ndarray:
    """Lower-triangular L with L @ L.T == cov, for PSD (possibly singular) cov.

    Pivoted Cholesky: at each step the largest remaining diagonal entry is
    eliminated; once it drops below ``tol * trace`` the remaining columns
    are left at zero. The result is un-permuted, so it is lower triangular
    only up to the pivot order. Raises ``np.linalg.LinAlgError`` when the
    matrix is not symmetric or is indefinite beyond the tolerance.
    """
    A = np.array(cov, dtype=float)
    d = A.shape[0]
    if A.shape != (d, d) or not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise np.linalg.LinAlgError("covariance must be a symmetric square matrix")
    trace = float(np.trace(A))
    eps = tol * max(trace, 0.0)
    eig_min = float(np.linalg.eigvalsh(A).min()) if d else 0.0
    if eig_min < -max(eps, 1e-300):
        raise np.linalg.LinAlgError(f"matrix is indefinite (min eigenvalue {eig_min:.3g})")
    perm = np.arange(d)
    L = np.zeros((d, d))
    work = A.copy()
    for k in range(d):
        j = k + int(np.argmax(np.diag(work)[k:]))
        piv = work[j, j]
        if piv <= eps or piv <= 0.0:
            break
        if j != k:
            work[[k, j]] = work[[j, k]]
            work[:, [k, j]] = work[:, [j, k]]
            L[[k, j]] = L[[j, k]]
            perm[[k, j]] = perm[[j, k]]
        L[k, k] = math.sqrt(piv)
        L[k + 1:, k] = work[k + 1:, k] / L[k, k]
        work[k + 1:, k + 1:] -= np.outer(L[k + 1:, k], L[k + 1:, k])
    out = np.zeros((d, d))
    out[perm] = L
    return out


@dataclass(frozen=True)
class LimitParams:
    """Covariance of (tau_a, tau_g, tau_b) and the two quantile gaps."""

    cov: np.ndarray
    delta_alpha: float = 0.0
    delta_beta: float = 0.0

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (3, 3):
            raise ValueError("cov must be 3x3, ordered (g_alpha, g, g_beta)")
        if self.delta_alpha < 0 or self.delta_beta < 0:
            raise ValueError("quantile gaps must be nonnegative")
        cov.flags.writeable = False
        object.__setattr__(self, "cov", cov)

    @classmethod
    def from_summary(cls, summary) -> "LimitParams":
        return cls(summary.cov, summary.delta_alpha, summary.delta_beta)


def sample_triples(cov, count: int, seed: SeedSpec) -> np.ndarray:
    """``count`` draws of the Gaussian triple, shape (count, 3).

    Draws come in fixed blocks, each from its own child stream, so the
    output never depends on how blocks are scheduled.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    L = psd_factor(cov)
    out = np.empty((count, 3))
    for k, start in enumerate(range(0, count, _BLOCK)):
        c = min(_BLOCK, count - start)
        z = seed.child(k).generator().standard_normal((c, 3))
        out[start:start + c] = z @ L.T
    return out


def limit_from_triples(triples: np.ndarray, delta_alpha: float, delta_beta: float) -> np.ndarray:
    ta, tg, tb = triples[:, 0], triples[:, 1], triples[:, 2]
    return tg - delta_alpha * (ta > 0) * ta - delta_beta * (tb < 0) * tb


def sample_limit(params: LimitParams, count: int, seed: SeedSpec) -> np.ndarray:
    """``count`` i.i.d. draws of the limit variable W."""
    return limit_from_triples(sample_triples(params.cov, count, seed),
                              params.delta_alpha, params.delta_beta)


def normal_limit_cdf(sigma_g: float, w: float) -> float:
    """Phi(w / sigma_g), the limit CDF when both quantile gaps vanish."""
    if not sigma_g > 0:
        raise ValueError(f"sigma_g must be positive, got {sigma_g}")
    return 0.5 * math.erfc(-w / (sigma_g * math.sqrt(2.0)))
