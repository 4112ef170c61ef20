"""Population quantities for a (model, kernel) pair.

For the maximum kernel (and the identity kernel, its ``m = 1`` case) the
kernel distribution is ``H_F = F^m`` and every conditional expectation is a
one-dimensional Stieltjes integral against ``F^{m-1}``; these are evaluated
by Gauss-Legendre quadrature split at every knot and jump, which is exact up
to rounding for the built-in piecewise-linear models. Any kernel can instead
use nested Monte Carlo, with the kernel distribution replaced by a large
reference sample when no closed form exists.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import ConfigurationError, check_level
from .empirical import TrimSpec
from .kernels import DataModel, Kernel, SeedSpec

__all__ = [
    "KernelDistribution",
    "QuantileBracket",
    "PopulationContext",
    "PopulationSummary",
    "DegeneracyWarning",
    "kernel_distribution",
    "pop_quantiles",
    "theta",
    "population_context",
    "covariance_matrix",
    "population_summary",
    "example_moments",
]

ANALYTIC_KERNELS = ("identity", "max_m")
_CHUNK = 2**16


class DegeneracyWarning(UserWarning):
    """sigma_g^2 is not distinguishable from zero; the limit theorem needs it positive."""


@dataclass(frozen=True)
class KernelDistribution:
    """Distribution function H_F of h(X_1, ..., X_m).

    ``source`` is ``"analytic"`` (``H_F = F^m``) or ``"empirical"`` (the
    inclusive-``<=`` ECDF of ``reference``, a sorted sample of kernel draws).
    """

    source: str
    model: DataModel
    kernel: Kernel
    reference: np.ndarray | None = field(default=None, repr=False)

    def hf(self, t):
        if self.source == "analytic":
            return self.model.cdf(t) ** self.kernel.arity
        return np.searchsorted(self.reference, t, side="right") / self.reference.size

    def hf_left(self, t):
        if self.source == "analytic":
            return self.model.cdf_left(t) ** self.kernel.arity
        return np.searchsorted(self.reference, t, side="left") / self.reference.size


def _kernel_draws(model, kernel, size, seed):
    out = []
    for k, start in enumerate(range(0, size, _CHUNK)):
        c = min(_CHUNK, size - start)
        u = seed.child(k).generator().random((c, kernel.arity))
        out.append(kernel(model.inverse_cdf(u)))
    return np.concatenate(out)


def kernel_distribution(model: DataModel, kernel: Kernel, calibration: dict | None = None,
                        empirical: bool = False) -> KernelDistribution:
    """Closed-form H_F where one exists, else an empirical surrogate.

    ``calibration`` is ``{"size": int, "seed": SeedSpec}``; ``size`` must be
    at least 10**6. ``empirical=True`` forces the surrogate even when a
    closed form exists, which is useful for cross-checking.
    """
    if kernel.name in ANALYTIC_KERNELS and not empirical:
        return KernelDistribution("analytic", model, kernel)
    if calibration is None:
        raise ConfigurationError(
            f"no closed-form H_F for kernel {kernel.name!r}; a calibration spec is required"
        )
    size = int(calibration.get("size", 10**6))
    if size < 10**6:
        raise ValueError(f"calibration size must be >= 10**6, got {size}")
    seed = calibration["seed"]
    ref = np.sort(_kernel_draws(model, kernel, size, seed), kind="stable")
    ref.flags.writeable = False
    return KernelDistribution("empirical", model, kernel, ref)


@dataclass(frozen=True)
class QuantileBracket:
    gamma: float
    xi_minus: float
    xi_plus: float
    level_at_minus: float
    level_before_plus: float

    @property
    def delta(self) -> float:
        return self.xi_plus - self.xi_minus


def _bisect(pred, lo, hi, tol):
    # pred(lo) is False, pred(hi) is True; returns the boundary within tol
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def pop_quantiles(dist: KernelDistribution, gamma, method: str = "auto", tol: float = 1e-12) -> QuantileBracket:
    """Smallest and largest gamma-quantiles of H_F.

    ``xi_minus = inf{x : H_F(x) >= gamma}``, ``xi_plus = sup{x : H_F(x) <= gamma}``.
    ``method="auto"`` uses exact inverses for analytic sources and order
    statistics for empirical ones; ``"bisect"`` runs monotone bisection on
    ``H_F`` itself.
    """
    g = float(check_level(gamma))
    if method == "auto" and dist.source == "analytic":
        p = g ** (1.0 / dist.kernel.arity)
        xm = float(dist.model.inverse_cdf(p))
        xp = float(dist.model.upper_inverse(p))
    elif method == "auto":
        ref = dist.reference
        K = ref.size
        xm = float(ref[math.ceil(g * K) - 1])
        xp = float(ref[math.floor(g * K)])
    elif method == "bisect":
        lo, hi = dist.model.support
        lo, hi = lo - 1.0, hi + 1.0
        # F^m on a flat piece is only gamma up to rounding, so compare levels with slack
        slack = 1e-13
        _, xm = _bisect(lambda x: dist.hf(x) >= g - slack, lo, hi, tol)
        xp, _ = _bisect(lambda x: dist.hf(x) > g + slack, lo, hi, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return QuantileBracket(g, xm, xp, float(dist.hf(xm)), float(dist.hf_left(xp)))


def theta(dist: KernelDistribution, trim: TrimSpec, bracket_alpha: QuantileBracket,
          bracket_beta: QuantileBracket) -> tuple[float, float]:
    """Centering functional and its Monte Carlo standard error (0 if exact).

    Analytic sources use the equivalent form
    ``E[h I{xi+_a <= h <= xi-_b}] - xi-_b (H(xi-_b) - b) + xi+_a (H(xi+_a -) - a)``;
    empirical ones average the defining integrand over the reference draws.
    """
    a, b = bracket_alpha.xi_plus, bracket_beta.xi_minus
    alpha, beta = float(trim.alpha), float(trim.beta)
    if dist.source == "analytic":
        m = dist.kernel.arity
        core = dist.model.expect_max(lambda y: y, m, lo=a, hi=b, cuts=(a, b))
        th_a = float(dist.hf_left(a))
        th_b = float(dist.hf(b))
        return core - b * (th_b - beta) + a * (th_a - alpha), 0.0
    h = dist.reference
    integrand = ((h - b) * (h <= b) + beta * b) - ((h - a) * (h < a) + alpha * a)
    return float(integrand.mean()), float(integrand.std(ddof=1) / math.sqrt(h.size))


@dataclass(frozen=True)
class PopulationContext:
    """Fixed constants that define g, g_alpha and g_beta for one trim."""

    dist: KernelDistribution
    trim: TrimSpec
    bracket_alpha: QuantileBracket
    bracket_beta: QuantileBracket
    theta: float
    theta_se: float
    theta_alpha: float
    theta_beta: float
    core: float

    @property
    def bound(self) -> float:
        return 4.0 * (abs(self.bracket_alpha.xi_plus) + abs(self.bracket_beta.xi_minus))

    def _require_analytic(self):
        if self.dist.source != "analytic":
            raise ConfigurationError("closed-form g functions need an analytic kernel distribution")

    def g_alpha_eval(self, x):
        self._require_analytic()
        x = np.asarray(x, dtype=float)
        a = self.bracket_alpha.xi_plus
        q = self.dist.kernel.arity - 1
        return (x < a) * float(self.dist.model.cdf_left(a)) ** q - self.theta_alpha

    def g_beta_eval(self, x):
        self._require_analytic()
        x = np.asarray(x, dtype=float)
        b = self.bracket_beta.xi_minus
        q = self.dist.kernel.arity - 1
        return (x <= b) * float(self.dist.model.cdf(b)) ** q - self.theta_beta

    def g_core_eval(self, x):
        """E[h I{xi+_a <= h <= xi-_b} | X_1 = x] minus its mean."""
        self._require_analytic()
        x = np.asarray(x, dtype=float)
        a, b = self.bracket_alpha.xi_plus, self.bracket_beta.xi_minus
        model = self.dist.model
        q = self.dist.kernel.arity - 1
        if q == 0:
            return x * ((x >= a) & (x <= b)) - self.core
        own = x * ((x >= a) & (x <= b)) * model.cdf(x) ** q
        tail = model.expect_max(lambda y: y, q, lo=np.maximum(x, a), hi=b,
                                lo_open=x >= a, cuts=(a, b))
        return own + tail - self.core

    def g_eval(self, x):
        a, b = self.bracket_alpha.xi_plus, self.bracket_beta.xi_minus
        out = self.g_core_eval(x) + a * self.g_alpha_eval(x) - b * self.g_beta_eval(x)
        if np.any(np.abs(out) > self.bound * (1 + 1e-12)):
            raise ArithmeticError("g exceeds its a priori bound 4(|xi+_a| + |xi-_b|)")
        return out

    def projections(self, x) -> np.ndarray:
        """Stack (g_alpha, g, g_beta) along a new last axis."""
        return np.stack([self.g_alpha_eval(x), self.g_eval(x), self.g_beta_eval(x)], axis=-1)


def population_context(dist: KernelDistribution, trim: TrimSpec) -> PopulationContext:
    ba = pop_quantiles(dist, trim.alpha)
    bb = pop_quantiles(dist, trim.beta)
    th, se = theta(dist, trim, ba, bb)
    a, b = ba.xi_plus, bb.xi_minus
    if dist.source == "analytic":
        core = dist.model.expect_max(lambda y: y, dist.kernel.arity, lo=a, hi=b, cuts=(a, b))
    else:
        h = dist.reference
        core = float(np.mean(h * ((h >= a) & (h <= b))))
    return PopulationContext(
        dist, trim, ba, bb, th, se,
        theta_alpha=float(dist.hf_left(a)),
        theta_beta=float(dist.hf(b)),
        core=core,
    )


def _analytic_moments(ctx: PopulationContext):
    a, b = ctx.bracket_alpha.xi_plus, ctx.bracket_beta.xi_minus
    model = ctx.dist.model
    cov = np.empty((3, 3))
    for r in range(3):
        for s in range(r, 3):
            cov[r, s] = cov[s, r] = model.expect_max(
                lambda x: (lambda p: p[..., r] * p[..., s])(ctx.projections(x)), 1, cuts=(a, b)
            )
    means = np.array([
        model.expect_max(lambda x: ctx.projections(x)[..., r], 1, cuts=(a, b)) for r in range(3)
    ])
    return cov, means


def _nested_mc_moments(ctx: PopulationContext, k_outer: int, k_inner: int, seed: SeedSpec):
    """Unbiased nested-MC second moments of (g_alpha, g, g_beta).

    Each inner draw gives an unbiased single-sample version of the three
    projections at the outer point; products use the off-diagonal pairs of
    the inner sample (the U-statistic of order two), which removes the
    O(1/k_inner) bias a squared inner mean would carry.
    """
    model, kernel = ctx.dist.model, ctx.dist.kernel
    m = kernel.arity
    a, b = ctx.bracket_alpha.xi_plus, ctx.bracket_beta.xi_minus
    consts = np.array([ctx.theta_alpha, ctx.core, ctx.theta_beta])
    if m > 1 and k_inner < 2:
        raise ValueError("k_inner must be >= 2")
    x_all = model.inverse_cdf(seed.child(0).generator().random(k_outer))
    prods, firsts = [], []
    chunk = max(1, _CHUNK * 16 // max(k_inner * m, 1))
    for k, start in enumerate(range(0, k_outer, chunk)):
        x = x_all[start:start + chunk]
        c = x.size
        if m == 1:
            h = kernel(x[:, None])[:, None]
        else:
            inner = model.inverse_cdf(seed.child(1).child(k).generator().random((c, k_inner, m - 1)))
            pts = np.concatenate([np.broadcast_to(x[:, None, None], (c, k_inner, 1)), inner], axis=-1)
            h = kernel(pts)
        ia = (h < a).astype(float)
        ib = (h <= b).astype(float)
        core = h * ((h >= a) & (h <= b))
        v = np.stack([ia, core, ib], axis=-1) - consts
        v[..., 1] += a * v[..., 0] - b * v[..., 2]
        S = v.sum(axis=1)
        if m == 1:
            P = S[:, :, None] * S[:, None, :]
            first = S
        else:
            diag = np.einsum("ckr,cks->crs", v, v)
            P = (S[:, :, None] * S[:, None, :] - diag) / (k_inner * (k_inner - 1))
            first = S / k_inner
        prods.append(P)
        firsts.append(first)
    P = np.concatenate(prods)
    F = np.concatenate(firsts)
    cov = P.mean(axis=0)
    cov = 0.5 * (cov + cov.T)
    se = P.std(axis=0, ddof=1) / math.sqrt(k_outer)
    return cov, se, F.mean(axis=0), F.std(axis=0, ddof=1) / math.sqrt(k_outer)


def covariance_matrix(ctx: PopulationContext, method: str = "analytic", k_outer: int = 10**5,
                      k_inner: int = 10**3, seed: SeedSpec | None = None):
    """Second-moment matrix of (g_alpha(X), g(X), g_beta(X)).

    Returns ``(cov, cov_se, means, means_se)``; the standard errors are
    zero for the analytic method. Warns with :class:`DegeneracyWarning`
    when sigma_g^2 is not clearly positive.
    """
    if method == "analytic":
        cov, means = _analytic_moments(ctx)
        cov_se, means_se = np.zeros((3, 3)), np.zeros(3)
        degenerate = cov[1, 1] <= 1e-14
    elif method == "monte-carlo":
        if seed is None:
            raise ValueError("monte-carlo covariance needs a seed")
        cov, cov_se, means, means_se = _nested_mc_moments(ctx, int(k_outer), int(k_inner), seed)
        degenerate = cov[1, 1] <= 4 * cov_se[1, 1]
    else:
        raise ValueError(f"unknown method {method!r}")
    if degenerate:
        warnings.warn("sigma_g^2 is not positive; the limit law degenerates", DegeneracyWarning,
                      stacklevel=2)
    return cov, cov_se, means, means_se


@dataclass(frozen=True)
class PopulationSummary:
    theta: float
    theta_alpha: float
    theta_beta: float
    cov: np.ndarray
    bracket_alpha: QuantileBracket
    bracket_beta: QuantileBracket
    method: str
    method_params: dict = field(default_factory=dict)
    cov_se: np.ndarray | None = None
    theta_se: float = 0.0

    @property
    def sigma_g2(self) -> float:
        return float(self.cov[1, 1])

    @property
    def delta_alpha(self) -> float:
        return self.bracket_alpha.delta

    @property
    def delta_beta(self) -> float:
        return self.bracket_beta.delta

    @property
    def gaussian_limit(self) -> bool:
        """True when the quantile function is continuous at both trim levels."""
        return self.delta_alpha == 0 and self.delta_beta == 0

    def to_dict(self) -> dict:
        se = None
        if self.cov_se is not None:
            se = {"theta": self.theta_se, "cov": [float(v) for v in np.ravel(self.cov_se)]}
        return {
            "theta": self.theta,
            "theta_alpha": self.theta_alpha,
            "theta_beta": self.theta_beta,
            "cov": [float(v) for v in np.ravel(self.cov)],
            "xi_minus_alpha": self.bracket_alpha.xi_minus,
            "xi_plus_alpha": self.bracket_alpha.xi_plus,
            "xi_minus_beta": self.bracket_beta.xi_minus,
            "xi_plus_beta": self.bracket_beta.xi_plus,
            "delta_alpha": self.delta_alpha,
            "delta_beta": self.delta_beta,
            "method": self.method,
            "method_params": self.method_params,
            "standard_errors": se,
        }


def population_summary(model: DataModel, kernel: Kernel, trim: TrimSpec, method: str = "analytic",
                       k_outer: int = 10**5, k_inner: int = 10**3, seed: SeedSpec | None = None,
                       calibration: dict | None = None) -> PopulationSummary:
    """Compute theta, the covariance matrix and the brackets in one call."""
    dist = kernel_distribution(model, kernel, calibration)
    if method == "analytic" and dist.source != "analytic":
        raise ConfigurationError(
            f"kernel {kernel.name!r} has no closed form; use method='monte-carlo'"
        )
    ctx = population_context(dist, trim)
    cov, cov_se, _, _ = covariance_matrix(ctx, method, k_outer, k_inner, seed)
    params = {"hf_source": dist.source}
    if method == "monte-carlo":
        params.update(k_outer=int(k_outer), k_inner=int(k_inner),
                      seed=[seed.root_seed, seed.stream_id, *seed.path])
    if dist.source == "empirical":
        params["calibration_size"] = int(dist.reference.size)
    return PopulationSummary(
        theta=ctx.theta,
        theta_alpha=ctx.theta_alpha,
        theta_beta=ctx.theta_beta,
        cov=cov,
        bracket_alpha=ctx.bracket_alpha,
        bracket_beta=ctx.bracket_beta,
        method=method,
        method_params=params,
        cov_se=cov_se if method == "monte-carlo" else None,
        theta_se=ctx.theta_se,
    )


def example_moments(model: DataModel, m: int, bracket_alpha: QuantileBracket,
                    bracket_beta: QuantileBracket) -> dict:
    """Closed-form moments for the maximum kernel written directly in terms of F.

    Keys: ``var_g_alpha``, ``var_g_beta``, ``cov_g_alpha_g_beta``,
    ``cov_core_g_alpha``, ``cov_core_g_beta``. These are independent of the
    quadrature over g used by :func:`covariance_matrix`.
    """
    a, b = bracket_alpha.xi_plus, bracket_beta.xi_minus
    A = float(model.cdf_left(a))
    B = float(model.cdf(b))
    yFdF = model.expect_max(lambda y: y * model.cdf(y) ** (m - 1), 1, lo=a, hi=b, cuts=(a, b))
    one_minus = model.expect_max(lambda y: (1 - model.cdf_left(y)) * y, m - 1, lo=a, hi=b, cuts=(a, b))
    left_y = model.expect_max(lambda y: model.cdf_left(y) * y, m - 1, lo=a, hi=b, cuts=(a, b))
    return {
        "var_g_alpha": A ** (2 * m - 1) * (1 - A),
        "var_g_beta": B ** (2 * m - 1) * (1 - B),
        "cov_g_alpha_g_beta": (A * B) ** (m - 1) * A * (1 - B),
        "cov_core_g_alpha": A**m * one_minus - A**m * yFdF,
        "cov_core_g_beta": B ** (m - 1) * (1 - B) * yFdF + B ** (m - 1) * (1 - B) * left_y,
    }
