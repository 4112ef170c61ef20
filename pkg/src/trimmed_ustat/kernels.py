"""Kernels, observation models and seeded random streams.

A kernel is a symmetric function of ``m`` real arguments. Evaluators are
vectorised over the last axis, so ``kernel(points)`` accepts an array of
shape ``(..., m)`` and returns shape ``(...)``.

Observation models expose their CDF, the lower generalized inverse
``inf{t : F(t) >= u}`` (used for sampling) and the upper inverse
``sup{t : F(t) <= u}``. Both inverses are exact on flat pieces of ``F``,
which is what makes quantile brackets with a gap come out right.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Kernel",
    "DataModel",
    "PiecewiseLinearModel",
    "DiscreteUniformModel",
    "SeedSpec",
    "eval_kernel",
    "builtin_kernel",
    "builtin_model",
    "sample",
    "KERNEL_NAMES",
    "MODEL_NAMES",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)


@dataclass(frozen=True)
class Kernel:
    name: str
    arity: int
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("kernel arity must be >= 1")

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1:] != (self.arity,):
            raise ValueError(
                f"kernel {self.name!r} expects {self.arity} arguments, got shape {pts.shape}"
            )
        return self.evaluator(pts)

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params}


def eval_kernel(kernel: Kernel, points) -> float:
    """Evaluate ``kernel`` at a single m-tuple."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 1 or pts.size != kernel.arity:
        raise ValueError(
            f"kernel {kernel.name!r} has arity {kernel.arity}, got {pts.size} points"
        )
    return float(kernel(pts))


def _identity(x):
    return x[..., 0]


def _half_squared_diff(x):
    d = x[..., 0] - x[..., 1]
    return 0.5 * d * d


def _maximum(x):
    return np.max(x, axis=-1)


KERNEL_NAMES = ("identity", "half_squared_diff", "max_m")


def builtin_kernel(name: str, m: int | None = None) -> Kernel:
    """Look up one of the built-in kernels.

    ``max_m`` needs its arity ``m >= 2``; the other two have fixed arity and
    reject a conflicting ``m``.
    """
    if name == "identity":
        if m not in (None, 1):
            raise ValueError("identity kernel has arity 1")
        return Kernel("identity", 1, _identity)
    if name == "half_squared_diff":
        if m not in (None, 2):
            raise ValueError("half_squared_diff kernel has arity 2")
        return Kernel("half_squared_diff", 2, _half_squared_diff)
    if name == "max_m":
        if m is None:
            raise ValueError("max_m kernel requires an arity m >= 2")
        m = int(m)
        if m < 2:
            raise ValueError(f"max_m kernel requires m >= 2, got {m}")
        return Kernel("max_m", m, _maximum, {"m": m})
    raise KeyError(f"unknown kernel {name!r}; choose from {KERNEL_NAMES}")


class DataModel:
    """Distribution F of a single observation."""

    name: str
    kind: str
    support: tuple[float, float]
    params: dict

    def cdf(self, t):
        raise NotImplementedError

    def cdf_left(self, t):
        """F(t-), the left limit of the CDF."""
        raise NotImplementedError

    def inverse_cdf(self, u):
        """Lower generalized inverse inf{t : F(t) >= u}."""
        raise NotImplementedError

    def upper_inverse(self, u):
        """Upper generalized inverse sup{t : F(t) <= u}."""
        raise NotImplementedError

    def expect_max(self, phi, q, lo=-np.inf, hi=np.inf, lo_open=False, hi_open=False, cuts=()):
        """E[phi(Y) I{lo <(=) Y <(=) hi}] with Y the maximum of ``q`` draws.

        ``lo``, ``hi`` and ``lo_open`` broadcast together; the result has
        their broadcast shape. ``phi`` receives an array whose leading axes
        match that shape and must be vectorised. ``cuts`` are extra points
        where ``phi`` jumps; continuous models split their quadrature there.
        """
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({self.name!r}{', ' if args else ''}{args})"


class PiecewiseLinearModel(DataModel):
    """Continuous CDF interpolating linearly between knots.

    Flat segments (equal consecutive CDF knots) are allowed and carry no
    mass.
    """

    kind = "continuous-analytic"

    def __init__(self, name, t_knots, f_knots, params=None):
        t = np.asarray(t_knots, dtype=float)
        f = np.asarray(f_knots, dtype=float)
        if t.shape != f.shape or t.size < 2:
            raise ValueError("knot arrays must have equal length >= 2")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(f) < 0):
            raise ValueError("knots must be strictly increasing in t and nondecreasing in F")
        if f[0] != 0.0 or f[-1] != 1.0:
            raise ValueError("CDF knots must start at 0 and end at 1")
        self.name = name
        self.params = dict(params or {})
        self.t_knots = t
        self.f_knots = f
        self.support = (float(t[0]), float(t[-1]))

    def cdf(self, t):
        return np.interp(t, self.t_knots, self.f_knots, left=0.0, right=1.0)

    cdf_left = cdf

    def _invert(self, u, side):
        u = np.asarray(u, dtype=float)
        t, f = self.t_knots, self.f_knots
        j = np.searchsorted(f, u, side=side)
        j = np.clip(j, 1, f.size - 1)
        f0, f1 = f[j - 1], f[j]
        t0, t1 = t[j - 1], t[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(f1 > f0, (u - f0) / (f1 - f0), 0.0)
        out = t0 + frac * (t1 - t0)
        out = np.where(u <= 0.0, t[0], np.where(u >= 1.0, t[-1], out))
        return out if out.ndim else float(out)

    def inverse_cdf(self, u):
        return self._invert(u, "left")

    def upper_inverse(self, u):
        return self._invert(u, "right")

    def expect_max(self, phi, q, lo=-np.inf, hi=np.inf, lo_open=False, hi_open=False, cuts=()):
        if q < 1:
            raise ValueError("q must be >= 1")
        lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
        t, f = self.t_knots, self.f_knots
        edges = set(t.tolist())
        edges.update(c for c in np.ravel(cuts) if t[0] < c < t[-1])
        edges = np.array(sorted(edges))
        total = np.zeros(lo.shape)
        for left, right in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (left + right)
            j = min(max(int(np.searchsorted(t, mid)), 1), t.size - 1)
            slope = (f[j] - f[j - 1]) / (t[j] - t[j - 1])
            if slope == 0.0:
                continue
            a = np.maximum(left, lo)
            b = np.minimum(right, hi)
            width = np.where(b > a, b - a, 0.0)
            half = 0.5 * width[..., None]
            y = (0.5 * (a + b))[..., None] + half * _GL_NODES
            dens = q * self.cdf(y) ** (q - 1) * slope
            total = total + np.sum(half * _GL_WEIGHTS * dens * phi(y), axis=-1)
        return total if total.ndim else float(total)


class DiscreteUniformModel(DataModel):
    """Mass 1/k on each of 1, ..., k."""

    kind = "discrete-atomic"

    def __init__(self, k):
        k = int(k)
        if k < 1:
            raise ValueError(f"discrete_uniform needs k >= 1, got {k}")
        self.k = k
        self.name = "discrete_uniform"
        self.params = {"k": k}
        self.support = (1.0, float(k))
        self.atoms = np.arange(1, k + 1, dtype=float)

    def cdf(self, t):
        return np.clip(np.floor(t), 0, self.k) / self.k

    def cdf_left(self, t):
        return np.clip(np.ceil(t) - 1, 0, self.k) / self.k

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        # ceil(u*k) with a guard against u*k landing just above an integer
        raw = u * self.k
        r = np.round(raw)
        j = np.where(np.isclose(raw, r, rtol=0, atol=1e-12), r, np.ceil(raw))
        out = np.clip(j, 1, self.k)
        return out if out.ndim else float(out)

    def upper_inverse(self, u):
        u = np.asarray(u, dtype=float)
        raw = u * self.k
        r = np.round(raw)
        j = np.where(np.isclose(raw, r, rtol=0, atol=1e-12), r, np.floor(raw)) + 1
        out = np.clip(j, 1, self.k)
        return out if out.ndim else float(out)

    def expect_max(self, phi, q, lo=-np.inf, hi=np.inf, lo_open=False, hi_open=False, cuts=()):
        if q < 1:
            raise ValueError("q must be >= 1")
        lo, hi, lo_open, hi_open = np.broadcast_arrays(
            np.asarray(lo, dtype=float), np.asarray(hi, dtype=float),
            np.asarray(lo_open, dtype=bool), np.asarray(hi_open, dtype=bool),
        )
        y = self.atoms
        p = (y / self.k) ** q - ((y - 1) / self.k) ** q
        yy = np.broadcast_to(y, lo.shape + y.shape)
        lo_, hi_ = lo[..., None], hi[..., None]
        above = np.where(lo_open[..., None], yy > lo_, yy >= lo_)
        below = np.where(hi_open[..., None], yy < hi_, yy <= hi_)
        vals = np.where(above & below, phi(yy), 0.0)
        out = np.sum(p * vals, axis=-1)
        return out if out.ndim else float(out)


MODEL_NAMES = ("uniform01", "paper_piecewise", "discrete_uniform")


def _piecewise(alpha, beta, m) -> PiecewiseLinearModel:
    alpha, beta, m = float(alpha), float(beta), int(m)
    if not 0 < alpha < beta < 1:
        raise ValueError(f"paper_piecewise needs 0 < alpha < beta < 1, got {alpha}, {beta}")
    if m < 1:
        raise ValueError("paper_piecewise needs m >= 1")
    a = alpha ** (1.0 / m)
    b = beta ** (1.0 / m)
    # F = 2t, flat at a, t, flat at b, t/2, then 1 at t = 2
    return PiecewiseLinearModel(
        "paper_piecewise",
        [0.0, 0.5 * a, a, b, 2.0 * b, 2.0],
        [0.0, a, a, b, b, 1.0],
        {"alpha": alpha, "beta": beta, "m": m},
    )


def builtin_model(name: str, **params) -> DataModel:
    """Construct a built-in observation model by name."""
    if name == "uniform01":
        if params:
            raise ValueError(f"uniform01 takes no parameters, got {sorted(params)}")
        return PiecewiseLinearModel("uniform01", [0.0, 1.0], [0.0, 1.0])
    if name == "paper_piecewise":
        missing = {"alpha", "beta", "m"} - set(params)
        if missing:
            raise ValueError(f"paper_piecewise missing parameters {sorted(missing)}")
        return _piecewise(params["alpha"], params["beta"], params["m"])
    if name == "discrete_uniform":
        if "k" not in params:
            raise ValueError("discrete_uniform requires parameter k")
        return DiscreteUniformModel(params["k"])
    raise KeyError(f"unknown model {name!r}; choose from {MODEL_NAMES}")


@dataclass(frozen=True)
class SeedSpec:
    """Key of an independent random stream: ``(root_seed, stream_id)``.

    Streams are Philox generators keyed through ``SeedSequence`` spawn
    keys, so each key maps to its own statistically independent stream and
    no draw depends on how work is scheduled.
    """

    root_seed: int
    stream_id: int = 0
    path: tuple = ()

    def __post_init__(self):
        for v in (self.root_seed, self.stream_id, *self.path):
            if not 0 <= int(v) < 2**64:
                raise ValueError("seed components must be unsigned 64-bit integers")

    def child(self, k: int) -> "SeedSpec":
        return SeedSpec(self.root_seed, self.stream_id, self.path + (int(k),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            int(self.root_seed), spawn_key=(int(self.stream_id), *map(int, self.path))
        )
        return np.random.Generator(np.random.Philox(ss))


def sample(model: DataModel, n: int, seed: SeedSpec) -> np.ndarray:
    """Draw ``n`` observations from ``model`` by inverse-CDF transform."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    u = seed.generator().random(int(n))
    return np.asarray(model.inverse_cdf(u), dtype=float)
