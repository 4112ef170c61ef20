"""Kernel-value enumeration and the statistics built on their order.

Everything downstream of :func:`enumerate_values` works on the sorted array
of all ``N = C(n, m)`` kernel values. Rank ranges are 1-based and inclusive
in docstrings (``h_{n1} <= ... <= h_{nN}``), matching the usual notation for
order statistics. Sums over ranks use :func:`math.fsum`, so results are
correctly rounded and cannot depend on the order of tied values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, chain

import numpy as np

from ._validation import (
    DegenerateTrimError,
    as_fraction,
    ceil_mul,
    check_sample,
    floor_mul,
)
from .kernels import Kernel

__all__ = [
    "KernelValues",
    "TrimSpec",
    "TrimCounts",
    "ThresholdCounts",
    "Decomposition",
    "enumerate_values",
    "ecdf",
    "ecdf_left",
    "equantile",
    "u_statistic",
    "trim_counts",
    "threshold_counts",
    "rank_sum",
    "trimmed_u",
    "trimmed_l",
    "decompose_trimmed_sum",
]


@dataclass(frozen=True)
class KernelValues:
    n: int
    m: int
    sorted: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.sorted, dtype=float)
        if arr.ndim != 1 or arr.size != math.comb(self.n, self.m):
            raise ValueError("sorted must hold exactly C(n, m) values")
        if arr.size and np.any(arr[1:] < arr[:-1]):
            raise ValueError("sorted must be nondecreasing")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "sorted", arr)

    @property
    def N(self) -> int:
        return self.sorted.size

    @classmethod
    def from_values(cls, values, n: int, m: int) -> "KernelValues":
        return cls(n, m, np.sort(np.asarray(values, dtype=float), kind="stable"))


@dataclass(frozen=True)
class TrimSpec:
    """Trim levels ``0 < alpha < beta < 1`` held as exact rationals."""

    alpha: Fraction
    beta: Fraction

    def __init__(self, alpha, beta):
        a, b = as_fraction(alpha), as_fraction(beta)
        if not 0 < a < b < 1:
            raise ValueError(f"trim levels must satisfy 0 < alpha < beta < 1, got {alpha}, {beta}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    def __repr__(self):
        return f"TrimSpec(alpha={self.alpha}, beta={self.beta})"


@dataclass(frozen=True)
class TrimCounts:
    n_alpha: int
    n_beta: int
    nbar_alpha: int
    nbar_beta: int

    @property
    def n_alphabeta(self) -> int:
        return self.n_beta - self.n_alpha


@dataclass(frozen=True)
class ThresholdCounts:
    strictly_below: int
    at_or_below: int


@lru_cache(maxsize=32)
def _index_tuples(n: int, m: int) -> np.ndarray:
    if m == 1:
        idx = np.arange(n)[:, None]
    elif m == 2:
        idx = np.column_stack(np.triu_indices(n, k=1))
    else:
        flat = np.fromiter(chain.from_iterable(combinations(range(n), m)), dtype=np.intp)
        idx = flat.reshape(-1, m)
    idx.flags.writeable = False
    return idx


def enumerate_values(sample, kernel: Kernel) -> KernelValues:
    """Evaluate ``kernel`` on every increasing index m-tuple and sort.

    The full array is materialised; cost and memory grow as C(n, m).
    """
    x = check_sample(sample, min_size=kernel.arity)
    n, m = x.size, kernel.arity
    vals = kernel(x[_index_tuples(n, m)])
    return KernelValues(n, m, np.sort(vals, kind="stable"))


def ecdf(values: KernelValues, y: float) -> float:
    """H_n(y) = N^-1 #{i : h_i <= y}."""
    return threshold_counts(values, y).at_or_below / values.N


def ecdf_left(values: KernelValues, y: float) -> float:
    """H_n(y-) = N^-1 #{i : h_i < y}."""
    return threshold_counts(values, y).strictly_below / values.N


def equantile(values: KernelValues, t) -> float:
    """Empirical quantile H_n^{-1}(t): h_{ni} with i = ceil(tN), h_{n1} at t = 0."""
    tf = as_fraction(t)
    if not 0 <= tf <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    i = max(ceil_mul(tf, values.N), 1)
    return float(values.sorted[i - 1])


def u_statistic(values: KernelValues) -> float:
    return math.fsum(values.sorted) / values.N


def trim_counts(values: KernelValues | int, trim: TrimSpec, check: bool = True) -> TrimCounts:
    """Floor and ceiling counts N_g = floor(gN), Nbar_g = ceil(gN).

    With ``check`` set, a trim that keeps no values (N_beta == N_alpha)
    raises :class:`DegenerateTrimError`.
    """
    N = values if isinstance(values, int) else values.N
    counts = TrimCounts(
        floor_mul(trim.alpha, N),
        floor_mul(trim.beta, N),
        ceil_mul(trim.alpha, N),
        ceil_mul(trim.beta, N),
    )
    if check and counts.n_alphabeta == 0:
        raise DegenerateTrimError(
            f"trim ({trim.alpha}, {trim.beta}) keeps no kernel values at N={N}"
        )
    return counts


def threshold_counts(values: KernelValues, xi: float) -> ThresholdCounts:
    s = values.sorted
    return ThresholdCounts(
        int(np.searchsorted(s, xi, side="left")),
        int(np.searchsorted(s, xi, side="right")),
    )


def rank_sum(values: KernelValues, first: int, last: int, shift: float = 0.0) -> float:
    """Sum of (h_{ni} - shift) for ranks first..last (1-based, inclusive).

    An empty range (last < first) sums to 0.
    """
    if last < first:
        return 0.0
    seg = values.sorted[first - 1:last]
    if shift:
        seg = seg - shift
    return math.fsum(seg)


def trimmed_u(values: KernelValues, trim: TrimSpec) -> float:
    """U_ab: mean of the order statistics with ranks N_a+1 .. N_b."""
    c = trim_counts(values, trim)
    return rank_sum(values, c.n_alpha + 1, c.n_beta) / c.n_alphabeta


def trimmed_l(values: KernelValues, trim: TrimSpec) -> float:
    """L_ab: integral of x dH_n over [h_a, h_b) with h_g the Nbar_g-th value.

    Evaluated in its rank form N^-1 * sum of h_{ni} for i = Nbar_a .. Nbar_b - 1.
    With tied values at h_a or h_b the rank form is the defining quantity;
    a value-based reading of the half-open interval would drop tied copies.
    """
    c = trim_counts(values, trim, check=False)
    return rank_sum(values, c.nbar_alpha, c.nbar_beta - 1) / values.N


@dataclass(frozen=True)
class Decomposition:
    """Terms of the exact representation of sum_{i=N_a+1}^{N_b} h_{ni}.

    ``alpha_gap_term`` and ``beta_gap_term`` carry their sign, so the
    right-hand side is the plain sum of the seven stored terms.
    """

    lhs: float
    core_sum: float
    alpha_count_term: float
    beta_count_term: float
    alpha_gap_term: float
    beta_gap_term: float
    l_alpha: float
    l_beta: float
    j_alpha: float
    jbar_alpha: float
    j_beta: float
    jbar_beta: float
    below_plus_alpha: int
    at_or_below_minus_beta: int

    def rhs(self) -> float:
        return math.fsum([
            self.core_sum, self.alpha_count_term, self.beta_count_term,
            self.alpha_gap_term, self.beta_gap_term, self.l_alpha, self.l_beta,
        ])

    def residual(self) -> float:
        return abs(self.lhs - self.rhs())


def decompose_trimmed_sum(values: KernelValues, trim: TrimSpec, bracket_alpha, bracket_beta) -> Decomposition:
    """Split the middle order-statistic sum around population quantile brackets.

    ``bracket_alpha`` and ``bracket_beta`` are population quantile brackets
    (objects with ``xi_minus`` and ``xi_plus``) at levels alpha and beta.
    Every term is computed from its own defining sum; none is obtained by
    subtraction, so :meth:`Decomposition.residual` is a real check.
    """
    c = trim_counts(values, trim, check=False)
    xm_a, xp_a = float(bracket_alpha.xi_minus), float(bracket_alpha.xi_plus)
    xm_b, xp_b = float(bracket_beta.xi_minus), float(bracket_beta.xi_plus)
    d_a, d_b = xp_a - xm_a, xp_b - xm_b
    na, nb = c.n_alpha, c.n_beta
    ndot_pa = threshold_counts(values, xp_a).strictly_below
    n_mb = threshold_counts(values, xm_b).at_or_below

    s = values.sorted
    core = math.fsum(s[(s >= xp_a) & (s <= xm_b)])

    j_a = rank_sum(values, na + 1, ndot_pa, xm_a) if na < ndot_pa else 0.0
    jbar_a = rank_sum(values, ndot_pa + 1, na, xp_a) if ndot_pa <= na else 0.0
    j_b = rank_sum(values, nb + 1, n_mb, xm_b) if nb < n_mb else 0.0
    jbar_b = rank_sum(values, n_mb + 1, nb, xp_b) if n_mb <= nb else 0.0

    return Decomposition(
        lhs=rank_sum(values, na + 1, nb),
        core_sum=core,
        alpha_count_term=xp_a * (ndot_pa - na),
        beta_count_term=-xm_b * (n_mb - nb),
        alpha_gap_term=-d_a * (ndot_pa - na) if na < ndot_pa else 0.0,
        beta_gap_term=-d_b * (n_mb - nb) if n_mb < nb else 0.0,
        l_alpha=j_a - jbar_a,
        l_beta=jbar_b - j_b,
        j_alpha=j_a,
        jbar_alpha=jbar_a,
        j_beta=j_b,
        jbar_beta=jbar_b,
        below_plus_alpha=ndot_pa,
        at_or_below_minus_beta=n_mb,
    )
