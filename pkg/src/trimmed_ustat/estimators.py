"""scikit-learn style wrappers.

:class:`TrimmedUStatistic` estimates U, U_ab and L_ab from one sample
(``fit``) or maps a batch of samples, one per row, to those three features
(``transform``). :class:`TrimmedLimitLaw` fits the population quantities
for a known model and draws from the limit law.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .empirical import (
    TrimSpec,
    enumerate_values,
    trim_counts,
    trimmed_l,
    trimmed_u,
    u_statistic,
)
from .kernels import SeedSpec, builtin_kernel, builtin_model
from .limit_law import LimitParams, normal_limit_cdf, sample_limit
from .population import population_summary

__all__ = ["TrimmedUStatistic", "TrimmedLimitLaw"]


def _kernel(name, m):
    return builtin_kernel(name, m if name == "max_m" else None)


class TrimmedUStatistic(TransformerMixin, BaseEstimator):
    """Trimmed U-statistics over all kernel values of a sample.

    Parameters
    ----------
    kernel : {"identity", "half_squared_diff", "max_m"}
    m : int
        Arity, only used by ``max_m``.
    alpha, beta : float or str
        Trim levels, ``0 < alpha < beta < 1``. Strings are read as exact
        decimals.

    Attributes
    ----------
    values_ : KernelValues
    u_, u_trimmed_, l_trimmed_ : float
    counts_ : TrimCounts
    """

    def __init__(self, kernel="max_m", m=2, alpha=0.25, beta=0.75):
        self.kernel = kernel
        self.m = m
        self.alpha = alpha
        self.beta = beta

    def _validate(self):
        return _kernel(self.kernel, self.m), TrimSpec(self.alpha, self.beta)

    def fit(self, X, y=None):
        kernel, trim = self._validate()
        x = check_array(X, ensure_2d=False, dtype=float).ravel()
        self.values_ = enumerate_values(x, kernel)
        self.counts_ = trim_counts(self.values_, trim, check=False)
        self.u_ = u_statistic(self.values_)
        self.u_trimmed_ = trimmed_u(self.values_, trim)
        self.l_trimmed_ = trimmed_l(self.values_, trim)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        """Rows of ``X`` are independent samples; returns (u, u_trimmed, l_trimmed) per row."""
        kernel, trim = self._validate()
        X = check_array(X, dtype=float)
        out = np.empty((X.shape[0], 3))
        for i, row in enumerate(X):
            vals = enumerate_values(row, kernel)
            out[i] = u_statistic(vals), trimmed_u(vals, trim), trimmed_l(vals, trim)
        return out

    def fit_transform(self, X, y=None, **fit_params):
        # fit() takes one sample, transform() a batch, so the default chaining does not apply
        self._validate()
        return self.transform(X)

    def get_feature_names_out(self, input_features=None):
        return np.array(["u", "u_trimmed", "l_trimmed"], dtype=object)


class TrimmedLimitLaw(BaseEstimator):
    """Population summary and limit-law sampler for a known model.

    ``model_params`` is a dict of model parameters, for example
    ``{"alpha": 0.25, "beta": 0.64, "m": 2}`` for ``paper_piecewise``.
    """

    def __init__(self, model="uniform01", model_params=None, kernel="max_m", m=2,
                 alpha=0.25, beta=0.75, method="analytic", k_outer=10**5, k_inner=10**3,
                 random_state=0):
        self.model = model
        self.model_params = model_params
        self.kernel = kernel
        self.m = m
        self.alpha = alpha
        self.beta = beta
        self.method = method
        self.k_outer = k_outer
        self.k_inner = k_inner
        self.random_state = random_state

    def fit(self, X=None, y=None):
        model = builtin_model(self.model, **(self.model_params or {}))
        kernel = _kernel(self.kernel, self.m)
        self.summary_ = population_summary(
            model, kernel, TrimSpec(self.alpha, self.beta), method=self.method,
            k_outer=self.k_outer, k_inner=self.k_inner, seed=SeedSpec(int(self.random_state), 1),
        )
        self.theta_ = self.summary_.theta
        self.covariance_ = self.summary_.cov
        return self

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "summary_")
        rs = self.random_state if random_state is None else random_state
        return sample_limit(LimitParams.from_summary(self.summary_), int(n_samples), SeedSpec(int(rs), 2))

    def cdf(self, w):
        """Limit CDF; only available when both quantile gaps are zero."""
        check_is_fitted(self, "summary_")
        if not self.summary_.gaussian_limit:
            raise ValueError("the limit is not Gaussian when a quantile gap is positive")
        sigma = float(np.sqrt(self.summary_.sigma_g2))
        return np.vectorize(lambda v: normal_limit_cdf(sigma, v))(w)
