"""Trimmed U-statistics, generalized L-statistics and their limit law."""
from .empirical import (
    KernelValues,
    TrimSpec,
    enumerate_values,
    ecdf,
    equantile,
    decompose_trimmed_sum,
    trim_counts,
    threshold_counts,
    trimmed_l,
    trimmed_u,
    u_statistic,
)
from .estimators import TrimmedLimitLaw, TrimmedUStatistic
from .kernels import SeedSpec, builtin_kernel, builtin_model, eval_kernel, sample
from .limit_law import LimitParams, normal_limit_cdf, psd_factor, sample_limit
from .population import (
    kernel_distribution,
    pop_quantiles,
    population_context,
    population_summary,
)

__version__ = "0.1.0"
