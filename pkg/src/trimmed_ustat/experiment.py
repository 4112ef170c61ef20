"""Monte Carlo check of the limit law for the scaled trimmed statistics.

For each sample size in the grid, ``R`` independent samples are drawn, all
kernel values are enumerated, and two scaled statistics are formed::

    t_u = (sqrt(n) / m) * (N^-1 * sum_{i=N_a+1}^{N_b} h_{ni} - theta)
    t_l = (sqrt(n) / m) * (L_ab - theta)

Both are compared with a fresh sample of the limit variable by the
two-sample Kolmogorov-Smirnov distance. The remainders
``sqrt(n) N^-1 |L_alpha|`` and ``sqrt(n) N^-1 |L_beta|`` from the exact
decomposition are tracked as a negligibility diagnostic.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .empirical import (
    KernelValues,
    TrimSpec,
    enumerate_values,
    decompose_trimmed_sum,
    rank_sum,
    trim_counts,
    trimmed_l,
)
from .kernels import SeedSpec, builtin_kernel, builtin_model, sample
from .limit_law import LimitParams, sample_limit
from .population import PopulationSummary, population_summary

__all__ = [
    "ExperimentConfig",
    "ScaledDraw",
    "ConvergenceReport",
    "scaled_statistic",
    "run_replications",
    "ks_distance",
    "negligibility_diagnostic",
    "convergence_study",
    "evaluate_thresholds",
]

LIMIT_STREAM = 2**64 - 1
POPULATION_STREAM = 2**64 - 2
STATISTIC_FORMS = ("u-form", "l-form", "both")


@dataclass(frozen=True)
class ExperimentConfig:
    model: dict
    kernel: dict
    alpha: str
    beta: str
    n_grid: tuple
    replications: int
    seed: SeedSpec
    statistic_form: str = "both"
    limit_sample_size: int = 10**5
    population: dict = field(default_factory=lambda: {"method": "analytic"})
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not self.n_grid:
            raise ValueError("n_grid must not be empty")
        m = self.build_kernel().arity
        if min(self.n_grid) < m:
            raise ValueError(f"every n in n_grid must be >= kernel arity {m}")
        if self.replications < 100:
            raise ValueError(f"replications must be >= 100, got {self.replications}")
        if self.statistic_form not in STATISTIC_FORMS:
            raise ValueError(f"statistic_form must be one of {STATISTIC_FORMS}")
        if self.limit_sample_size < 1:
            raise ValueError("limit_sample_size must be >= 1")
        self.trim  # validates 0 < alpha < beta < 1
        self.build_model()

    @property
    def trim(self) -> TrimSpec:
        return TrimSpec(self.alpha, self.beta)

    def build_kernel(self):
        k = dict(self.kernel)
        return builtin_kernel(k.pop("name"), **k)

    def build_model(self):
        mdl = dict(self.model)
        return builtin_model(mdl.pop("name"), **mdl)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        seed = d.pop("seed", 0)
        if isinstance(seed, dict):
            seed = SeedSpec(int(seed["root_seed"]), int(seed.get("stream_id", 0)))
        else:
            seed = SeedSpec(int(seed))
        for key in ("alpha", "beta"):
            if key not in d:
                raise ValueError(f"config is missing {key!r}")
            d[key] = str(d[key])
        return cls(seed=seed, **d)

    def to_dict(self) -> dict:
        return {
            "model": dict(self.model),
            "kernel": dict(self.kernel),
            "alpha": self.alpha,
            "beta": self.beta,
            "n_grid": list(self.n_grid),
            "replications": self.replications,
            "seed": {"root_seed": self.seed.root_seed, "stream_id": self.seed.stream_id},
            "statistic_form": self.statistic_form,
            "limit_sample_size": self.limit_sample_size,
            "population": dict(self.population),
            "thresholds": dict(self.thresholds),
        }


class ScaledDraw(NamedTuple):
    n: int
    rep: int
    t_u: float
    t_l: float
    rem_alpha: float
    rem_beta: float


def scaled_statistic(values: KernelValues, trim: TrimSpec, theta: float) -> tuple[float, float]:
    """Return ``(t_u, t_l)`` for one set of kernel values."""
    c = trim_counts(values, trim)
    scale = math.sqrt(values.n) / values.m
    mid = rank_sum(values, c.n_alpha + 1, c.n_beta) / values.N
    return scale * (mid - theta), scale * (trimmed_l(values, trim) - theta)


def _one_draw(model, kernel, trim, summary, n, rep, seed):
    vals = enumerate_values(sample(model, n, seed), kernel)
    t_u, t_l = scaled_statistic(vals, trim, summary.theta)
    dec = decompose_trimmed_sum(vals, trim, summary.bracket_alpha, summary.bracket_beta)
    scale = math.sqrt(n) / vals.N
    return ScaledDraw(n, rep, t_u, t_l, scale * abs(dec.l_alpha), scale * abs(dec.l_beta))


def config_population(config: ExperimentConfig) -> PopulationSummary:
    pop = dict(config.population)
    method = pop.pop("method", "analytic")
    seed = SeedSpec(config.seed.root_seed, POPULATION_STREAM)
    calibration = None
    if "calibration_size" in pop:
        calibration = {"size": int(pop.pop("calibration_size")), "seed": seed.child(99)}
    return population_summary(config.build_model(), config.build_kernel(), config.trim,
                              method=method, seed=seed, calibration=calibration, **pop)


def run_replications(config: ExperimentConfig, summary: PopulationSummary | None = None,
                     n_jobs: int = 1) -> list[ScaledDraw]:
    """All replications over the n grid, ordered by (n index, replication).

    Replication ``r`` at grid position ``j`` uses the stream
    ``(root_seed, j * R + r)``; threads only change wall time.
    """
    if summary is None:
        summary = config_population(config)
    model, kernel, trim = config.build_model(), config.build_kernel(), config.trim
    R = config.replications
    jobs = [(n, r, SeedSpec(config.seed.root_seed, j * R + r))
            for j, n in enumerate(config.n_grid) for r in range(R)]

    def work(job):
        n, r, seed = job
        return _one_draw(model, kernel, trim, summary, n, r, seed)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(work, jobs, chunksize=64))
    return [work(job) for job in jobs]


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance sup |F_a - F_b|."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def negligibility_diagnostic(draws: list[ScaledDraw]) -> dict:
    """Per-n summaries of the named remainders sqrt(n) N^-1 (|L_alpha| + |L_beta|).

    Only these two terms of the full remainder are diagnosed.
    """
    out = {}
    for n in sorted({d.n for d in draws}):
        ra = np.array([d.rem_alpha for d in draws if d.n == n])
        rb = np.array([d.rem_beta for d in draws if d.n == n])
        tot = ra + rb
        mean, se = _mean_se(tot)
        out[n] = {
            "remainder_mean": mean,
            "remainder_se": se,
            "remainder_p90": float(np.quantile(tot, 0.9)),
            "rem_alpha_mean": float(ra.mean()),
            "rem_beta_mean": float(rb.mean()),
        }
    return out


@dataclass
class ConvergenceReport:
    config: dict
    theta: float
    cov: list
    delta_alpha: float
    delta_beta: float
    sigma_g2: float
    per_n: list
    limit_sample_size: int
    draws: list = field(default_factory=list, repr=False)

    def ks_series(self, form: str = "u") -> list[float]:
        return [row[f"ks_{form}"] for row in self.per_n]

    def remainder_series(self) -> list[float]:
        return [row["remainder_mean"] for row in self.per_n]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "theta": self.theta,
            "cov": self.cov,
            "delta_alpha": self.delta_alpha,
            "delta_beta": self.delta_beta,
            "sigma_g2": self.sigma_g2,
            "limit_sample_size": self.limit_sample_size,
            "per_n": self.per_n,
        }


def convergence_study(config: ExperimentConfig, n_jobs: int = 1,
                      summary: PopulationSummary | None = None) -> ConvergenceReport:
    """Run every replication and compare with one fresh limit-law sample."""
    if summary is None:
        summary = config_population(config)
    draws = run_replications(config, summary, n_jobs=n_jobs)
    limit = sample_limit(LimitParams.from_summary(summary), config.limit_sample_size,
                         SeedSpec(config.seed.root_seed, LIMIT_STREAM))
    rem = negligibility_diagnostic(draws)
    per_n = []
    for n in config.n_grid:
        t_u = np.array([d.t_u for d in draws if d.n == n])
        t_l = np.array([d.t_l for d in draws if d.n == n])
        mu, mu_se = _mean_se(t_u)
        ml, ml_se = _mean_se(t_l)
        row = {
            "n": n,
            "ks_u": ks_distance(t_u, limit),
            "ks_l": ks_distance(t_l, limit),
            "mean_t_u": mu,
            "mean_t_u_se": mu_se,
            "mean_t_l": ml,
            "mean_t_l_se": ml_se,
            "var_t_u": float(t_u.var(ddof=1)),
            "var_t_l": float(t_l.var(ddof=1)),
        }
        row.update(rem[n])
        per_n.append(row)
    return ConvergenceReport(
        config=config.to_dict(),
        theta=summary.theta,
        cov=[float(v) for v in np.ravel(summary.cov)],
        delta_alpha=summary.delta_alpha,
        delta_beta=summary.delta_beta,
        sigma_g2=summary.sigma_g2,
        per_n=per_n,
        limit_sample_size=config.limit_sample_size,
        draws=draws,
    )


def _decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def evaluate_thresholds(report: ConvergenceReport, thresholds: dict) -> list[dict]:
    """Check a report against configured thresholds; returns the failures.

    Recognised keys: ``ks_max`` (bound on the KS distance at the largest
    n), ``ks_decreasing`` and ``remainder_decreasing`` (booleans), and
    ``forms`` (subset of ``["u", "l"]``; defaults to the configured
    statistic form).
    """
    failures = []
    default = {"u-form": ["u"], "l-form": ["l"], "both": ["u", "l"]}
    forms = thresholds.get("forms", default[report.config["statistic_form"]])
    for form in forms:
        ks = report.ks_series(form)
        if "ks_max" in thresholds and not ks[-1] < float(thresholds["ks_max"]):
            failures.append({"check": f"ks_{form}_max", "n": report.per_n[-1]["n"],
                             "value": ks[-1], "threshold": float(thresholds["ks_max"])})
        if thresholds.get("ks_decreasing") and not _decreasing(ks):
            failures.append({"check": f"ks_{form}_decreasing", "values": ks})
    if thresholds.get("remainder_decreasing"):
        rem = report.remainder_series()
        if not rem[-1] < rem[0]:
            failures.append({"check": "remainder_decreasing", "values": rem})
    return failures

