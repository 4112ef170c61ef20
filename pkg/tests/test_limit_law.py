import math

import numpy as np
import pytest

from trimmed_ustat.kernels import SeedSpec
from trimmed_ustat.limit_law import (
    LimitParams,
    normal_limit_cdf,
    psd_factor,
    sample_limit,
    sample_triples,
)


@pytest.mark.parametrize("cov", [
    np.eye(3),
    np.zeros((3, 3)),
    np.ones((3, 3)),
    np.array([[0.0625, 0.01, 0.04], [0.01, 0.0066, 0.02], [0.04, 0.02, 0.1024]]),
    np.diag([0.0, 2.0, 0.5]),
    np.array([[1.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 1.0]]),
], ids=["identity", "zeros", "rank1", "dense", "zero-row", "rank1-gap"])
def test_psd_factor_reproduces(cov):
    L = psd_factor(cov)
    assert np.allclose(L @ L.T, cov, rtol=0, atol=1e-10)


def test_psd_factor_identity_and_zero():
    assert np.array_equal(psd_factor(np.eye(3)), np.eye(3))
    assert np.array_equal(psd_factor(np.zeros((3, 3))), np.zeros((3, 3)))


def test_psd_factor_rejects_bad_input():
    with pytest.raises(np.linalg.LinAlgError):
        psd_factor(np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(np.linalg.LinAlgError):
        psd_factor(np.array([[1.0, 0.5, 0], [0, 1.0, 0], [0, 0, 1.0]]))


def test_psd_factor_random_low_rank(rng):
    for _ in range(50):
        A = rng.normal(size=(3, int(rng.integers(1, 4))))
        cov = A @ A.T
        L = psd_factor(cov)
        assert np.allclose(L @ L.T, cov, atol=1e-10)


def test_limit_params_validation():
    with pytest.raises(ValueError):
        LimitParams(np.eye(2))
    with pytest.raises(ValueError):
        LimitParams(np.eye(3), delta_alpha=-0.1)


def test_gaussian_case_mean():
    sigma2 = 0.0066
    cov = np.diag([0.06, sigma2, 0.1])
    w = sample_limit(LimitParams(cov), 10**6, SeedSpec(1))
    assert abs(w.mean()) < 4 * math.sqrt(sigma2) / 1e3
    assert w.var() == pytest.approx(sigma2, rel=0.01)


def test_half_normal_oracle():
    w = sample_limit(LimitParams(np.eye(3), 1.0, 0.0), 10**6, SeedSpec(2))
    se = w.std(ddof=1) / 1e3
    assert abs(w.mean() + 1 / math.sqrt(2 * math.pi)) < 4 * se


def test_brute_force_oracle_with_both_gaps():
    # independent scalar loop over numpy's default generator
    cov = np.array([[1.0, 0.3, 0.2], [0.3, 1.0, -0.1], [0.2, -0.1, 1.0]])
    da, db = 0.5, 0.8
    z = np.random.default_rng(77).multivariate_normal(np.zeros(3), cov, size=200_000)
    oracle = [t[1] - da * max(t[0], 0.0) - db * min(t[2], 0.0) for t in z]
    w = sample_limit(LimitParams(cov, da, db), 200_000, SeedSpec(3))
    se = math.hypot(np.std(oracle) / math.sqrt(len(oracle)), w.std() / math.sqrt(w.size))
    assert abs(np.mean(oracle) - w.mean()) < 4 * se


def test_deterministic():
    p = LimitParams(np.eye(3))
    assert np.array_equal(sample_limit(p, 1000, SeedSpec(4)), sample_limit(p, 1000, SeedSpec(4)))
    assert not np.array_equal(sample_limit(p, 1000, SeedSpec(4)), sample_limit(p, 1000, SeedSpec(5)))


def test_prefix_stable_across_counts():
    p = LimitParams(np.eye(3))
    short = sample_limit(p, 100, SeedSpec(6))
    long = sample_limit(p, 70_000, SeedSpec(6))
    assert np.array_equal(long[:100], short)


def test_covariance_reproduction():
    cov = np.array([[0.0625, 0.012, 0.04], [0.012, 0.0066, 0.015], [0.04, 0.015, 0.1024]])
    t = sample_triples(cov, 10**6, SeedSpec(7))
    emp = np.cov(t, rowvar=False, ddof=0)
    prods = t[:, :, None] * t[:, None, :]
    se = prods.std(axis=0) / 1e3
    assert np.all(np.abs(emp - cov) < 4 * se)


def test_pathwise_sign_structure():
    cov = np.array([[1.0, 0.4, 0.1], [0.4, 1.0, 0.3], [0.1, 0.3, 1.0]])
    t = sample_triples(cov, 50_000, SeedSpec(8))
    from trimmed_ustat.limit_law import limit_from_triples
    w = limit_from_triples(t, 0.25, 0.0)
    assert np.all(w[t[:, 0] > 0] <= t[t[:, 0] > 0, 1])
    assert np.array_equal(w[t[:, 0] <= 0], t[t[:, 0] <= 0, 1])
    w = limit_from_triples(t, 0.0, 0.8)
    assert np.all(w[t[:, 2] >= 0] >= t[t[:, 2] >= 0, 1])
    assert np.all(w[t[:, 2] < 0] >= t[t[:, 2] < 0, 1])


def test_normal_cdf_examples():
    assert normal_limit_cdf(1, 0) == 0.5
    assert normal_limit_cdf(1, 1.959963985) == pytest.approx(0.975, abs=1e-9)
    assert normal_limit_cdf(2, 2) == pytest.approx(0.841344746, abs=1e-9)
    assert normal_limit_cdf(1, -40) >= 0.0
    with pytest.raises(ValueError):
        normal_limit_cdf(0, 1)


def test_normal_cdf_matches_scipy():
    stats = pytest.importorskip("scipy.stats")
    for w in np.linspace(-6, 6, 121):
        assert normal_limit_cdf(1.3, w) == pytest.approx(stats.norm.cdf(w / 1.3), abs=1e-12)
