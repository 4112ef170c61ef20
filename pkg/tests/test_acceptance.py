"""Acceptance criteria, each at its stated tolerance and size.

Every criterion prints one PASS/FAIL line (also collected into a summary
section at the end of the pytest run). Run just this module with::

    pytest tests/test_acceptance.py -v
"""
import json
import math
import time

import numpy as np
import pytest

from trimmed_ustat.cli import main
from trimmed_ustat.empirical import TrimSpec
from trimmed_ustat.identities import check_counts_and_events, check_decomposition, check_rank_form
from trimmed_ustat.kernels import SeedSpec, builtin_kernel, builtin_model
from trimmed_ustat.limit_law import LimitParams, sample_limit
from trimmed_ustat.population import (
    covariance_matrix,
    example_moments,
    kernel_distribution,
    pop_quantiles,
    population_context,
)

RESULTS = []

pytestmark = pytest.mark.slow


def report(label, passed, detail):
    line = f"{label}: {'PASS' if passed else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    return passed


def test_criterion_01_rank_form_identity():
    t0 = time.perf_counter()
    ok, checked, witness = check_rank_form(np.random.default_rng(101), datasets=500)
    dt = time.perf_counter() - t0
    assert report("criterion 1 (rank-form identity, 500 datasets x 19x19 grid)", ok and dt < 60,
                  f"{checked} comparisons, {dt:.1f}s, witness={witness}")


def test_criterion_02_decomposition():
    t0 = time.perf_counter()
    ok, cases, info = check_decomposition(np.random.default_rng(102), cases=200, tol=1e-10)
    dt = time.perf_counter() - t0
    assert report("criterion 2 (exact decomposition, 200 cases)", ok and dt < 60,
                  f"{cases} cases, {dt:.1f}s, {info}")


def test_criterion_03_counts_and_events():
    t0 = time.perf_counter()
    ok, probes, witness = check_counts_and_events(np.random.default_rng(103), probes=1000)
    dt = time.perf_counter() - t0
    assert report("criterion 3 (count/CDF identities and events, 1000 probes)", ok and dt < 10,
                  f"{probes} probes, {dt:.2f}s, witness={witness}")


@pytest.fixture(scope="module")
def uniform_mc():
    model = builtin_model("uniform01")
    dist = kernel_distribution(model, builtin_kernel("max_m", 2))
    ctx = population_context(dist, TrimSpec(0.25, 0.64))
    t0 = time.perf_counter()
    mc = covariance_matrix(ctx, "monte-carlo", k_outer=10**5, k_inner=10**3, seed=SeedSpec(404))
    return model, ctx, mc, time.perf_counter() - t0


def test_criterion_04_closed_forms_vs_nested_mc(uniform_mc):
    model, ctx, (cov, se, _, _), dt = uniform_mc
    formulas = example_moments(model, 2, ctx.bracket_alpha, ctx.bracket_beta)
    targets = {
        "var_g_alpha": (formulas["var_g_alpha"], 0.0625, (0, 0)),
        "var_g_beta": (formulas["var_g_beta"], 0.1024, (2, 2)),
        "cov_g_alpha_g_beta": (formulas["cov_g_alpha_g_beta"], 0.04, (0, 2)),
    }
    ok, parts = dt < 120, []
    for name, (value, hand, (i, j)) in targets.items():
        z = (cov[i, j] - value) / se[i, j]
        ok &= math.isclose(value, hand, abs_tol=1e-12) and abs(z) <= 4
        parts.append(f"{name}={value:.6g} mc={cov[i, j]:.6g} z={z:+.2f}")
    assert report("criterion 4 (closed forms vs nested MC, K_outer=1e5)", ok,
                  "; ".join(parts) + f"; {dt:.1f}s")


@pytest.mark.xfail(strict=True, reason="0.072 uses 1 - beta in place of 1 - F(xi-_beta); the formula gives 0.04")
def test_criterion_04_literal_constant_0072(uniform_mc):
    _, _, (cov, se, _, _), _ = uniform_mc
    z = (cov[0, 2] - 0.072) / se[0, 2]
    passed = abs(z) <= 4
    report("criterion 4 literal constant (c_galpha_gbeta = 0.072 vs nested MC)", passed,
           f"mc={cov[0, 2]:.6g}, z={z:+.1f}; the closed form gives 0.04")
    assert passed


def test_criterion_05_brackets():
    t0 = time.perf_counter()
    dist = kernel_distribution(builtin_model("paper_piecewise", alpha=0.25, beta=0.64, m=2),
                               builtin_kernel("max_m", 2))
    ba, bb = pop_quantiles(dist, "0.25"), pop_quantiles(dist, "0.64")
    got = (ba.xi_minus, ba.xi_plus, bb.xi_minus, bb.xi_plus)
    a, b = 0.25 ** 0.5, 0.64 ** 0.5
    want = (a / 2, a, b, 2 * b)
    dt = time.perf_counter() - t0
    assert report("criterion 5 (piecewise quantile brackets)", got == want == (0.25, 0.5, 0.8, 1.6) and dt < 1,
                  f"got {got}, {dt * 1e3:.1f}ms")


def _verify_twice(name, tmp_path_factory):
    outs = []
    for k in range(2):
        path = tmp_path_factory.mktemp("verify") / f"{name}-{k}.json"
        t0 = time.perf_counter()
        code = main(["verify", name, "--no-timestamp", "--threads", "4", "--out", str(path)])
        outs.append((code, path.read_bytes(), time.perf_counter() - t0))
    return outs


@pytest.fixture(scope="module")
def uniform_runs(tmp_path_factory):
    return _verify_twice("uniform-max2.json", tmp_path_factory)


@pytest.fixture(scope="module")
def piecewise_runs(tmp_path_factory):
    return _verify_twice("piecewise-max2.json", tmp_path_factory)


def _ks(runs):
    rep = json.loads(runs[0][1])
    return [row["ks_u"] for row in rep["per_n"]], rep


def _decreasing(xs):
    return all(b < a for a, b in zip(xs, xs[1:]))


def test_criterion_06_gaussian_regime(uniform_runs):
    ks, rep = _ks(uniform_runs)
    dt = uniform_runs[0][2]
    ok_bound = ks[-1] < 0.05
    ok_mono = _decreasing(ks)
    assert rep["delta_alpha"] == 0 and rep["delta_beta"] == 0
    assert report("criterion 6 (uniform regime: KS < 0.05 at n=200, decreasing)", ok_bound and ok_mono and dt < 600,
                  f"KS_u={[round(k, 4) for k in ks]}, {dt:.1f}s")


def test_criterion_07_mixed_regime_bound(piecewise_runs):
    ks, rep = _ks(piecewise_runs)
    dt = piecewise_runs[0][2]
    assert rep["delta_alpha"] == pytest.approx(0.25) and rep["delta_beta"] == pytest.approx(0.8)
    assert report("criterion 7a (mixed regime: KS < 0.07 at n=200)", ks[-1] < 0.07 and dt < 600,
                  f"KS_u(n=200)={ks[-1]:.4f}, {dt:.1f}s")


def test_criterion_07_mixed_regime_decreasing(piecewise_runs):
    ks, _ = _ks(piecewise_runs)
    assert report("criterion 7b (mixed regime: KS decreasing over 50, 100, 200)", _decreasing(ks),
                  f"KS_u={[round(k, 4) for k in ks]}")


def test_criterion_08_remainders(uniform_runs, piecewise_runs):
    parts, ok = [], True
    for label, runs in (("uniform", uniform_runs), ("piecewise", piecewise_runs)):
        rows = json.loads(runs[0][1])["per_n"]
        first, last = rows[0]["remainder_mean"], rows[-1]["remainder_mean"]
        ok &= last < first
        parts.append(f"{label}: {first:.4f} -> {last:.4f}")
    assert report("criterion 8 (remainder mean smaller at n=200 than n=50)", ok, "; ".join(parts))


def test_criterion_09_limit_sampler_oracle():
    t0 = time.perf_counter()
    w = sample_limit(LimitParams(np.eye(3), 1.0, 0.0), 10**6, SeedSpec(909))
    se = w.std(ddof=1) / math.sqrt(w.size)
    target = -1 / math.sqrt(2 * math.pi)
    # independent brute-force draw of the same functional
    z = np.random.default_rng(910).standard_normal((10**6, 3))
    brute = z[:, 1] - np.where(z[:, 0] > 0, z[:, 0], 0.0)
    bse = math.hypot(se, brute.std(ddof=1) / 1e3)
    dt = time.perf_counter() - t0
    ok = abs(w.mean() - target) < 4 * se and abs(w.mean() - brute.mean()) < 4 * bse and dt < 30
    assert report("criterion 9 (limit sampler half-normal oracle)", ok,
                  f"mean={w.mean():.5f}, target={target:.5f}, se={se:.5f}, brute={brute.mean():.5f}, {dt:.1f}s")


def test_criterion_10_determinism(uniform_runs, piecewise_runs):
    same = [runs[0][1] == runs[1][1] for runs in (uniform_runs, piecewise_runs)]
    assert report("criterion 10 (verify output byte-identical across reruns)", all(same),
                  f"uniform={same[0]}, piecewise={same[1]}")


def test_bundled_config_exit_codes(uniform_runs, piecewise_runs):
    # the exit status follows the configured thresholds, including the monotone clause
    u_code, p_code = uniform_runs[0][0], piecewise_runs[0][0]
    p_failures = json.loads(piecewise_runs[0][1])["failures"]
    assert u_code == 0
    assert p_code == (0 if not p_failures else 1)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
