"""Randomised checks of the exact finite-sample identities.

Each suite draws random datasets (continuous and heavily tied) and compares
the library against brute-force evaluations written independently here.
Failures carry the offending inputs verbatim so they can be replayed.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .empirical import (
    TrimSpec,
    enumerate_values,
    equantile,
    ecdf,
    ecdf_left,
    decompose_trimmed_sum,
    threshold_counts,
    trim_counts,
    trimmed_l,
)
from .kernels import SeedSpec, builtin_kernel, builtin_model, sample
from .population import kernel_distribution, pop_quantiles

__all__ = ["LEVEL_GRID", "random_dataset", "check_identities", "FAULTS"]

LEVEL_GRID = [Fraction(k, 20) for k in range(1, 20)]
FAULTS = ("nbar_off_by_one",)

_KERNELS = {1: ("identity", None), 2: ("half_squared_diff", None), 3: ("max_m", 3)}


def random_dataset(rng: np.random.Generator, tied: bool, m: int, n_max: int = 12):
    n = int(rng.integers(m, n_max + 1))
    if tied:
        return rng.integers(1, 4, size=n).astype(float)
    return rng.normal(size=n)


def _oracle_rank_l(sorted_vals, N, alpha, beta):
    lo = -math.floor(-alpha * N)
    hi = -math.floor(-beta * N)
    return math.fsum(sorted_vals[i - 1] for i in range(lo, hi)) / N


def _faulty_trimmed_l(values, trim):
    c = trim_counts(values, trim, check=False)
    lo = c.nbar_alpha + 1
    return math.fsum(values.sorted[lo - 1:c.nbar_beta - 1]) / values.N


def check_rank_form(rng, datasets: int, fault: str | None = None):
    impl = _faulty_trimmed_l if fault == "nbar_off_by_one" else trimmed_l
    checked = 0
    for d in range(datasets):
        m = int(rng.integers(1, 4))
        name, arity = _KERNELS[m]
        kernel = builtin_kernel(name, arity)
        x = random_dataset(rng, tied=bool(d % 2), m=m)
        vals = enumerate_values(x, kernel)
        s = vals.sorted.tolist()
        for a in LEVEL_GRID:
            for b in LEVEL_GRID:
                if not a < b:
                    continue
                got = impl(vals, TrimSpec(a, b))
                want = _oracle_rank_l(s, vals.N, a, b)
                checked += 1
                if got != want:
                    return False, checked, {
                        "sample": x.tolist(), "kernel": kernel.to_dict(),
                        "alpha": str(a), "beta": str(b), "got": got, "expected": want,
                    }
    return True, checked, None


def _bracket_cases():
    yield builtin_model("uniform01"), "max_m", 2, Fraction(1, 4), Fraction(16, 25)
    yield builtin_model("paper_piecewise", alpha=0.25, beta=0.64, m=2), "max_m", 2, Fraction(1, 4), Fraction(16, 25)
    yield builtin_model("paper_piecewise", alpha=0.2, beta=0.7, m=1), "identity", 1, Fraction(1, 5), Fraction(7, 10)
    yield builtin_model("discrete_uniform", k=3), "identity", 1, Fraction(1, 3), Fraction(2, 3)
    yield builtin_model("discrete_uniform", k=4), "max_m", 2, Fraction(1, 4), Fraction(9, 16)


def check_decomposition(rng, cases: int, tol: float = 1e-10):
    setups = []
    for model, kname, m, a, b in _bracket_cases():
        kernel = builtin_kernel(kname, m if kname == "max_m" else None)
        dist = kernel_distribution(model, kernel)
        trim = TrimSpec(a, b)
        setups.append((model, kernel, trim, pop_quantiles(dist, a), pop_quantiles(dist, b)))
    worst = 0.0
    for c in range(cases):
        model, kernel, trim, ba, bb = setups[c % len(setups)]
        n = int(rng.integers(max(kernel.arity, 2), 41))
        x = sample(model, n, SeedSpec(int(rng.integers(2**63)), c))
        vals = enumerate_values(x, kernel)
        dec = decompose_trimmed_sum(vals, trim, ba, bb)
        rel = dec.residual() / (1 + abs(dec.lhs))
        worst = max(worst, rel)
        if not rel <= tol:
            return False, c + 1, {
                "sample": x.tolist(), "model": model.to_dict(), "kernel": kernel.to_dict(),
                "alpha": str(trim.alpha), "beta": str(trim.beta),
                "lhs": dec.lhs, "rhs": dec.rhs(), "relative_residual": rel,
            }
    return True, cases, {"max_relative_residual": worst}


def check_counts_and_events(rng, probes: int):
    for p in range(probes):
        m = int(rng.integers(1, 3))
        name, arity = _KERNELS[m]
        kernel = builtin_kernel(name, arity)
        x = random_dataset(rng, tied=bool(p % 2), m=m)
        vals = enumerate_values(x, kernel)
        s = vals.sorted
        N = vals.N
        # probe at kernel values themselves half of the time, to hit ties
        xi = float(rng.choice(s)) if p % 4 < 2 else float(rng.normal(s.mean(), s.std() + 1))
        below = sum(1 for h in s if h < xi)
        at_or_below = sum(1 for h in s if h <= xi)
        tc = threshold_counts(vals, xi)
        ok_counts = (tc.strictly_below == below and tc.at_or_below == at_or_below
                     and ecdf_left(vals, xi) == below / N and ecdf(vals, xi) == at_or_below / N)
        # the event identities need t in (0, 1]; H_n^-1(0) = h_1 is a convention
        t = Fraction(int(rng.integers(1, 1001)), 1000)
        q = equantile(vals, t)
        h_x = Fraction(at_or_below, N)
        ok_events = ((q > xi) == (t > h_x)) and ((q <= xi) == (t <= h_x))
        ok_events = ok_events and q == s[math.ceil(t * N) - 1]
        if not (ok_counts and ok_events):
            return False, p + 1, {"sample": x.tolist(), "kernel": kernel.to_dict(), "xi": xi, "t": str(t)}
    return True, probes, None


def check_identities(seed: int = 0, trials: int = 1, fault: str | None = None) -> dict:
    """Run every suite ``trials`` times; returns a JSON-ready report."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}")
    suites = {
        "rank_form": lambda rng: check_rank_form(rng, 40, fault),
        "trimmed_sum_decomposition": lambda rng: check_decomposition(rng, 50),
        "counts_and_events": lambda rng: check_counts_and_events(rng, 250),
    }
    report = {"seed": seed, "trials": trials, "suites": {}}
    for k, (name, fn) in enumerate(suites.items()):
        total, witness, passed = 0, None, True
        for t in range(trials):
            ok, count, info = fn(SeedSpec(seed, k).child(t).generator())
            total += count
            if not ok:
                passed, witness = False, info
                break
            witness = witness or info
        entry = {"passed": passed, "checked": total}
        if not passed:
            entry["witness"] = witness
        elif witness:
            entry.update(witness)
        report["suites"][name] = entry
    report["passed"] = all(v["passed"] for v in report["suites"].values())
    return report
