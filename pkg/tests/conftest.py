import numpy as np
import pytest

from trimmed_ustat.empirical import KernelValues


def kv(sorted_values, n=None, m=1):
    vals = np.asarray(sorted_values, dtype=float)
    return KernelValues(n if n is not None else vals.size, m, vals)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
