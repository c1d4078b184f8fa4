import struct

import numpy as np
import pytest

from sampled_spectral import LogisticObjective, synthesize


def logistic_problem(count=2000, n=20, seed=0, **kw):
    """Synthetic logistic objective that uses every point for training (N = count)."""
    ds = synthesize(n, count, seed=seed, **kw)
    return LogisticObjective(ds.dense(), ds.labels)


def trace_bits(trace):
    """Every field of every record as raw bytes, so NaN and -0.0 compare exactly."""
    out = []
    for rec in trace:
        for value in rec.as_dict().values():
            out.append(struct.pack("<d", value) if isinstance(value, float) else repr(value).encode())
    return b"|".join(out)


@pytest.fixture(scope="session")
def problem():
    return logistic_problem()


@pytest.fixture(scope="session")
def small_problem():
    return logistic_problem(count=50, n=5, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
