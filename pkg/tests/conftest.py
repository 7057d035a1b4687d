import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def finite_difference(f, x, h=1e-5):
    """Central differences of a scalar function of a flat vector."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    """Max elementwise relative error.

    The denominator carries a floor of 1e-6 times the gradient scale so that
    entries many orders of magnitude below the largest one are compared at
    the finite-difference noise level instead of their own size.
    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    return float(np.max(np.abs(a - b) / (np.maximum(np.abs(a), np.abs(b)) + 1e-6 * scale), initial=0.0))


def blobs(n=200, d=6, anomaly_ratio=0.1, seed=0, shift=3.0):
    """Min-max-ish synthetic features in [0, 1] with a shifted anomaly cluster."""
    rng = np.random.default_rng(seed)
    n_anom = max(2, int(round(n * anomaly_ratio)))
    X = rng.normal(0.5, 0.08, size=(n, d))
    y = np.zeros(n, dtype=np.int8)
    y[:n_anom] = 1
    X[:n_anom] += rng.choice([-1, 1], size=(n_anom, d)) * shift * 0.08
    perm = rng.permutation(n)
    return np.clip(X[perm], 0, 1), y[perm]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance summary ---------------------------------------------------------

ACCEPTANCE: dict[str, tuple[str, str]] = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL/SKIP line per acceptance criterion."""

    def record(key: str, ok, detail: str):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        ACCEPTANCE[key] = (status, detail)
        print(f"[{status}] criterion {key}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k)):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {detail}")
