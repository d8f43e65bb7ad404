import sys

import numpy as np
import pytest

from macroatk.metrics import MetricId


ALL_METRICS = [
    MetricId("accuracy"),
    MetricId("precision"),
    MetricId("recall"),
    MetricId("balanced_accuracy"),
    MetricId("f_beta", beta=1.0),
    MetricId("f_beta", beta=2.0),
    MetricId("g_mean"),
    MetricId("jaccard"),
    MetricId("auc"),
    MetricId("instance_precision_at_k"),
    MetricId("mixed", lam=0.3, inner=MetricId("f_beta", beta=1.0)),
]


def random_interior_tensor(rng, m, floor=0.02):
    """Random (m, 2, 2) tensor with every entry >= floor and rows summing to 1."""
    raw = rng.dirichlet(np.ones(4), size=m)
    c = floor + (1 - 4 * floor) * raw
    return c.reshape(m, 2, 2)


def finite_difference(f, c, h=1e-6):
    g = np.zeros_like(c)
    it = np.nditer(c, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        up, dn = c.copy(), c.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (f(up) - f(dn)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
