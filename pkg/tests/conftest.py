import numpy as np
import pytest

from reserve import Instance


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, n=None, m=None, max_cells=6, density=0.8):
    """Small random instance with uniform arrivals on [0, 1]."""
    while True:
        n = n or int(rng.integers(1, 4))
        m = m or int(rng.integers(1, 4))
        if n * m <= max_cells:
            break
        n = m = None
    cap = rng.uniform(0.5, 2.0, size=m)
    u = rng.uniform(0.05, 1.0, size=(n, m)) * cap
    u[rng.random((n, m)) > density] = 0.0
    lam = rng.uniform(0.2, 4.0, size=n)
    return Instance.uniform_arrivals(cap, u, lam)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Records one PASS/FAIL line for an acceptance criterion, printed in the terminal summary."""
    import time

    class _Record:
        def __init__(self):
            self.label = request.node.name
            self.detail = ""
            self.t0 = time.perf_counter()

    rec = _Record()
    yield rec
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    elapsed = time.perf_counter() - rec.t0
    _ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} {rec.label} ({elapsed:.1f}s) {rec.detail}".rstrip())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
