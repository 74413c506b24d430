import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ditrotter import kernels

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    impl = kernels.backends()[request.param]
    for name in ("expm_herm_stack", "group_products", "propagate"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


# --- acceptance summary: one line per criterion ------------------------------------

ACCEPTANCE = {}


def record_criterion(number, part, passed, detail):
    ACCEPTANCE.setdefault(number, []).append((part, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[number]
        status = "PASS" if all(p for _, p, _ in parts) else "FAIL"
        detail = "; ".join(f"{name}: {'ok' if p else 'FAILED'} ({d})" for name, p, d in parts)
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
