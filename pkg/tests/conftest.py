import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hclab import build_gamma, canonical_p5

settings.register_profile(
    "hclab",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("hclab")

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def canon():
    return canonical_p5()


@pytest.fixture(scope="session")
def canon_mesh(canon):
    return build_gamma(canon, 33, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    """Record a criterion verdict; printed again in the terminal summary."""

    def record(number, passed, detail):
        line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
