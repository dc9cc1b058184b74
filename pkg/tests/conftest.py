import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from roughwave import eikonal, metric

settings.register_profile(
    "roughwave", deadline=None, max_examples=25, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("roughwave")


@pytest.fixture(scope="session")
def flat():
    return metric.minkowski()


@pytest.fixture(scope="session")
def bump():
    return metric.bump_metric(0.05)


@pytest.fixture(scope="session")
def flat_optics(flat):
    return eikonal.optics_for(flat)


@pytest.fixture(scope="session")
def flat_solver(flat):
    return eikonal.OpticalSolver(flat)


@pytest.fixture(scope="session")
def bump_solver(bump):
    return eikonal.OpticalSolver(bump)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


@pytest.fixture(scope="session")
def criterion():
    """Record one summary line per acceptance criterion (printed at session end)."""

    def record(number, part, passed, detail):
        # passed=None marks an informational line that does not count toward the criterion
        ACCEPTANCE[(number, part)] = (None if passed is None else bool(passed), detail)
        print(f"CRITERION {number} [{part}]: {_status(passed).upper()} {detail}")

    return record


def _status(passed):
    return "info" if passed is None else ("pass" if passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted({k[0] for k in ACCEPTANCE}):
        parts = {p: v for (n, p), v in ACCEPTANCE.items() if n == number}
        failed = [p for p, v in parts.items() if v[0] is False]
        ok = not failed
        tail = "" if ok else f" (failing: {', '.join(sorted(failed))})"
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}{tail}")
    for (number, part), (passed, detail) in sorted(ACCEPTANCE.items()):
        terminalreporter.write_line(f"  {number}.{part}: {_status(passed)} {detail}")
