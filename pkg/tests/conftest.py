import numpy as np
import pytest

from singfourier import DensityFunction, LatticeOperator, eigendecompose


@pytest.fixture(scope="session")
def free_decomposition():
    """Eigendecomposition of the free half-line truncation at L = 4000."""
    return eigendecompose(LatticeOperator((), 4000))


@pytest.fixture(scope="session")
def rank3_operator():
    return LatticeOperator((1.0, -0.5, 0.3), 4000)


@pytest.fixture
def chi():
    return DensityFunction.indicator_unit()


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


CRITERIA = {
    1: "M_beta table",
    2: "Gamma-moment identity",
    3: "Plancherel smoothing identity",
    4: "sharp super-critical Cesaro rate and bound",
    5: "critical case: log t / t regime and incomplete-gamma ratio",
    6: "sub-critical 1/t rate",
    7: "free half-line density",
    8: "rank-three density bounds",
    9: "return-probability rates and bounds",
    10: "whole-line log t / t return rate",
    11: "pair sum against time quadrature",
    12: "Holder exponents and inverse consistency",
}
_criterion_results: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        ok = report.passed or report.skipped
        _criterion_results[crit] = _criterion_results.get(crit, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _criterion_results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criterion_results):
        status = "PASS" if _criterion_results[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {CRITERIA[n]}")
