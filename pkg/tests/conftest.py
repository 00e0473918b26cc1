import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = report.user_properties and dict(report.user_properties).get("criterion")
    if marker:
        number, title = marker
        outcome = "PASS" if report.outcome == "passed" else "FAIL"
        if _criteria.get(number, ("PASS",))[0] != "FAIL":
            _criteria[number] = (outcome, title)


@pytest.fixture(autouse=True)
def _record_criterion(request):
    m = request.node.get_closest_marker("criterion")
    if m is not None:
        request.node.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        outcome, title = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2} {outcome}: {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
