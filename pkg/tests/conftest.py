import numpy as np
import pytest

from ocvu import OcvModel, OcvSocTable, fit


@pytest.fixture
def nernst():
    return OcvModel.nernst(3.7, 0.1, -0.1)


@pytest.fixture
def poly5(nernst):
    s = np.linspace(0.0, 1.0, 1001)
    return fit(OcvSocTable(s, nernst(s)), "poly", degree=5).model


def central_difference(f, s, h=1e-6):
    return (f(s + h) - f(s - h)) / (2 * h)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    name = request.node.name

    def record(label, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        return ok

    record.name = name
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
