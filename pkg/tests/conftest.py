import pytest

from jumpfct.analytic_core import ProcessSpec

# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: dict = {}


def fig1(mu=1.0, eta=1.0, lam=0.2):
    if eta == 1.0:
        return ProcessSpec.build(mu, 0.2, 0.0, 5.0, lam, 3.75)
    return ProcessSpec.build(mu, 0.2, 0.0, 5.0, lam, 3.75, b=3.75, eta=eta)


def fig4():
    return ProcessSpec.build(1.5, 0.2, 0.0, 6.0, 0.2, 2.0)


@pytest.fixture
def spec1():
    return fig1()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
