import pytest

from cara.model import fig1_params, fig2_params, fig3_params

# filled by test_acceptance, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def fig1():
    return fig1_params()


@pytest.fixture
def fig2():
    return fig2_params()


@pytest.fixture
def fig3_1():
    return fig3_params(1)


@pytest.fixture
def fig3_2():
    return fig3_params(2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
