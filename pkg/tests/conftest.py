import pytest

from morphopt.geometry import DesignSpace, PanelChainSpec
from morphopt.rig.synthetic import SyntheticDragModel


@pytest.fixture(scope="session")
def default_space():
    return DesignSpace()


@pytest.fixture(scope="session")
def full_grid():
    return DesignSpace(PanelChainSpec.unconstrained())


@pytest.fixture
def quiet_model():
    return SyntheticDragModel().noiseless()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
