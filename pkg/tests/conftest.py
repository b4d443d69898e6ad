import pytest

from hyperrank.cantor import build_cantor, cover_level_set
from hyperrank.eigenfield import ConstructedFunctions, eigen_mesh


@pytest.fixture(scope="session")
def default_tree():
    return build_cantor(cover_level_set(N=12, delta=1e-3), depth=8, seed=0)


@pytest.fixture(scope="session")
def default_funcs(default_tree):
    return ConstructedFunctions(default_tree, 12)


@pytest.fixture(scope="session")
def default_mesh(default_tree):
    return eigen_mesh(default_tree)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
