import numpy as np
import pytest
from hypothesis import settings

from qrlab.zoo import make_zoo_map

settings.register_profile("qrlab", max_examples=60, deadline=None)
settings.load_profile("qrlab")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def expo():
    return make_zoo_map("exponential")


@pytest.fixture(scope="session")
def wp():
    return make_zoo_map("elliptic")


@pytest.fixture(scope="session")
def exp_sq():
    return make_zoo_map("exp_square")


@pytest.fixture(scope="session")
def ident():
    return make_zoo_map("identity")


@pytest.fixture(scope="session")
def const():
    return make_zoo_map("constant")


@pytest.fixture(scope="session")
def rational5():
    # degree 5 over degree 3, with a pole pair and a real pole
    return make_zoo_map({"kind": "rational", "numerator": [1, 0, -2, 0, 1, 3],
                         "denominator": [1, -0.5, 2, 1]})


@pytest.fixture(scope="session")
def plane_grid():
    g = np.arange(-20, 20.001, 0.5)
    return np.array(np.meshgrid(g, g, indexing="ij")).reshape(2, -1).T
