import numpy as np
import pytest

from fraclevy import _kernels
from fraclevy.chaos import BasisSpec, probe_set
from fraclevy.grid import TimeGrid
from fraclevy.levy_models import LevyModel, discretize_measure


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical or acceptance checks")
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE]


@pytest.fixture(scope="session")
def two_point():
    return LevyModel.two_point()


@pytest.fixture(scope="session")
def marks(two_point):
    return discretize_measure(two_point)


@pytest.fixture(scope="session")
def sep_basis(marks):
    """Separable basis: 8 time cells on [-1, 1], chaos order 4."""
    return BasisSpec(TimeGrid(-1.0, 1.0, 8), marks, 4, "separable")


@pytest.fixture(scope="session")
def atom_basis(marks):
    """Atoms basis: 4 time cells x 2 marks, chaos order 4."""
    return BasisSpec(TimeGrid(-1.0, 1.0, 4), marks, 4, "atoms")


@pytest.fixture(params=["separable", "atoms"])
def basis(request, sep_basis, atom_basis):
    return sep_basis if request.param == "separable" else atom_basis


@pytest.fixture
def probes(basis):
    return probe_set(basis)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=sorted(_kernels.implementations()))
def backend(request):
    return request.param
