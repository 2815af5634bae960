import pytest

from scherk.catenoid import cached_profile
from scherk.lattice import Lattice, normalize_volume
from scherk.outer import QuotientDomainGrid
from scherk.sphere import build_invariant_basis


@pytest.fixture(scope="session")
def profile3():
    return cached_profile(3)


@pytest.fixture(scope="session")
def basis32():
    return build_invariant_basis(3, 2, 6)


@pytest.fixture(scope="session")
def square_torus():
    return normalize_volume(Lattice.from_diag([1.0, 1.0]))


@pytest.fixture(scope="session")
def rho(square_torus):
    return float(square_torus.periods.min()) / 8.0


@pytest.fixture(scope="session")
def grid(basis32, square_torus, rho):
    return QuotientDomainGrid(basis32, square_torus, rho)


@pytest.fixture(scope="session")
def coarse_grid(basis32, square_torus, rho):
    return QuotientDomainGrid(basis32, square_torus, rho, h=rho / 4)
