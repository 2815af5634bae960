import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from scherk.errors import InvalidLatticeError, SymmetryError
from scherk.lattice import (Lattice, eval_torus_mode, invariant_torus_spectrum,
                            is_sign_compatible, lattice_volume, normalize_volume, sphere_volume)


def test_sphere_volumes():
    assert_allclose([sphere_volume(k) for k in range(4)],
                    [2.0, 2 * math.pi, 4 * math.pi, 2 * math.pi**2])


@pytest.mark.parametrize("diag", [[1.0], [1.0, 1.0], [1.0, 2.5], [1.0, 2.0, 3.0]])
def test_normalized_volume(diag):
    lat = normalize_volume(Lattice.from_diag(diag))
    assert_allclose(lattice_volume(lat), sphere_volume(lat.m), rtol=1e-14)
    assert lat.normalized


def test_square_torus_period():
    lat = normalize_volume(Lattice.from_diag([1.0, 1.0]))
    assert_allclose(lat.periods, math.sqrt(4 * math.pi))


def test_invalid_lattices():
    with pytest.raises(InvalidLatticeError):
        Lattice(np.zeros((2, 2)))
    with pytest.raises(InvalidLatticeError):
        Lattice(np.ones((2, 3)))


def test_sign_compatibility():
    assert is_sign_compatible(Lattice.from_diag([1.0, 2.0]))
    # rhombic lattice is compatible, a generic oblique one is not
    assert is_sign_compatible(Lattice(np.array([[1.0, 1.0], [1.0, -1.0]])))
    oblique = Lattice(np.array([[1.0, 0.3], [0.0, 1.0]]))
    assert not is_sign_compatible(oblique)
    with pytest.raises(SymmetryError):
        invariant_torus_spectrum(oblique, 10.0)


def test_spectrum_eigenvalues_and_orthonormality():
    lat = normalize_volume(Lattice.from_diag([1.0, 1.5]))
    spectrum = invariant_torus_spectrum(lat, 40.0)
    mu = spectrum.eigenvalues
    assert mu[0] == 0 and np.all(np.diff(mu) >= 0)
    a = lat.periods
    exact = sorted(4 * math.pi**2 * ((i / a[0]) ** 2 + (j / a[1]) ** 2)
                   for i in range(10) for j in range(10)
                   if 4 * math.pi**2 * ((i / a[0]) ** 2 + (j / a[1]) ** 2) <= 40.0)
    assert_allclose(mu, exact, rtol=1e-12)
    # midpoint quadrature is exact for these trigonometric polynomials
    N = 64
    g = [(np.arange(N) + 0.5) / N * al for al in a]
    X = np.stack(np.meshgrid(*g, indexing="ij"), axis=-1).reshape(-1, 2)
    V = np.stack([eval_torus_mode(md, lat, X) for md in spectrum.modes], axis=1)
    G = V.T @ V * lattice_volume(lat) / X.shape[0]
    assert_allclose(G, np.eye(len(spectrum)), atol=1e-12)


def test_modes_are_sign_invariant():
    lat = normalize_volume(Lattice.from_diag([1.0, 1.0]))
    spectrum = invariant_torus_spectrum(lat, 30.0)
    x = np.random.default_rng(0).uniform(0, 3, (20, 2))
    for md in spectrum.modes:
        v = md(lat, x)
        assert_allclose(md(lat, x * [-1, 1]), v, atol=1e-12)
        assert_allclose(md(lat, x * [1, -1]), v, atol=1e-12)
