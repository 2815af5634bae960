import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from scherk.errors import InputSizeError, SymmetryError, ValidationError
from scherk.lattice import Lattice
from scherk.outer import (QuotientDomainGrid, ball_harmonic_extension, barrier_residual, check_nu,
                          default_nu, graph_nonlinearity, graph_residual,
                          harmonic_extension_outer, laplace_exterior_solve, nu_range,
                          outer_lipschitz_probe, radial_fd_solve, radial_green,
                          solve_outer_graph, zeta)


def test_nu_ranges():
    assert nu_range(3, 2) == (-math.inf, 0.0)
    assert nu_range(4, 2) == (-2.0, 0.0)
    assert nu_range(5, 1) == (-2.0, 0.0)
    assert default_nu(3, 2) == -1.0
    with pytest.raises(ValidationError):
        check_nu(3, 2, 0.5)


def test_zeta():
    r = np.array([1.0, 2.0])
    assert_allclose(zeta(1, r), r)
    assert_allclose(zeta(2, r), np.log(r))
    assert_allclose(zeta(3, r), 0.0)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_radial_formula_against_fd(p):
    def f(r):
        r = np.asarray(r, dtype=float)
        return np.exp(-r * r) * (1 - r * r)

    r, w = radial_fd_solve(f, p, 12.0, 2e-3)
    pts = np.array([0.5, 1.0, 3.0])
    idx = np.round(pts / (r[1] - r[0])).astype(int)
    assert_allclose(w[idx], radial_green(f, pts, p), atol=1e-5)


def test_barrier_identity_second_order():
    errs = [barrier_residual(-1.0, 1, 2, h)["error"] for h in (0.02, 0.01)]
    assert_allclose(math.log2(errs[0] / errs[1]), 2.0, atol=0.2)
    # the sign-flipped form disagrees unless p = 2
    assert barrier_residual(-1.0, 1, 2, 0.01)["flipped_error"] > 0.1
    assert barrier_residual(-1.0, 2, 1, 0.01)["flipped_error"] < 1e-3


def test_grid_validation(basis32, square_torus):
    with pytest.raises(ValidationError):
        QuotientDomainGrid(basis32, square_torus, 2.0)
    oblique = Lattice(np.array([[2.0, 0.5], [0.0, 2.0 * math.pi]]))
    with pytest.raises(SymmetryError):
        QuotientDomainGrid(basis32, oblique, 0.3)


def test_constant_data_extension(coarse_grid, basis32):
    g = basis32.constant_coeffs(1e-2)
    W = harmonic_extension_outer(g, coarse_grid)
    lap = coarse_grid.laplacian(W.values, W.data)
    ok = np.isfinite(lap) & (coarse_grid.dist > 2 * coarse_grid.rho)
    assert np.max(np.abs(lap[ok])) < 1e-10
    # the mean mode is affine in r1 far out
    prof = W.mean_profile()[coarse_grid.r > 0.5 * coarse_grid.R1]
    assert np.max(np.abs(np.diff(prof, 2))) < 1e-10
    a, b = W.deficiency
    assert a != 0.0


def test_source_term_solve(coarse_grid, basis32):
    r = coarse_grid.coords[..., 0]
    f = np.exp(-((r - 1.5) ** 2))
    u = laplace_exterior_solve(f, np.zeros(len(basis32)), coarse_grid)
    lap = coarse_grid.laplacian(u.values, u.data)
    ok = np.isfinite(lap) & ~coarse_grid.inside
    assert_allclose(lap[ok], np.where(coarse_grid.inside, 0, f)[ok], atol=1e-8)
    with pytest.raises(ValidationError):
        laplace_exterior_solve(None, np.zeros(3), coarse_grid)


def test_zero_data_gives_zero_graph(coarse_grid, basis32):
    sol = solve_outer_graph(np.zeros(len(basis32)), 0.1, coarse_grid)
    assert np.nanmax(np.abs(sol.u.values)) == 0.0


def test_minimal_graph_residual(coarse_grid, basis32):
    g = 1e-2 * np.linspace(1, 0.1, len(basis32))
    sol = solve_outer_graph(g, 0.1, coarse_grid)
    assert sol.history[-1] < 1e-12
    assert np.nanmax(np.abs(graph_residual(sol.u))) < 1e-10
    assert_allclose(sol.u.data, -g)
    with pytest.raises(InputSizeError):
        solve_outer_graph(g, 0.01, coarse_grid, kappa=1.0)


def test_graph_nonlinearity_vanishes_for_affine():
    G = np.array([[0.3, -0.2, 0.1]])
    assert_allclose(graph_nonlinearity(G, np.zeros((1, 3, 3))), 0.0)


def test_ball_harmonic(basis32, rho):
    h = np.zeros(len(basis32))
    h[1] = 1.0
    W = ball_harmonic_extension(h, rho, basis32)
    x = rho * basis32.reduced[:3]
    assert_allclose(W(x), basis32.values[:3, 1])
    assert_allclose(W.radial_derivative_at_rho()[1], basis32.degrees[1] / rho)


def test_lipschitz_probe(coarse_grid, basis32):
    g1 = np.zeros(len(basis32))
    g2 = g1.copy()
    g2[1] = 1e-4
    assert outer_lipschitz_probe(g1, g1, 0.1, coarse_grid) == 0.0
    assert 0 <= outer_lipschitz_probe(g1, g2, 0.1, coarse_grid) < 1e-2
