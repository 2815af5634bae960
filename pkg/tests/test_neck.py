import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from scherk.catenoid import neck_truncation
from scherk.errors import InjectivityError, InputSizeError, ValidationError
from scherk.neck import (NeckField, NeckOperator, apply_L, apply_L_modes, build_tilde_w,
                         green_solve, interpolating_normal, jacobi_fields, largest_jacobi_zero,
                         neck_lipschitz_probe, poisson_extend, potential, solve_neck, uniform_grid)

EPS, RHO = 0.1, 0.443


def test_jacobi_fields_second_order(profile3):
    errs = []
    for h in (2e-3, 1e-3):
        s = np.arange(-round(4 / h), round(4 / h) + 1) * h
        r = apply_L_modes(np.stack(jacobi_fields(profile3, s)), s, 0.0, profile3)
        errs.append(np.max(np.abs(r * profile3.phi(s[1:-1]) ** -0.5)))
    assert errs[1] <= 1e-5
    assert_allclose(math.log2(errs[0] / errs[1]), 2.0, atol=0.3)


def test_jacobi_zero(profile3):
    s0 = largest_jacobi_zero(profile3)
    _, plus = jacobi_fields(profile3, np.array([s0]))
    assert abs(plus[0]) < 1e-9
    assert 0.5 < s0 < 2.0


def test_green_solve_manufactured(profile3, basis32):
    S = 5.0
    s = uniform_grid(S, 1e-3)
    k = math.pi / (2 * S)
    w = np.cos(k * s)
    coef = -basis32.eigenvalues[:, None] - 0.25 + potential(profile3, s)[None, :]
    f = NeckField(basis32, s, (coef - k * k) * w[None, :], 0.0)
    sol = green_solve(f, profile3)
    assert_allclose(sol.coeffs, np.broadcast_to(w, sol.coeffs.shape), atol=1e-6)
    # L(G f) = f away from the Dirichlet end
    back = apply_L(sol, profile3)
    assert_allclose(back.coeffs[:, :-1], f.coeffs[:, :-1], atol=1e-8)


def test_green_solve_needs_long_cylinder(profile3, basis32):
    s = uniform_grid(0.5)
    f = NeckField(basis32, s, np.ones((len(basis32), s.size)), 0.0)
    with pytest.raises(InjectivityError):
        green_solve(f, profile3)


def test_poisson_extension_decays(basis32):
    g = np.ones(len(basis32))
    s = np.linspace(0, 4, 81)
    P = poisson_extend(g, basis32, s)
    assert_allclose(P.coeffs[:, 0], g)
    assert_allclose(P.coeffs[:, -1], np.exp(-4 * basis32.roots))


def test_tilde_w_boundary_value(profile3, basis32):
    h = np.zeros(len(basis32))
    h[1] = 1e-3
    tw = build_tilde_w(h, EPS, RHO, profile3, basis32)
    s_eps = neck_truncation(EPS, RHO, profile3)
    assert_allclose(tw.s[-1], s_eps)
    # the far-end image adds exp(-2 gamma s_eps)
    g = profile3.phi(s_eps) ** 0.5 * h[1]
    assert_allclose(tw.coeffs[1, -1], g * (1 + math.exp(-2 * basis32.roots[1] * s_eps)))
    with pytest.raises(InputSizeError):
        build_tilde_w(np.ones(len(basis32)), EPS, RHO, profile3, basis32, kappa=1.0)


def test_interpolating_normal(profile3):
    s_eps = neck_truncation(EPS, RHO, profile3)
    s = np.linspace(-s_eps, s_eps, 401)
    rad, xi = interpolating_normal(profile3, s, s_eps)
    assert_allclose(rad**2 + xi**2, 1.0, atol=1e-14)
    # catenoid normal near the waist, vertical on the outer annulus
    waist = np.abs(s) < max(s_eps - 2.0, 0.0)
    assert_allclose(xi[waist], -profile3.dphi(s[waist]) / profile3.phi(s[waist]))
    outer = EPS * profile3.phi(s) >= 0.45 * RHO
    assert_allclose(rad[outer], 0.0, atol=1e-15)
    assert_allclose(xi[outer], -np.sign(s[outer]))
    with pytest.raises(ValidationError):
        interpolating_normal(profile3, s, 0.3)


@pytest.fixture(scope="module")
def operator(basis32, profile3):
    return NeckOperator(basis32, profile3, EPS, RHO)


def test_zero_data_leaves_catenoid(operator, basis32, profile3):
    sol = solve_neck(np.zeros(len(basis32)), EPS, RHO, basis32, profile3, operator=operator)
    assert np.max(np.abs(sol.w.coeffs)) < 1e-10
    assert sol.residual < 1e-10


def test_small_data_solution(operator, basis32, profile3):
    h = EPS**2 * np.linspace(1.0, 0.2, len(basis32)) / len(basis32)
    sol = solve_neck(h, EPS, RHO, basis32, profile3, operator=operator)
    # projected residual converges; the nodal one keeps the mode truncation error
    assert np.max(np.abs(operator.residual(sol.w.coeffs))) < 1e-9
    assert sol.residual < 1e-4
    assert sol.history[-1] < 1e-10
    # Dirichlet data of v vanish at s_eps, w~ carries h
    assert_allclose(sol.v.coeffs[:, -1], 0.0, atol=1e-14)
    assert_allclose(sol.w.coeffs[:, -1], sol.tilde_w.coeffs[:, -1])


def test_lipschitz_probe_is_small(operator, basis32, profile3):
    h1 = np.zeros(len(basis32))
    h2 = h1.copy()
    h2[1] = 1e-5
    r = neck_lipschitz_probe(h1, h2, EPS, RHO, basis32, profile3, operator=operator)
    assert 0 < r < 1
    assert neck_lipschitz_probe(h1, h1, EPS, RHO, basis32, profile3, operator=operator) == 0.0


def test_delta_range(basis32, profile3):
    with pytest.raises(ValidationError):
        solve_neck(np.zeros(len(basis32)), EPS, RHO, basis32, profile3, delta=0.6)
