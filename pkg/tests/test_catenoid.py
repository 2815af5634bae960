import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from scherk.catenoid import (end_expansion_check, immersion_point, neck_truncation, solve_profile,
                             unit_normal)
from scherk.errors import ValidationError
from scherk.geometry import mean_curvature_stencil


@pytest.mark.parametrize("n", [3, 4, 5])
def test_profile_against_closed_form(n):
    prof = solve_profile(n)
    s = np.linspace(-6, 6, 1201)
    ref = np.cosh((n - 1) * s)
    assert np.max(np.abs(prof.phi(s) ** (n - 1) / ref - 1)) <= 1e-8
    assert np.max(prof.energy_defect()) <= 1e-10


def test_derivatives_and_parity(profile3):
    s = np.linspace(-3, 3, 61)
    assert_allclose(profile3.phi(-s), profile3.phi(s))
    assert_allclose(profile3.psi(-s), -profile3.psi(s))
    exact = np.sinh(2 * s) / np.sqrt(np.cosh(2 * s))
    assert_allclose(profile3.dphi(s), exact, atol=1e-9)
    assert_allclose(profile3.dpsi(s), 1 / profile3.phi(s))


def test_c_inf_against_quadrature(profile3):
    ref, _ = quad(lambda t: np.sqrt(2 * np.exp(-2 * t) / (1 + np.exp(-4 * t))), 0, np.inf,
                  epsabs=1e-13)
    assert_allclose(profile3.c_inf, ref, atol=1e-8)


@pytest.mark.parametrize("n", [3, 4])
def test_end_expansion(n):
    end = end_expansion_check(solve_profile(n))
    assert abs(end.a / end.a_expected - 1) <= 0.01
    assert abs(end.decay_exponent - end.decay_expected) <= 0.1


def test_catenoid_is_minimal(profile3):
    def X(p):
        th = np.stack([np.cos(p[..., 1]) * np.cos(p[..., 2]), np.cos(p[..., 1]) * np.sin(p[..., 2]),
                       np.sin(p[..., 1])], axis=-1)
        return immersion_point(profile3, p[..., 0], th)

    params = np.array([[0.3, 0.2, 0.1], [-1.0, 0.5, 1.0], [1.5, -0.4, 2.0]])
    H = mean_curvature_stencil(X, params, 1e-3)
    assert_allclose(H, 0.0, atol=1e-5)


def test_unit_normal(profile3):
    th = np.array([1.0, 0.0, 0.0])
    N = unit_normal(profile3, 0.7, th)
    assert_allclose(np.linalg.norm(N), 1.0)
    d = 1e-6
    T = (immersion_point(profile3, 0.7 + d, th) - immersion_point(profile3, 0.7 - d, th)) / (2 * d)
    assert abs(T @ N) < 1e-8


def test_neck_truncation(profile3):
    s = neck_truncation(0.05, 0.443, profile3)
    assert_allclose(0.05 * profile3.phi(s), 0.443, rtol=1e-13)
    with pytest.raises(ValidationError):
        neck_truncation(0.5, 0.443, profile3)


def test_bad_arguments(profile3):
    with pytest.raises(ValidationError):
        solve_profile(1)
    with pytest.raises(ValidationError):
        solve_profile(3, step=1e-2)
    with pytest.raises(ValidationError):
        profile3.phi(profile3.s_max + 1)
    assert math.isinf(solve_profile(2).c_inf)
