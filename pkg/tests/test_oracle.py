import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from scherk.errors import ValidationError
from scherk.oracle import (ScherkSurface, blow_down_fit, blow_up_defect, level_set_mean_curvature,
                           plane, sphere, waist_radius)


def test_sphere_curvature_is_two_over_radius():
    R = 1.7
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 3))
    pts = R * x / np.linalg.norm(x, axis=1, keepdims=True)
    assert_allclose(level_set_mean_curvature(sphere(R), pts), 2 / R, rtol=1e-13)


def test_plane_is_minimal():
    pts = np.random.default_rng(1).standard_normal((10, 3))
    pts[:, 2] = 0
    assert_allclose(level_set_mean_curvature(plane(), pts), 0.0, atol=0)


@pytest.mark.parametrize("eps", [0.2, 0.7, 1.3])
def test_derivatives_against_central_differences(eps):
    surf = ScherkSurface(eps)
    p = np.array([0.3, -0.8, 0.4])
    d = 1e-5
    E = np.eye(3) * d
    grad_fd = np.array([(surf.F(p + e) - surf.F(p - e)) / (2 * d) for e in E])
    hess_fd = np.array([(surf.grad(p + e) - surf.grad(p - e)) / (2 * d) for e in E])
    assert_allclose(surf.grad(p), grad_fd, atol=1e-9)
    assert_allclose(surf.hess(p), hess_fd, atol=1e-8)


@pytest.mark.parametrize("eps", [0.3, 0.7, 1.2])
def test_zero_set_is_minimal(eps):
    surf = ScherkSurface(eps)
    pts = surf.sample(2000, seed=3)
    assert_allclose(surf.F(pts), 0.0, atol=1e-11)
    assert np.max(np.abs(level_set_mean_curvature(surf, pts))) <= 1e-8


def test_solve_z_and_x1_are_inverse():
    surf = ScherkSurface(0.5)
    x1 = np.linspace(0.5, 3.0, 7)
    x2 = np.linspace(-1.0, 1.0, 7)
    z = surf.solve_z(x1, x2)
    assert_allclose(surf.solve_x1(x2, z), x1, rtol=1e-10)


def test_eps_out_of_range():
    for eps in (0.0, -0.1, math.pi / 2):
        with pytest.raises(ValidationError):
            ScherkSurface(eps)


def test_blow_down_matches_closed_form():
    fit = blow_down_fit(ScherkSurface(0.5))
    assert_allclose(fit.slope, math.tan(0.5), atol=1e-6)
    assert_allclose(fit.offset, -2 * math.sin(0.5) * math.log(math.tan(0.5)), atol=1e-4)
    assert fit.decay_rate < 0


def test_blow_up_defect_is_quadratic():
    d1, d2 = blow_up_defect(0.1), blow_up_defect(0.05)
    assert 0.18 <= d2 / d1 <= 0.32


def test_waist_tends_to_unit_catenoid():
    assert abs(waist_radius(0.02) - 1.0) < 1e-3


def test_quadrant_patch_on_zero_set():
    surf = ScherkSurface(0.6)
    P = surf.quadrant_patch(n_x2=17, n_tau=10, x1_max=3.0)
    assert_allclose(surf.F(P), 0.0, atol=1e-9)
    assert np.all(P[..., 0] >= 0) and np.all(P[..., 2] >= 0)
