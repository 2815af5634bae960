import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from scherk.errors import DivergenceError, ValidationError
from scherk.gluing import (MatchState, balancing_check, dtn_operator, glue, match_boundary,
                           neck_immersion, refinement_study, symmetry_defect)
from scherk.lattice import sphere_volume
from scherk.meshio import glued_slice_mesh, manifold_report, mesh_symmetry_defect

pytestmark = pytest.mark.slow

EPS = 0.1


@pytest.fixture(scope="module")
def coarse_dtn(basis32, rho, coarse_grid):
    return dtn_operator(basis32, rho, coarse_grid)


@pytest.fixture(scope="module")
def surface(basis32, profile3, square_torus, rho, coarse_grid, coarse_dtn):
    return glue(EPS, basis32, profile3, square_torus, rho, grid=coarse_grid, dtn=coarse_dtn,
                neck_step=0.02)


def test_dtn_is_invertible(coarse_dtn):
    assert coarse_dtn.smallest_singular_value > 1e-3


def test_matching_converges(surface):
    st = surface.state
    assert max(st.dirichlet, st.neumann) <= 1e-8 * EPS
    assert st.history[-1]["step"] < 1e-10
    bound = 30 * EPS**2
    assert surface.basis.c2_norm(st.g) <= bound and surface.basis.c2_norm(st.h) <= bound
    # early steps contract
    assert np.all(np.array(st.contraction[:3]) < 0.9)


def test_certificates(surface):
    cert = surface.certificates
    assert cert["symmetry_defect"] <= 1e-10
    assert cert["mean_curvature"] < 0.05
    assert cert["interface_c0"] <= 1e-8 * EPS


def test_interface_continuity(surface):
    # neck ring at s_eps agrees with the outer height on the sphere
    theta = surface.basis.full_points()
    X = neck_immersion(surface.neck, surface.profile, surface.basis, surface.neck.s_eps, theta)
    assert_allclose(np.linalg.norm(X[:, :3], axis=1), surface.rho, rtol=1e-12)
    z_out = surface.eps * surface.profile.c_inf - surface.basis.synthesize(surface.state.g)
    assert_allclose(X[:, 3], z_out, atol=1e-8)


def test_slope_and_balancing(surface):
    ratio = surface.c_eps / EPS**2
    assert 0.35 < ratio < 0.8
    bal = balancing_check(surface)
    assert bal["height_spread"] <= 0.01
    assert_allclose(bal["catenoid_flux"], bal["catenoid_flux_expected"], rtol=0.01)
    assert_allclose(bal["catenoid_flux_expected"], EPS**2 * sphere_volume(2))
    assert_allclose(bal["flux_identity"], bal["slope_ratio"], rtol=1e-10)


def test_slice_mesh(surface):
    mesh = glued_slice_mesh(surface)
    rep = manifold_report(mesh)
    assert rep["nonmanifold"] == 0 and rep["misoriented"] == 0
    assert mesh_symmetry_defect(mesh, (0, 1, 2)) <= 1e-10
    assert symmetry_defect(surface) <= 1e-10


def test_refinement_requires_nested_grids(surface):
    with pytest.raises(ValidationError):
        refinement_study(surface, surface)


def test_eps_must_be_below_rho(basis32, profile3, rho, coarse_grid):
    with pytest.raises(ValidationError):
        match_boundary(1.0, rho, basis32, profile3, coarse_grid)


def test_divergence_is_reported(basis32, profile3, rho, coarse_grid, coarse_dtn):
    with pytest.raises(DivergenceError) as info:
        match_boundary(EPS, rho, basis32, profile3, coarse_grid, kappa=1e-3, dtn=coarse_dtn)
    assert info.value.history


def test_match_state_contraction():
    st = MatchState(0.1, np.zeros(2), np.zeros(2),
                    history=[{"step": 1.0}, {"step": 0.5}, {"step": 0.1}])
    assert_allclose(st.contraction, [0.5, 0.2])
    assert math.isinf(st.dirichlet)
