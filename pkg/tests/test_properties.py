import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from scherk.config import config_from_dict, parse_config, write_config
from scherk.oracle import ScherkSurface, level_set_mean_curvature
from scherk.sphere import build_invariant_basis

BASIS = build_invariant_basis(3, 2, 6)


@settings(max_examples=40, deadline=None)
@given(eps=st.floats(0.05, 1.5), seed=st.integers(0, 10_000))
def test_scherk_zero_set_minimal(eps, seed):
    surf = ScherkSurface(eps)
    pts = surf.sample(200, seed=seed)
    assert np.max(np.abs(level_set_mean_curvature(surf, pts))) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(eps=st.floats(0.2, 1.3), x1=st.floats(-3, 3), x2=st.floats(-math.pi, math.pi))
def test_scherk_symmetries(eps, x1, x2):
    surf = ScherkSurface(eps)
    z = surf.solve_z(np.array([x1]), np.array([x2]))
    if np.isfinite(z[0]):
        for p in ([-x1, x2, z[0]], [x1, -x2, z[0]], [x1, x2, -z[0]], [x1, x2 + 2 * math.pi, z[0]]):
            assert abs(surf.F(np.array(p))) < 1e-9 * max(1.0, math.cosh(abs(x1)))


@settings(max_examples=30, deadline=None)
@given(c=st.lists(st.floats(-1, 1), min_size=len(BASIS), max_size=len(BASIS)))
def test_basis_round_trip(c):
    c = np.array(c)
    assert_allclose(BASIS.project(BASIS.synthesize(c)), c, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(eps=st.floats(0.01, 0.2), delta=st.floats(-0.45, 0.45), ell=st.integers(0, 8),
       a=st.floats(0.7, 1.4))
def test_config_round_trip(tmp_path_factory, eps, delta, ell, a):
    cfg = config_from_dict({"eps": eps, "delta": delta, "basis": {"ell_max": ell},
                            "lattice": {"diag": [1.0, a]}})
    path = tmp_path_factory.mktemp("cfg") / "c.toml"
    write_config(cfg, path)
    assert parse_config(path) == cfg
